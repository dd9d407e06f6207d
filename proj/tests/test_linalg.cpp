#include <random>

#include <gtest/gtest.h>

#include "fmbs/linalg.hpp"
#include "support.hpp"

using namespace fmbs;

TEST(SolveStein, ZeroMGivesK) {
  std::mt19937 rng(1);
  const Mat K = test::random_matrix(rng, 4, 3);
  const Mat X = solve_stein(Mat::Zero(4, 4), test::random_matrix(rng, 3, 3), K);
  EXPECT_LT((X - K).norm(), 1e-14);
}

TEST(SolveStein, Scalar) {
  const Mat X = solve_stein(Mat::Constant(1, 1, 2.0), Mat::Constant(1, 1, 3.0), Mat::Constant(1, 1, 14.0));
  EXPECT_NEAR(X(0, 0), 2.0, 1e-15);
}

TEST(SolveStein, RandomFiveByFiveMatchesKronecker) {
  std::mt19937 rng(2);
  const Mat M = test::random_matrix(rng, 5, 5), N = test::random_matrix(rng, 5, 5), K = test::random_matrix(rng, 5, 5);
  const Mat X = solve_stein(M, N, K);
  EXPECT_LT(test::rel_err(X, test::kronecker_stein(M, N, K)), 1e-9);
  EXPECT_LE((M * X * N + X - K).norm(), 1e-8 * (1.0 + K.norm()));
}

TEST(SolveStein, RectangularAndUpToSeven) {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> size(1, 7);
  for (int t = 0; t < 100; ++t) {
    const Index p = size(rng), q = size(rng);
    const Mat M = test::random_matrix(rng, p, p), N = test::random_matrix(rng, q, q), K = test::random_matrix(rng, p, q);
    const Mat X = solve_stein(SteinProblem{M, N, K});
    EXPECT_LT(test::rel_err(X, test::kronecker_stein(M, N, K)), 1e-8) << p << "x" << q;
  }
}

TEST(SolveStein, IllPosedCarriesProduct) {
  // eigenvalues 1 and -1 multiply to -1
  const Mat M = Mat::Identity(2, 2);
  Mat N(2, 2);
  N << -1, 0, 0, 2;
  try {
    solve_stein(M, N, Mat::Ones(2, 2));
    FAIL() << "expected IllPosedStein";
  } catch (const IllPosedStein& e) {
    EXPECT_NEAR(e.product_real(), -1.0, 1e-12);
    EXPECT_NE(std::string(e.what()).find("ill-posed Stein equation"), std::string::npos);
  }
}

TEST(SolveSylvester, MatchesKronecker) {
  std::mt19937 rng(4);
  for (int t = 0; t < 20; ++t) {
    const Mat A = test::random_spd(rng, 4), B = test::random_spd(rng, 3), C = test::random_matrix(rng, 4, 3);
    const Mat X = solve_sylvester(A, B, C);
    EXPECT_LT((A * X + X * B - C).norm(), 1e-10 * (1.0 + C.norm()));
  }
}

TEST(PseudoInverse, Examples) {
  EXPECT_LT((pseudo_inverse(Mat::Identity(3, 3)) - Mat::Identity(3, 3)).norm(), 1e-15);
  Mat r(2, 2);
  r << 1, 0, 0, 0;
  EXPECT_LT((pseudo_inverse(r) - r).norm(), 1e-15);
}

TEST(PseudoInverse, PenroseAxioms) {
  std::mt19937 rng(5);
  for (int t = 0; t < 20; ++t) {
    const Index p = 2 + t % 5, q = 1 + t % 4;
    Mat A = test::random_matrix(rng, p, q);
    if (t % 3 == 0) A.col(0) = A.col(q - 1);  // rank deficient
    const Mat X = pseudo_inverse(A);
    EXPECT_LT((A * X * A - A).norm(), 1e-8);
    EXPECT_LT((X * A * X - X).norm(), 1e-8);
    EXPECT_LT(((A * X).transpose() - A * X).norm(), 1e-8);
    EXPECT_LT(((X * A).transpose() - X * A).norm(), 1e-8);
  }
}

TEST(SolveSpd, Examples) {
  std::mt19937 rng(6);
  const Mat B = test::random_matrix(rng, 3, 2);
  EXPECT_LT((solve_spd(Mat::Identity(3, 3), B) - B).norm(), 1e-15);
  EXPECT_NEAR(solve_spd(Mat::Constant(1, 1, 4.0), Mat::Constant(1, 1, 8.0))(0, 0), 2.0, 1e-15);
  const Mat A = test::random_spd(rng, 6);
  const Mat R = test::random_matrix(rng, 6, 3);
  const Mat X = solve_spd(A, R);
  EXPECT_LT((X - A.inverse() * R).norm(), 1e-10 * (1.0 + R.norm()));
  EXPECT_LE((A * X - R).norm(), 1e-10 * (1.0 + R.norm()));
}

TEST(SolveSpd, Errors) {
  Mat A(2, 2);
  A << 1, 2, 2, 1;  // indefinite
  try {
    solve_spd(A, Mat::Ones(2, 1));
    FAIL();
  } catch (const LinalgError& e) {
    EXPECT_NE(std::string(e.what()).find("matrix not positive definite"), std::string::npos);
  }
  Mat N(2, 2);
  N << 2, 1, 0, 2;
  EXPECT_THROW(solve_spd(N, Mat::Ones(2, 1)), LinalgError);
}

TEST(GOrthonormalize, Examples) {
  std::mt19937 rng(7);
  const Index m = 50, k = 5;
  MassMatrix G{(test::random_matrix(rng, m, 1).array().abs() + 0.1).matrix()};
  const Mat B = test::random_matrix(rng, m, k);
  const Mat Q = g_orthonormalize(B, G);
  EXPECT_LT((Q.transpose() * G.dense() * Q - Mat::Identity(k, k)).norm(), 1e-10);
  // same span
  const Mat coef = Q.colPivHouseholderQr().solve(B);
  EXPECT_LT((Q * coef - B).norm(), 1e-9 * B.norm());
  // idempotent and scale invariant
  EXPECT_LT((g_orthonormalize(Q, G) - Q).norm(), 1e-10);
  EXPECT_LT((g_orthonormalize(3.0 * B, G) - Q).norm(), 1e-12);
  // dense G overload agrees
  EXPECT_LT((g_orthonormalize(B, G.dense()) - Q).norm(), 1e-12);
}

TEST(GOrthonormalize, DependentColumnNamed) {
  std::mt19937 rng(8);
  Mat B = test::random_matrix(rng, 10, 3);
  B.col(2) = 2.0 * B.col(0) - B.col(1);
  try {
    g_orthonormalize(B, MassMatrix{Vec::Ones(10)});
    FAIL();
  } catch (const LinalgError& e) {
    EXPECT_NE(std::string(e.what()).find("column 2"), std::string::npos);
  }
}
