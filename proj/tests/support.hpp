#pragma once

// Test-side helpers and independent oracles. Nothing here calls the library
// routine it is used to check.

#include <atomic>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include <unistd.h>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "fmbs/operators.hpp"
#include "fmbs/spectral.hpp"
#include "fmbs/solver/objective.hpp"

namespace fmbs::test {

inline Mat random_matrix(std::mt19937& rng, Index r, Index c, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat A(r, c);
  for (Index i = 0; i < A.size(); ++i) A.data()[i] = n(rng);
  return A;
}

inline Mat random_spd(std::mt19937& rng, Index n, double shift = 1.0) {
  const Mat A = random_matrix(rng, n, n);
  return A * A.transpose() + shift * Mat::Identity(n, n);
}

/// Solves M X N + X = K through the explicit (I + N^T kron M) vec(X) = vec(K) system.
inline Mat kronecker_stein(const Mat& M, const Mat& N, const Mat& K) {
  const Index p = M.rows(), q = N.rows();
  const Mat A = Mat::Identity(p * q, p * q) + Eigen::kroneckerProduct(N.transpose(), M).eval();
  const Vec x = A.fullPivLu().solve(Eigen::Map<const Vec>(K.data(), K.size()));
  return Eigen::Map<const Mat>(x.data(), p, q);
}

/// Central finite-difference gradient of f with respect to X.
inline Mat fd_gradient(const std::function<double(const Mat&)>& f, const Mat& X, double h = 1e-6) {
  Mat g(X.rows(), X.cols());
  Mat Y = X;
  for (Index i = 0; i < X.size(); ++i) {
    const double x0 = Y.data()[i];
    Y.data()[i] = x0 + h;
    const double fp = f(Y);
    Y.data()[i] = x0 - h;
    const double fm = f(Y);
    Y.data()[i] = x0;
    g.data()[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double rel_err(const Mat& a, const Mat& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

/// Random reduced problem of dimension r with n descriptors: G SPD, W PSD.
inline ReducedProblem random_reduced(std::mt19937& rng, Index r, Index n) {
  ReducedProblem p;
  p.F = random_matrix(rng, r, n);
  p.G = random_spd(rng, r, 0.5) / static_cast<double>(r);
  const Mat L = random_matrix(rng, r, r);
  p.W = L * L.transpose() / static_cast<double>(r);
  p.pod.modes = Mat::Identity(r, r);
  p.pod.singular_values = Vec::Ones(r);
  return p;
}

/// Random full state for a pair of reduced problems.
inline SolverState random_state(std::mt19937& rng, const ReducedProblem& p1, const ReducedProblem& p2, Index k,
                                double rho = 1.5) {
  SolverState s;
  s.B1 = random_matrix(rng, p1.dim(), k, 0.5);
  s.B2 = random_matrix(rng, p2.dim(), k, 0.5);
  s.B1p = random_matrix(rng, p1.dim(), k, 0.5);
  s.B2p = random_matrix(rng, p2.dim(), k, 0.5);
  s.C = random_matrix(rng, k, k, 0.5);
  s.D = random_matrix(rng, k, k, 0.5);
  s.P1 = random_matrix(rng, k, k, 0.1);
  s.P2 = random_matrix(rng, k, k, 0.1);
  s.Q1p = random_matrix(rng, p1.dim(), k, 0.1);
  s.Q2p = random_matrix(rng, p2.dim(), k, 0.1);
  s.rho = rho;
  return s;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("fmbs_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fmbs::test

namespace fmbs::test {

/// Minimizer of a quadratic function of one matrix block, from function
/// values only: Hessian and gradient by exact-for-quadratics differences, then
/// one Newton step.
inline Mat quadratic_argmin(const std::function<double(const Mat&)>& f, const Mat& X0, double h = 1.0) {
  const Index n = X0.size();
  Mat H(n, n);
  Vec g(n);
  Mat X = X0;
  auto at = [&](Index i, double di, Index j, double dj) {
    Mat Y = X;
    Y.data()[i] += di;
    if (j >= 0) Y.data()[j] += dj;
    return f(Y);
  };
  const double f0 = f(X);
  Vec fi(n);
  for (Index i = 0; i < n; ++i) fi[i] = at(i, h, -1, 0.0);
  for (Index i = 0; i < n; ++i) {
    g[i] = (fi[i] - at(i, -h, -1, 0.0)) / (2.0 * h);
    for (Index j = i; j < n; ++j) {
      const double fij = i == j ? at(i, 2.0 * h, -1, 0.0) : at(i, h, j, h);
      H(i, j) = H(j, i) = i == j ? (fij - 2.0 * fi[i] + f0) / (h * h) : (fij - fi[i] - fi[j] + f0) / (h * h);
    }
  }
  const Vec step = H.ldlt().solve(g);
  Mat out = X0;
  for (Index i = 0; i < n; ++i) out.data()[i] -= step[i];
  return out;
}

/// One literal sweep of the plain scheme (no regularizers, fixed rho),
/// assembled from the textbook formulas with independent solvers.
inline SolverState hand_sweep(const SolverState& s0, const ReducedProblem& p1, const ReducedProblem& p2) {
  SolverState s = s0;
  const Index k = s.C.rows();
  const Mat I = Mat::Identity(k, k);
  const double rho = s.rho;
  const Mat &F1 = p1.F, &F2 = p2.F, &G1 = p1.G, &G2 = p2.G;

  {
    const Mat O1 = rho * G1 * s.B1p * s.B1p.transpose() * G1 + rho * G1;
    const Mat A1 = F1 * F1.transpose();
    const Mat Bm = s.C.transpose() * s.C;
    const Mat C1 = F1 * F2.transpose() * s.B2 * s.C + rho * G1 * s.B1p * (I - s.P1).transpose() +
                   rho * G1 * (s.B1p - s.Q1p);
    const Mat Oinv = O1.inverse();
    s.B1 = kronecker_stein(Oinv * A1, Bm, Oinv * C1);
  }
  {
    const Mat A2 = F2 * F2.transpose() + rho * G2 + rho * G2 * s.B2p * s.B2p.transpose() * G2;
    const Mat B2r = F2 * F1.transpose() * s.B1 * s.C.transpose() + rho * G2 * s.B2p * (I - s.P2).transpose() +
                    rho * G2 * (s.B2p - s.Q2p);
    s.B2 = A2.partialPivLu().solve(B2r);
  }
  auto aux = [&](const Mat& G, const Mat& B, const Mat& P, const Mat& Q) -> Mat {
    const Mat A = rho * G + rho * G * B * B.transpose() * G;
    return A.partialPivLu().solve(rho * G * B * (I - P) + rho * G * (B + Q));
  };
  s.B1p = aux(G1, s.B1, s.P1, s.Q1p);
  s.B2p = aux(G2, s.B2, s.P2, s.Q2p);
  {
    const Mat X1 = s.B1.transpose() * F1;
    const Mat X2 = s.B2.transpose() * F2;
    s.C = X2 * X1.transpose() * (X1 * X1.transpose()).inverse();
  }
  s.P1 = s.P1 + s.B1.transpose() * G1 * s.B1p - I;
  s.P2 = s.P2 + s.B2.transpose() * G2 * s.B2p - I;
  s.Q1p = s.Q1p + s.B1 - s.B1p;
  s.Q2p = s.Q2p + s.B2 - s.B2p;
  s.iter += 1;
  return s;
}

}  // namespace fmbs::test
