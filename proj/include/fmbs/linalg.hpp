#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "fmbs/error.hpp"
#include "fmbs/operators.hpp"
#include "fmbs/types.hpp"

namespace fmbs {

/// M X N + X = K with M p x p, N q x q, K p x q.
struct SteinProblem {
  Mat M;
  Mat N;
  Mat K;
};

namespace detail {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

inline constexpr double kPivotTolerance = 64.0 * std::numeric_limits<double>::epsilon();

/// Solves (a T + b I) y = rhs for upper-triangular T, in place.
template <typename OnSingular>
void shifted_back_substitution(const CMat& T, std::complex<double> a, std::complex<double> b,
                               Eigen::Ref<CVec> y, OnSingular&& on_singular) {
  const Index p = T.rows();
  for (Index i = p - 1; i >= 0; --i) {
    std::complex<double> s = y[i];
    for (Index c = i + 1; c < p; ++c) s -= a * T(i, c) * y[c];
    const std::complex<double> pivot = a * T(i, i) + b;
    if (std::abs(pivot) <= kPivotTolerance * (std::abs(a * T(i, i)) + std::abs(b))) on_singular(i);
    y[i] = s / pivot;
  }
}

inline void check_square(const Mat& A, const char* what) {
  if (A.rows() != A.cols()) throw LinalgError(std::string(what) + " must be square");
}

}  // namespace detail

/// Solves M X N + X = K by complex Schur factorization of M and N followed by
/// column-wise triangular back-substitution. Throws IllPosedStein when some
/// eigenvalue product mu_i nu_j equals -1.
inline Mat solve_stein(const Mat& M, const Mat& N, const Mat& K) {
  detail::check_square(M, "Stein M");
  detail::check_square(N, "Stein N");
  if (K.rows() != M.rows() || K.cols() != N.rows()) throw LinalgError("Stein K has wrong shape");
  const Index p = M.rows(), q = N.rows();
  if (p == 0 || q == 0) return Mat::Zero(p, q);

  Eigen::ComplexSchur<Mat> schur_m(M), schur_n(N);
  if (schur_m.info() != Eigen::Success || schur_n.info() != Eigen::Success) {
    throw LinalgError("Schur decomposition failed in Stein solve");
  }
  const detail::CMat& Tm = schur_m.matrixT();
  const detail::CMat& Tn = schur_n.matrixT();
  const detail::CMat& U = schur_m.matrixU();
  const detail::CMat& V = schur_n.matrixU();

  // Tm Y Tn + Y = U* K V, solved one column at a time.
  detail::CMat Y = U.adjoint() * K.cast<std::complex<double>>() * V;
  detail::CMat TmY(p, q);
  for (Index j = 0; j < q; ++j) {
    detail::CVec rhs = Y.col(j);
    if (j > 0) rhs -= TmY.leftCols(j) * Tn.col(j).head(j);
    detail::shifted_back_substitution(Tm, Tn(j, j), 1.0, rhs, [&](Index i) {
      const std::complex<double> prod = Tm(i, i) * Tn(j, j);
      throw IllPosedStein(prod.real(), prod.imag());
    });
    Y.col(j) = rhs;
    TmY.col(j) = Tm * rhs;
  }
  return (U * Y * V.adjoint()).real();
}

inline Mat solve_stein(const SteinProblem& problem) { return solve_stein(problem.M, problem.N, problem.K); }

/// Solves A X + X B = C (continuous Sylvester) with the same Schur scheme.
inline Mat solve_sylvester(const Mat& A, const Mat& B, const Mat& C) {
  detail::check_square(A, "Sylvester A");
  detail::check_square(B, "Sylvester B");
  if (C.rows() != A.rows() || C.cols() != B.rows()) throw LinalgError("Sylvester C has wrong shape");
  const Index p = A.rows(), q = B.rows();
  if (p == 0 || q == 0) return Mat::Zero(p, q);

  Eigen::ComplexSchur<Mat> schur_a(A), schur_b(B);
  if (schur_a.info() != Eigen::Success || schur_b.info() != Eigen::Success) {
    throw LinalgError("Schur decomposition failed in Sylvester solve");
  }
  const detail::CMat& Ta = schur_a.matrixT();
  const detail::CMat& Tb = schur_b.matrixT();
  const detail::CMat& U = schur_a.matrixU();
  const detail::CMat& V = schur_b.matrixU();

  detail::CMat Y = U.adjoint() * C.cast<std::complex<double>>() * V;
  for (Index j = 0; j < q; ++j) {
    detail::CVec rhs = Y.col(j);
    if (j > 0) rhs -= Y.leftCols(j) * Tb.col(j).head(j);
    detail::shifted_back_substitution(Ta, 1.0, Tb(j, j), rhs, [&](Index i) {
      throw LinalgError("singular Sylvester equation: eigenvalues " + std::to_string(Ta(i, i).real()) + " and " +
                        std::to_string(Tb(j, j).real()) + " cancel");
    });
    Y.col(j) = rhs;
  }
  return (U * Y * V.adjoint()).real();
}

/// Moore-Penrose inverse through the SVD; singular values below
/// tol * s_max are treated as zero.
inline Mat pseudo_inverse(const Mat& A, double tol = 1e-10) {
  if (A.size() == 0) return Mat::Zero(A.cols(), A.rows());
  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  const double cutoff = tol * (s.size() > 0 ? s[0] : 0.0);
  Vec inv = Vec::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i) {
    if (s[i] > cutoff && s[i] > 0.0) inv[i] = 1.0 / s[i];
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Cholesky solve of A X = B for symmetric positive-definite A.
inline Mat solve_spd(const Mat& A, const Mat& B) {
  detail::check_square(A, "SPD system matrix");
  if (B.rows() != A.rows()) throw LinalgError("SPD right-hand side has wrong row count");
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) throw LinalgError("matrix not symmetric");
  Eigen::LLT<Mat> llt(A);
  if (llt.info() != Eigen::Success) throw LinalgError("matrix not positive definite");
  return llt.solve(B);
}

namespace detail {

/// Modified Gram-Schmidt with one reorthogonalization pass, in the inner
/// product <x, y> = x^T G y supplied by `apply_g`.
template <typename ApplyG>
Mat g_orthonormalize_impl(const Mat& B, ApplyG&& apply_g) {
  Mat Q = B;
  for (Index c = 0; c < Q.cols(); ++c) {
    const double original = std::sqrt(std::max(0.0, Q.col(c).dot(apply_g(Q.col(c)))));
    for (int pass = 0; pass < 2; ++pass) {
      for (Index prev = 0; prev < c; ++prev) {
        const Vec g_prev = apply_g(Q.col(prev));
        Q.col(c) -= Q.col(c).dot(g_prev) * Q.col(prev);
      }
    }
    const double norm = std::sqrt(std::max(0.0, Q.col(c).dot(apply_g(Q.col(c)))));
    if (!(norm > 1e-10 * original) || norm == 0.0) {
      throw LinalgError("g_orthonormalize: column " + std::to_string(c) + " is linearly dependent on previous columns");
    }
    Q.col(c) /= norm;
  }
  return Q;
}

}  // namespace detail

/// Returns columns spanning the same space with B^T G B = I.
inline Mat g_orthonormalize(const Mat& B, const MassMatrix& G) {
  if (B.rows() != G.size()) throw LinalgError("g_orthonormalize: size mismatch");
  return detail::g_orthonormalize_impl(B, [&](const auto& x) -> Vec { return G.diag.cwiseProduct(x); });
}

/// Dense symmetric positive-definite G, as in the reduced spectral space.
inline Mat g_orthonormalize(const Mat& B, const Mat& G) {
  if (B.rows() != G.rows() || G.rows() != G.cols()) throw LinalgError("g_orthonormalize: size mismatch");
  return detail::g_orthonormalize_impl(B, [&](const auto& x) -> Vec { return G * x; });
}

}  // namespace fmbs
