#pragma once

#include <cmath>
#include <utility>

#include <Eigen/Eigenvalues>

#include "fmbs/linalg.hpp"
#include "fmbs/solver/objective.hpp"

namespace fmbs {

// Block updates of the ADMM scheme. Each returns the exact minimizer of
// augmented_objective over its block with every other block frozen; with all
// regularizer weights at zero they reduce to the plain scheme
// (Stein equation for B1, linear systems for B2 and the auxiliaries,
// pseudo-inverse for C).

/// B1 solves  A1 B1 (C^T C) + O1 B1 = C1  as the Stein equation
/// (O1^-1 A1) B1 (C^T C) + B1 = O1^-1 C1.
inline Mat update_B1(const SolverState& s, const ReducedProblem& p1, const ReducedProblem& p2,
                     const SolverParams& params) {
  const Index k = s.C.rows();
  const Mat& F1 = p1.F;
  const Mat& F2 = p2.F;
  const Mat& G1 = p1.G;
  const double rho = s.rho;
  const Mat F1F1t = F1 * F1.transpose();
  const Mat G1B1p = G1 * s.B1p;

  Mat A = F1F1t;
  Mat O = rho * G1B1p * G1B1p.transpose() + rho * G1;
  Mat rhs = F1 * (F2.transpose() * s.B2 * s.C) + rho * G1B1p * (Mat::Identity(k, k) - s.P1).transpose() +
            rho * G1 * (s.B1p - s.Q1p);
  if (params.mu_cfid != 0.0) {
    O += params.mu_cfid * F1F1t;
    rhs += params.mu_cfid * F1 * (F2.transpose() * s.B2 * s.D.transpose());
  }
  if (params.mu_iso != 0.0 || params.mu_dir != 0.0) {
    const Mat W1B1p = p1.W * s.B1p;
    if (params.mu_iso != 0.0) {
      const Mat A2 = s.B2.transpose() * p2.W * s.B2p;
      A += params.mu_iso * W1B1p * W1B1p.transpose();
      rhs += params.mu_iso * W1B1p * (s.C.transpose() * A2.transpose() * s.C);
    }
    if (params.mu_dir != 0.0) rhs -= 0.5 * params.mu_dir * W1B1p;
  }
  Eigen::LLT<Mat> llt(O);
  if (llt.info() != Eigen::Success) throw LinalgError("update_B1: O1 not positive definite");
  return solve_stein(llt.solve(A), s.C.transpose() * s.C, llt.solve(rhs));
}

/// B2 solves A2 B2 = rhs; with the inverse-map term active the D^T D
/// coupling makes it a Stein equation.
inline Mat update_B2(const SolverState& s, const ReducedProblem& p1, const ReducedProblem& p2,
                     const SolverParams& params) {
  const Index k = s.C.rows();
  const Mat& F1 = p1.F;
  const Mat& F2 = p2.F;
  const Mat& G2 = p2.G;
  const double rho = s.rho;
  const Mat F2F2t = F2 * F2.transpose();
  const Mat G2B2p = G2 * s.B2p;

  Mat O = F2F2t + rho * G2 + rho * G2B2p * G2B2p.transpose();
  Mat rhs = F2 * (F1.transpose() * s.B1 * s.C.transpose()) +
            rho * G2B2p * (Mat::Identity(k, k) - s.P2).transpose() + rho * G2 * (s.B2p - s.Q2p);
  if (params.mu_cfid != 0.0) rhs += params.mu_cfid * F2 * (F1.transpose() * s.B1 * s.D);
  if (params.mu_iso != 0.0 || params.mu_dir != 0.0) {
    const Mat W2B2p = p2.W * s.B2p;
    if (params.mu_iso != 0.0) {
      const Mat A1 = s.B1.transpose() * p1.W * s.B1p;
      const Mat W2B2pC = W2B2p * s.C;
      O += params.mu_iso * W2B2pC * W2B2pC.transpose();
      rhs += params.mu_iso * W2B2pC * A1.transpose() * s.C.transpose();
    }
    if (params.mu_dir != 0.0) rhs -= 0.5 * params.mu_dir * W2B2p;
  }
  if (params.mu_cfid == 0.0) return solve_spd(0.5 * (O + O.transpose()), rhs);

  Eigen::LLT<Mat> llt(O);
  if (llt.info() != Eigen::Success) throw LinalgError("update_B2: system matrix not positive definite");
  return solve_stein(llt.solve(params.mu_cfid * F2F2t), s.D.transpose() * s.D, llt.solve(rhs));
}

/// B1' then B2' from (rho G + rho G B B^T G) B' = rho G B (I - P) + rho G (B + Q').
/// With the commutativity term active the B2' system gains a C C^T right factor
/// and is solved as a Stein equation.
inline std::pair<Mat, Mat> update_auxiliaries(const SolverState& s, const ReducedProblem& p1,
                                              const ReducedProblem& p2, const SolverParams& params) {
  const Index k = s.C.rows();
  const double rho = s.rho;
  const Mat I = Mat::Identity(k, k);

  const Mat G1B1 = p1.G * s.B1;
  Mat O1 = rho * p1.G + rho * G1B1 * G1B1.transpose();
  Mat rhs1 = rho * G1B1 * (I - s.P1) + rho * p1.G * (s.B1 + s.Q1p);
  const Mat W1B1 = p1.W * s.B1;
  if (params.mu_iso != 0.0) {
    const Mat A2 = s.B2.transpose() * p2.W * s.B2p;
    const Mat W1B1Ct = W1B1 * s.C.transpose();
    O1 += params.mu_iso * W1B1Ct * W1B1Ct.transpose();
    rhs1 += params.mu_iso * W1B1Ct * A2 * s.C;
  }
  if (params.mu_dir != 0.0) rhs1 -= 0.5 * params.mu_dir * W1B1;
  Mat B1p = solve_spd(0.5 * (O1 + O1.transpose()), rhs1);

  const Mat G2B2 = p2.G * s.B2;
  const Mat O2 = rho * p2.G + rho * G2B2 * G2B2.transpose();
  Mat rhs2 = rho * G2B2 * (I - s.P2) + rho * p2.G * (s.B2 + s.Q2p);
  const Mat W2B2 = p2.W * s.B2;
  if (params.mu_dir != 0.0) rhs2 -= 0.5 * params.mu_dir * W2B2;
  if (params.mu_iso == 0.0) return {std::move(B1p), solve_spd(0.5 * (O2 + O2.transpose()), rhs2)};

  const Mat A1 = s.B1.transpose() * p1.W * B1p;
  rhs2 += params.mu_iso * W2B2 * s.C * A1 * s.C.transpose();
  Eigen::LLT<Mat> llt(O2);
  if (llt.info() != Eigen::Success) throw LinalgError("update_auxiliaries: system matrix not positive definite");
  Mat B2p = solve_stein(llt.solve(params.mu_iso * W2B2 * W2B2.transpose()), s.C * s.C.transpose(), llt.solve(rhs2));
  return {std::move(B1p), std::move(B2p)};
}

namespace detail {

/// Solves T Y + Y S = R for symmetric positive-definite S and T.
class SymmetricSylvester {
 public:
  SymmetricSylvester(const Mat& T, const Mat& S) : et_(T), es_(S) {
    denom_ = et_.eigenvalues().replicate(1, S.rows()) +
             es_.eigenvalues().transpose().replicate(T.rows(), 1);
  }

  Mat solve(const Mat& R) const {
    const Mat Rt = et_.eigenvectors().transpose() * R * es_.eigenvectors();
    return et_.eigenvectors() * Rt.cwiseQuotient(denom_) * es_.eigenvectors().transpose();
  }

 private:
  Eigen::SelfAdjointEigenSolver<Mat> et_, es_;
  Mat denom_;
};

}  // namespace detail

/// C = (B2^T F2)(B1^T F1)^+. With the commutativity term active, C solves the
/// normal equations of E_fid + mu_iso E_iso,
///   C X1 X1^T + mu (C A1 A1^T - A2 C A1^T - A2^T C A1 + A2^T A2 C) = X2 X1^T,
/// by conjugate gradients preconditioned with the Sylvester part
/// (mu A2^T A2) Y + Y (X1 X1^T + mu A1 A1^T) = R.
inline Mat update_C(const SolverState& s, const ReducedProblem& p1, const ReducedProblem& p2,
                    const SolverParams& params) {
  const Mat X1 = s.B1.transpose() * p1.F;
  const Mat X2 = s.B2.transpose() * p2.F;
  if (params.mu_iso == 0.0) return X2 * pseudo_inverse(X1);

  const double mu = params.mu_iso;
  const Index k = s.C.rows();
  const Mat A1 = s.B1.transpose() * p1.W * s.B1p;
  const Mat A2 = s.B2.transpose() * p2.W * s.B2p;
  const Mat S0 = X1 * X1.transpose();
  const Mat A1A1t = A1 * A1.transpose();
  const Mat A2tA2 = A2.transpose() * A2;
  auto apply = [&](const Mat& C) -> Mat {
    return C * S0 + mu * (C * A1A1t - A2 * C * A1.transpose() - A2.transpose() * C * A1 + A2tA2 * C);
  };

  Mat S = S0 + mu * A1A1t;
  Mat T = mu * A2tA2;
  const double delta = 1e-12 * (S.trace() + T.trace()) / static_cast<double>(k) + 1e-300;
  S.diagonal().array() += delta;
  T.diagonal().array() += delta;
  const detail::SymmetricSylvester precond(T, S);

  const Mat rhs = X2 * X1.transpose();
  Mat C = s.C;
  Mat r = rhs - apply(C);
  const double tol = 1e-15 * (rhs.norm() + apply(C).norm()) + 1e-300;
  if (r.norm() <= tol) return C;
  Mat z = precond.solve(r);
  Mat p = z;
  double rz = (r.array() * z.array()).sum();
  for (Index it = 0; it < 4 * k * k + 20; ++it) {
    const Mat Hp = apply(p);
    const double pHp = (p.array() * Hp.array()).sum();
    if (!(pHp > 0.0)) break;
    const double alpha = rz / pHp;
    C += alpha * p;
    r -= alpha * Hp;
    if (r.norm() <= tol) break;
    z = precond.solve(r);
    const double rz_new = (r.array() * z.array()).sum();
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  return C;
}

/// D = (B1^T F1)(B2^T F2)^+, the minimizer of the inverse-map term.
inline Mat update_D(const SolverState& s, const ReducedProblem& p1, const ReducedProblem& p2) {
  return (s.B1.transpose() * p1.F) * pseudo_inverse(s.B2.transpose() * p2.F);
}

struct Duals {
  Mat P1, P2, Q1p, Q2p;
};

/// P_j += B_j^T G_j B_j' - I,  Q_j' += B_j - B_j'.
inline Duals update_duals(const SolverState& s, const ReducedProblem& p1, const ReducedProblem& p2) {
  const Index k = s.B1.cols();
  const Mat I = Mat::Identity(k, k);
  return {s.P1 + s.B1.transpose() * p1.G * s.B1p - I, s.P2 + s.B2.transpose() * p2.G * s.B2p - I,
          s.Q1p + s.B1 - s.B1p, s.Q2p + s.B2 - s.B2p};
}

/// Residual balancing: rho doubles when the primal residual exceeds ten times
/// the dual one and halves in the opposite case; scaled duals are rescaled by
/// the inverse factor. Returns the factor applied.
inline double update_rho(SolverState& s, double primal, double dual) {
  double factor = 1.0;
  if (primal > 10.0 * dual) {
    factor = 2.0;
  } else if (dual > 10.0 * primal) {
    factor = 0.5;
  }
  if (factor != 1.0) {
    s.rho *= factor;
    s.P1 /= factor;
    s.P2 /= factor;
    s.Q1p /= factor;
    s.Q2p /= factor;
  }
  return factor;
}

}  // namespace fmbs
