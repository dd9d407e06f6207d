#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "fmbs/error.hpp"
#include "fmbs/linalg.hpp"
#include "fmbs/solver/objective.hpp"
#include "fmbs/solver/updates.hpp"
#include "fmbs/spectral.hpp"

namespace fmbs {

/// One row of the residual history.
struct ResidualRecord {
  std::int64_t iter = 0;
  double energy = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double rho = 0.0;
  /// Augmented Lagrangian (unscaled duals) after the iteration.
  double lagrangian = 0.0;
};

struct SolveResult {
  SolverState state;
  std::vector<ResidualRecord> history;
  bool converged = false;
};

/// Bases from the leading k POD modes (the first k reduced coordinates),
/// made G-orthonormal; B' = B, C from the pseudo-inverse formula, D its
/// pseudo-inverse, zero duals.
inline SolverState initial_state(const ReducedProblem& p1, const ReducedProblem& p2, const SolverParams& params) {
  params.validate();
  const Index k = params.k;
  if (p1.descriptor_count() != p2.descriptor_count()) {
    throw Error("solver: descriptor counts differ (" + std::to_string(p1.descriptor_count()) + " vs " +
                std::to_string(p2.descriptor_count()) + ")");
  }
  for (const ReducedProblem* p : {&p1, &p2}) {
    if (p->dim() < k) {
      throw Error("solver: reduced dimension " + std::to_string(p->dim()) + " is smaller than k = " +
                  std::to_string(k));
    }
  }
  SolverState s;
  s.B1 = g_orthonormalize(Mat::Identity(p1.dim(), k), p1.G);
  s.B2 = g_orthonormalize(Mat::Identity(p2.dim(), k), p2.G);
  s.B1p = s.B1;
  s.B2p = s.B2;
  s.P1 = Mat::Zero(k, k);
  s.P2 = Mat::Zero(k, k);
  s.Q1p = Mat::Zero(p1.dim(), k);
  s.Q2p = Mat::Zero(p2.dim(), k);
  s.C = (s.B2.transpose() * p2.F) * pseudo_inverse(s.B1.transpose() * p1.F);
  s.D = pseudo_inverse(s.C);
  s.rho = params.rho0;
  s.iter = 0;
  return s;
}

struct Residuals {
  double primal = 0.0;
  double dual = 0.0;
  double eps_primal = 0.0;
  double eps_dual = 0.0;
};

/// Primal: constraint violations |B^T G B' - I|_F and |B - B'|_G over both
/// sides. Dual: rho times the G-norm change of the auxiliaries.
inline Residuals compute_residuals(const SolverState& s, const Mat& B1p_old, const Mat& B2p_old,
                                   const ReducedProblem& p1, const ReducedProblem& p2, const SolverParams& params) {
  const Index k = s.B1.cols();
  const Mat I = Mat::Identity(k, k);
  const Mat S1 = s.B1.transpose() * p1.G * s.B1p;
  const Mat S2 = s.B2.transpose() * p2.G * s.B2p;
  Residuals r;
  r.primal = std::sqrt((S1 - I).squaredNorm() + (S2 - I).squaredNorm() + g_norm_sq(s.B1 - s.B1p, p1.G) +
                       g_norm_sq(s.B2 - s.B2p, p2.G));
  r.dual = s.rho * std::sqrt(std::max(0.0, g_norm_sq(s.B1p - B1p_old, p1.G) + g_norm_sq(s.B2p - B2p_old, p2.G)));
  const double lhs_scale = std::sqrt(S1.squaredNorm() + S2.squaredNorm() + g_norm_sq(s.B1, p1.G) + g_norm_sq(s.B2, p2.G));
  const double rhs_scale = std::sqrt(2.0 * static_cast<double>(k) + g_norm_sq(s.B1p, p1.G) + g_norm_sq(s.B2p, p2.G));
  const double dual_scale = std::sqrt(std::max(0.0, s.P1.squaredNorm() + s.P2.squaredNorm() +
                                                         g_norm_sq(s.Q1p, p1.G) + g_norm_sq(s.Q2p, p2.G)));
  r.eps_primal = params.eps_abs + params.eps_rel * std::max(lhs_scale, rhs_scale);
  r.eps_dual = params.eps_abs + params.eps_rel * s.rho * dual_scale;
  return r;
}

/// One sweep: B1, B2, B1', B2', C, D (when the inverse-map term is active),
/// then the duals. Returns the auxiliaries from before the sweep.
inline std::pair<Mat, Mat> admm_sweep(SolverState& s, const ReducedProblem& p1, const ReducedProblem& p2,
                                      const SolverParams& params) {
  std::pair<Mat, Mat> old{s.B1p, s.B2p};
  s.B1 = update_B1(s, p1, p2, params);
  s.B2 = update_B2(s, p1, p2, params);
  auto [B1p, B2p] = update_auxiliaries(s, p1, p2, params);
  s.B1p = std::move(B1p);
  s.B2p = std::move(B2p);
  s.C = update_C(s, p1, p2, params);
  if (params.mu_cfid != 0.0) s.D = update_D(s, p1, p2);
  Duals d = update_duals(s, p1, p2);
  s.P1 = std::move(d.P1);
  s.P2 = std::move(d.P2);
  s.Q1p = std::move(d.Q1p);
  s.Q2p = std::move(d.Q2p);
  ++s.iter;
  return old;
}

/// Runs the ADMM iteration from `init` (or initial_state) until both
/// residuals are within tolerance or max_iter sweeps are done.
inline SolveResult run(const ReducedProblem& p1, const ReducedProblem& p2, const SolverParams& params,
                       const std::optional<SolverState>& init = std::nullopt) {
  params.validate();
  SolveResult result;
  result.state = init ? *init : initial_state(p1, p2, params);
  SolverState& s = result.state;
  if (s.C.rows() != params.k) throw Error("solver: initial state has wrong k");

  for (std::int64_t it = 0; it < params.max_iter; ++it) {
    const auto [B1p_old, B2p_old] = admm_sweep(s, p1, p2, params);
    if (!s.all_finite() || s.max_abs() > params.divergence_bound) throw DivergenceError(s.iter);

    const Residuals r = compute_residuals(s, B1p_old, B2p_old, p1, p2, params);
    result.history.push_back(ResidualRecord{s.iter, energy_total(s, p1, p2, params), r.primal, r.dual, s.rho,
                                            augmented_lagrangian_value(s, p1, p2, params)});
    if (r.primal <= r.eps_primal && r.dual <= r.eps_dual) {
      result.converged = true;
      break;
    }
    if (params.rho_update && (params.rho_freeze_iter == 0 || s.iter < params.rho_freeze_iter)) {
      update_rho(s, r.primal, r.dual);
    }
  }
  return result;
}

/// Vertex-space bases and functional map.
struct FinalBases {
  Mat B1;
  Mat B2;
  Mat C;
};

/// Lifts the reduced bases, G-orthonormalizes them against the full mass
/// matrices, and recomputes C = (B2^T F2)(B1^T F1)^+ in those bases.
inline FinalBases finalize(const SolverState& s, const PODSubspace& U1, const PODSubspace& U2, const MassMatrix& G1,
                           const MassMatrix& G2, const Mat& F1_scaled, const Mat& F2_scaled) {
  FinalBases out;
  out.B1 = g_orthonormalize(lift(U1, s.B1), G1);
  out.B2 = g_orthonormalize(lift(U2, s.B2), G2);
  out.C = (out.B2.transpose() * F2_scaled) * pseudo_inverse(out.B1.transpose() * F1_scaled);
  return out;
}

}  // namespace fmbs
