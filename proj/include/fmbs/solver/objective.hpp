#pragma once

#include <cstdint>
#include <string>

#include "fmbs/error.hpp"
#include "fmbs/spectral.hpp"
#include "fmbs/types.hpp"

namespace fmbs {

struct SolverParams {
  Index k = 20;
  double rho0 = 1.0;
  double mu_cfid = 0.0;
  double mu_iso = 0.0;
  double mu_dir = 0.0;
  std::int64_t max_iter = 10000;
  double eps_abs = 1e-6;
  double eps_rel = 1e-4;
  bool rho_update = true;
  /// Stop adapting rho after this iteration; 0 keeps adapting throughout.
  std::int64_t rho_freeze_iter = 0;
  /// Any state entry above this magnitude aborts the solve.
  double divergence_bound = 1e12;

  void validate() const {
    if (k < 1) throw Error("solver: k must be >= 1");
    if (!(rho0 > 0.0)) throw Error("solver: rho0 must be positive");
    if (mu_cfid < 0.0 || mu_iso < 0.0 || mu_dir < 0.0) throw Error("solver: regularizer weights must be >= 0");
    if (max_iter < 0) throw Error("solver: max_iter must be >= 0");
    if (eps_abs < 0.0 || eps_rel < 0.0) throw Error("solver: tolerances must be >= 0");
  }
};

/// Dataset presets: POD coverage and regularizer weights.
struct ParameterPreset {
  const char* name;
  double coverage;
  double mu_cfid;
  double mu_iso;
  double mu_dir;
};

inline constexpr ParameterPreset kParameterPresets[] = {
    {"faust_intra", 0.9, 1e-4, 1e-6, 1e-2},          {"faust_inter", 0.9, 1e-4, 1e-5, 1e-4},
    {"scape", 0.9, 1e-3, 1e-6, 1e-4},                {"remeshed_faust_intra", 0.99, 1e-2, 1e-5, 1e-6},
    {"remeshed_faust_inter", 0.99, 1e-2, 1e-5, 1e-6}, {"remeshed_scape", 0.99, 1e-1, 1e-5, 1e-6},
};

inline const ParameterPreset& find_preset(const std::string& name) {
  for (const auto& p : kParameterPresets) {
    if (name == p.name) return p;
  }
  throw Error("unknown parameter preset '" + name + "'");
}

/// Primal blocks, scaled duals and penalty of one solve, all in reduced
/// coordinates. B* are r_j x k; C, D, P* are k x k; Q* are r_j x k.
struct SolverState {
  Mat B1, B2, B1p, B2p;
  Mat C, D;
  Mat P1, P2, Q1p, Q2p;
  double rho = 1.0;
  std::int64_t iter = 0;

  bool all_finite() const {
    return B1.allFinite() && B2.allFinite() && B1p.allFinite() && B2p.allFinite() && C.allFinite() &&
           D.allFinite() && P1.allFinite() && P2.allFinite() && Q1p.allFinite() && Q2p.allFinite() &&
           std::isfinite(rho);
  }

  double max_abs() const {
    double m = 0.0;
    for (const Mat* x : {&B1, &B2, &B1p, &B2p, &C, &D, &P1, &P2, &Q1p, &Q2p}) {
      if (x->size() > 0) m = std::max(m, x->cwiseAbs().maxCoeff());
    }
    return m;
  }
};

/// Gradient of a scalar objective with respect to every primal block.
struct BlockGradient {
  Mat B1, B2, B1p, B2p, C, D;

  static BlockGradient zeros_like(const SolverState& s) {
    return {Mat::Zero(s.B1.rows(), s.B1.cols()),   Mat::Zero(s.B2.rows(), s.B2.cols()),
            Mat::Zero(s.B1p.rows(), s.B1p.cols()), Mat::Zero(s.B2p.rows(), s.B2p.cols()),
            Mat::Zero(s.C.rows(), s.C.cols()),     Mat::Zero(s.D.rows(), s.D.cols())};
  }

  BlockGradient& add(const BlockGradient& o, double w = 1.0) {
    B1 += w * o.B1;
    B2 += w * o.B2;
    B1p += w * o.B1p;
    B2p += w * o.B2p;
    C += w * o.C;
    D += w * o.D;
    return *this;
  }
};

struct RegularizerEnergies {
  double cfid = 0.0;
  double iso = 0.0;
  double dir = 0.0;
};

/// |X|^2 in the inner product of the symmetric matrix G.
inline double g_norm_sq(const Mat& X, const Mat& G) { return (X.transpose() * G * X).trace(); }

/// 1/2 |C B1^T F1 - B2^T F2|_F^2
inline double energy_fid(const SolverState& s, const ReducedProblem& p1, const ReducedProblem& p2) {
  return 0.5 * (s.C * s.B1.transpose() * p1.F - s.B2.transpose() * p2.F).squaredNorm();
}

/// Inverse-map consistency, commutativity with the stiffness operators, and
/// Dirichlet smoothness, all unweighted.
inline RegularizerEnergies energy_regularizers(const SolverState& s, const ReducedProblem& p1,
                                               const ReducedProblem& p2) {
  RegularizerEnergies e;
  e.cfid = 0.5 * (s.B1.transpose() * p1.F - s.D * s.B2.transpose() * p2.F).squaredNorm();
  const Mat A1 = s.B1.transpose() * p1.W * s.B1p;
  const Mat A2 = s.B2.transpose() * p2.W * s.B2p;
  e.iso = 0.5 * (s.C * A1 - A2 * s.C).squaredNorm();
  e.dir = 0.5 * A1.trace() + 0.5 * A2.trace();
  return e;
}

/// E_fid + mu_cfid E_cfid + mu_iso E_iso + mu_dir E_dir.
inline double energy_total(const SolverState& s, const ReducedProblem& p1, const ReducedProblem& p2,
                           const SolverParams& params) {
  const RegularizerEnergies r = energy_regularizers(s, p1, p2);
  return energy_fid(s, p1, p2) + params.mu_cfid * r.cfid + params.mu_iso * r.iso + params.mu_dir * r.dir;
}

/// Scaled Lagrangian term of side j:
/// rho/2 |B^T G B' - I + P|_F^2 + rho/2 |B - B' + Q'|_G^2.
inline double lagrangian_term(const Mat& B, const Mat& Bp, const Mat& P, const Mat& Qp, const Mat& G, double rho) {
  const Index k = B.cols();
  const Mat S = B.transpose() * G * Bp - Mat::Identity(k, k) + P;
  return 0.5 * rho * S.squaredNorm() + 0.5 * rho * g_norm_sq(B - Bp + Qp, G);
}

inline double lagrangian(const SolverState& s, const ReducedProblem& p1, const ReducedProblem& p2) {
  return lagrangian_term(s.B1, s.B1p, s.P1, s.Q1p, p1.G, s.rho) +
         lagrangian_term(s.B2, s.B2p, s.P2, s.Q2p, p2.G, s.rho);
}

/// Energy plus scaled Lagrangian terms; the quantity each primal update
/// minimizes over its own block.
inline double augmented_objective(const SolverState& s, const ReducedProblem& p1, const ReducedProblem& p2,
                                  const SolverParams& params) {
  return energy_total(s, p1, p2, params) + lagrangian(s, p1, p2);
}

/// Unscaled augmented Lagrangian value: the scaled form minus rho/2 |duals|^2.
inline double augmented_lagrangian_value(const SolverState& s, const ReducedProblem& p1, const ReducedProblem& p2,
                                         const SolverParams& params) {
  const double dual_sq = s.P1.squaredNorm() + s.P2.squaredNorm() + g_norm_sq(s.Q1p, p1.G) + g_norm_sq(s.Q2p, p2.G);
  return augmented_objective(s, p1, p2, params) - 0.5 * s.rho * dual_sq;
}

// Gradients. Each returns d/d(block) of the named term for every primal block.

inline BlockGradient grad_fid(const SolverState& s, const ReducedProblem& p1, const ReducedProblem& p2) {
  BlockGradient g = BlockGradient::zeros_like(s);
  const Mat X1 = s.B1.transpose() * p1.F;
  const Mat R = s.C * X1 - s.B2.transpose() * p2.F;
  g.B1 = p1.F * R.transpose() * s.C;
  g.B2 = -p2.F * R.transpose();
  g.C = R * X1.transpose();
  return g;
}

inline BlockGradient grad_cfid(const SolverState& s, const ReducedProblem& p1, const ReducedProblem& p2) {
  BlockGradient g = BlockGradient::zeros_like(s);
  const Mat X2 = s.B2.transpose() * p2.F;
  const Mat R = s.B1.transpose() * p1.F - s.D * X2;
  g.B1 = p1.F * R.transpose();
  g.B2 = -p2.F * R.transpose() * s.D;
  g.D = -R * X2.transpose();
  return g;
}

inline BlockGradient grad_iso(const SolverState& s, const ReducedProblem& p1, const ReducedProblem& p2) {
  BlockGradient g = BlockGradient::zeros_like(s);
  const Mat A1 = s.B1.transpose() * p1.W * s.B1p;
  const Mat A2 = s.B2.transpose() * p2.W * s.B2p;
  const Mat R = s.C * A1 - A2 * s.C;
  const Mat dA1 = s.C.transpose() * R;   // dE/dA1
  const Mat dA2 = -R * s.C.transpose();  // dE/dA2
  g.B1 = p1.W * s.B1p * dA1.transpose();
  g.B1p = p1.W * s.B1 * dA1;
  g.B2 = p2.W * s.B2p * dA2.transpose();
  g.B2p = p2.W * s.B2 * dA2;
  g.C = R * A1.transpose() - A2.transpose() * R;
  return g;
}

inline BlockGradient grad_dir(const SolverState& s, const ReducedProblem& p1, const ReducedProblem& p2) {
  BlockGradient g = BlockGradient::zeros_like(s);
  g.B1 = 0.5 * p1.W * s.B1p;
  g.B1p = 0.5 * p1.W * s.B1;
  g.B2 = 0.5 * p2.W * s.B2p;
  g.B2p = 0.5 * p2.W * s.B2;
  return g;
}

inline BlockGradient grad_lagrangian(const SolverState& s, const ReducedProblem& p1, const ReducedProblem& p2) {
  BlockGradient g = BlockGradient::zeros_like(s);
  auto side = [&](const Mat& B, const Mat& Bp, const Mat& P, const Mat& Qp, const Mat& G, Mat& gB, Mat& gBp) {
    const Index k = B.cols();
    const Mat S = B.transpose() * G * Bp - Mat::Identity(k, k) + P;
    const Mat T = G * (B - Bp + Qp);
    gB = s.rho * (G * Bp * S.transpose() + T);
    gBp = s.rho * (G * B * S - T);
  };
  side(s.B1, s.B1p, s.P1, s.Q1p, p1.G, g.B1, g.B1p);
  side(s.B2, s.B2p, s.P2, s.Q2p, p2.G, g.B2, g.B2p);
  return g;
}

/// Gradient of augmented_objective.
inline BlockGradient grad_augmented(const SolverState& s, const ReducedProblem& p1, const ReducedProblem& p2,
                                    const SolverParams& params) {
  BlockGradient g = grad_fid(s, p1, p2);
  if (params.mu_cfid != 0.0) g.add(grad_cfid(s, p1, p2), params.mu_cfid);
  if (params.mu_iso != 0.0) g.add(grad_iso(s, p1, p2), params.mu_iso);
  if (params.mu_dir != 0.0) g.add(grad_dir(s, p1, p2), params.mu_dir);
  g.add(grad_lagrangian(s, p1, p2));
  return g;
}

}  // namespace fmbs
