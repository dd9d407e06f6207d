#pragma once

#include <cmath>
#include <vector>

#include "fmbs/linalg.hpp"
#include "fmbs/solver/admm.hpp"

namespace fmbs {

// Reformulation with an extra block of slack variables whose objective is
// strongly convex:
//
//   min  G(X) + H(Z)
//   G = 1/2 |C Bt1'^T F1 - Bt2'^T F2|^2
//   H = nu/2 |Z - I|^2 + mu/2 (|B1''|^2 + |Bt1''|^2 + |B2''|^2 + |Bt2''|^2)   (G_j norms)
//   s.t. B_j^T G_j B_j' = Z,  B_j - B_j' = B_j'',  B_j - Bt_j' = Bt_j''
//
// with X = (B1, B1', Bt1', B2, B2', Bt2', C) updated block by block and
// Z = (Z, B1'', Bt1'', B2'', Bt2'') updated jointly.

struct ConvergentBlocks {
  // X blocks
  Mat B1, B1p, B1t, B2, B2p, B2t, C;
  // Z blocks
  Mat Z, B1pp, B1tpp, B2pp, B2tpp;
  double nu = 1.0;
  double mu = 1.0;
};

/// Scaled duals, one per constraint row.
struct ConvergentDuals {
  Mat orth1, orth2;        // k x k
  Mat split1, split2;      // B_j - B_j' - B_j''
  Mat tsplit1, tsplit2;    // B_j - Bt_j' - Bt_j''
};

struct ConvergentResult {
  ConvergentBlocks blocks;
  ConvergentDuals duals;
  std::vector<ResidualRecord> history;
  bool converged = false;
};

/// Constraint residuals P(X) + Q(Z), in the same order as ConvergentDuals.
inline ConvergentDuals convergent_constraints(const ConvergentBlocks& b, const ReducedProblem& p1,
                                              const ReducedProblem& p2) {
  return {b.B1.transpose() * p1.G * b.B1p - b.Z,
          b.B2.transpose() * p2.G * b.B2p - b.Z,
          b.B1 - b.B1p - b.B1pp,
          b.B2 - b.B2p - b.B2pp,
          b.B1 - b.B1t - b.B1tpp,
          b.B2 - b.B2t - b.B2tpp};
}

/// |P(X) + Q(Z)| with G_j norms on the r_j x k rows.
inline double convergent_feasibility(const ConvergentBlocks& b, const ReducedProblem& p1, const ReducedProblem& p2) {
  const ConvergentDuals c = convergent_constraints(b, p1, p2);
  return std::sqrt(c.orth1.squaredNorm() + c.orth2.squaredNorm() + g_norm_sq(c.split1, p1.G) +
                   g_norm_sq(c.split2, p2.G) + g_norm_sq(c.tsplit1, p1.G) + g_norm_sq(c.tsplit2, p2.G));
}

/// G(X) + H(Z).
inline double convergent_objective(const ConvergentBlocks& b, const ReducedProblem& p1, const ReducedProblem& p2) {
  const Index k = b.Z.rows();
  const double g = 0.5 * (b.C * b.B1t.transpose() * p1.F - b.B2t.transpose() * p2.F).squaredNorm();
  const double h = 0.5 * b.nu * (b.Z - Mat::Identity(k, k)).squaredNorm() +
                   0.5 * b.mu *
                       (g_norm_sq(b.B1pp, p1.G) + g_norm_sq(b.B1tpp, p1.G) + g_norm_sq(b.B2pp, p2.G) +
                        g_norm_sq(b.B2tpp, p2.G));
  return g + h;
}

/// Scaled-form augmented objective: F + rho/2 sum |c_i + lambda_i|^2.
inline double convergent_augmented_objective(const ConvergentBlocks& b, const ConvergentDuals& l,
                                             const ReducedProblem& p1, const ReducedProblem& p2, double rho) {
  const ConvergentDuals c = convergent_constraints(b, p1, p2);
  const double pen = (c.orth1 + l.orth1).squaredNorm() + (c.orth2 + l.orth2).squaredNorm() +
                     g_norm_sq(c.split1 + l.split1, p1.G) + g_norm_sq(c.split2 + l.split2, p2.G) +
                     g_norm_sq(c.tsplit1 + l.tsplit1, p1.G) + g_norm_sq(c.tsplit2 + l.tsplit2, p2.G);
  return convergent_objective(b, p1, p2) + 0.5 * rho * pen;
}

/// Augmented Lagrangian with unscaled multipliers rho * lambda.
inline double convergent_lagrangian(const ConvergentBlocks& b, const ConvergentDuals& l, const ReducedProblem& p1,
                                    const ReducedProblem& p2, double rho) {
  const double dual_sq = l.orth1.squaredNorm() + l.orth2.squaredNorm() + g_norm_sq(l.split1, p1.G) +
                         g_norm_sq(l.split2, p2.G) + g_norm_sq(l.tsplit1, p1.G) + g_norm_sq(l.tsplit2, p2.G);
  return convergent_augmented_objective(b, l, p1, p2, rho) - 0.5 * rho * dual_sq;
}

/// Feasible start: every basis copy equals the G-orthonormal POD start,
/// Z = I, slack blocks zero.
inline ConvergentBlocks convergent_initial_blocks(const ReducedProblem& p1, const ReducedProblem& p2,
                                                  const SolverParams& params, double nu, double mu) {
  const SolverState s = initial_state(p1, p2, params);
  const Index k = params.k;
  ConvergentBlocks b;
  b.B1 = b.B1p = b.B1t = s.B1;
  b.B2 = b.B2p = b.B2t = s.B2;
  b.C = s.C;
  b.Z = Mat::Identity(k, k);
  b.B1pp = b.B1tpp = Mat::Zero(p1.dim(), k);
  b.B2pp = b.B2tpp = Mat::Zero(p2.dim(), k);
  b.nu = nu;
  b.mu = mu;
  return b;
}

namespace detail {

inline Mat spd_solve_sym(const Mat& A, const Mat& B) { return solve_spd(0.5 * (A + A.transpose()), B); }

}  // namespace detail

/// One sweep over the X blocks in order B1, B1', Bt1', B2, B2', Bt2', C, then
/// the Z block, then the duals. rho is the fixed penalty.
inline void convergent_sweep(ConvergentBlocks& b, ConvergentDuals& l, const ReducedProblem& p1,
                             const ReducedProblem& p2, double rho) {
  const Mat& F1 = p1.F;
  const Mat& F2 = p2.F;

  auto basis = [&](const Mat& G, const Mat& Bp, const Mat& Bpp, const Mat& Bt, const Mat& Btpp, const Mat& lo,
                   const Mat& ls, const Mat& lt) {
    const Mat GBp = G * Bp;
    return detail::spd_solve_sym(GBp * GBp.transpose() + 2.0 * G,
                                 GBp * (b.Z - lo).transpose() + G * (Bp + Bpp - ls) + G * (Bt + Btpp - lt));
  };
  auto aux = [&](const Mat& G, const Mat& B, const Mat& Bpp, const Mat& lo, const Mat& ls) {
    const Mat GB = G * B;
    return detail::spd_solve_sym(GB * GB.transpose() + G, GB * (b.Z - lo) + G * (B - Bpp + ls));
  };

  b.B1 = basis(p1.G, b.B1p, b.B1pp, b.B1t, b.B1tpp, l.orth1, l.split1, l.tsplit1);
  b.B1p = aux(p1.G, b.B1, b.B1pp, l.orth1, l.split1);
  {
    // F1 F1^T Bt1' C^T C + rho G1 Bt1' = F1 F2^T Bt2' C + rho G1 (B1 - Bt1'' + lambda)
    Eigen::LLT<Mat> llt(rho * p1.G);
    if (llt.info() != Eigen::Success) throw LinalgError("convergent: G1 not positive definite");
    const Mat rhs = F1 * (F2.transpose() * b.B2t * b.C) + rho * p1.G * (b.B1 - b.B1tpp + l.tsplit1);
    b.B1t = solve_stein(llt.solve(F1 * F1.transpose()), b.C.transpose() * b.C, llt.solve(rhs));
  }
  b.B2 = basis(p2.G, b.B2p, b.B2pp, b.B2t, b.B2tpp, l.orth2, l.split2, l.tsplit2);
  b.B2p = aux(p2.G, b.B2, b.B2pp, l.orth2, l.split2);
  b.B2t = detail::spd_solve_sym(F2 * F2.transpose() + rho * p2.G,
                                F2 * (F1.transpose() * b.B1t * b.C.transpose()) +
                                    rho * p2.G * (b.B2 - b.B2tpp + l.tsplit2));
  b.C = (b.B2t.transpose() * F2) * pseudo_inverse(b.B1t.transpose() * F1);

  const Index k = b.Z.rows();
  const Mat S1 = b.B1.transpose() * p1.G * b.B1p;
  const Mat S2 = b.B2.transpose() * p2.G * b.B2p;
  b.Z = (b.nu * Mat::Identity(k, k) + rho * (S1 + l.orth1 + S2 + l.orth2)) / (b.nu + 2.0 * rho);
  const double shrink = rho / (b.mu + rho);
  b.B1pp = shrink * (b.B1 - b.B1p + l.split1);
  b.B2pp = shrink * (b.B2 - b.B2p + l.split2);
  b.B1tpp = shrink * (b.B1 - b.B1t + l.tsplit1);
  b.B2tpp = shrink * (b.B2 - b.B2t + l.tsplit2);

  const ConvergentDuals c = convergent_constraints(b, p1, p2);
  l.orth1 += c.orth1;
  l.orth2 += c.orth2;
  l.split1 += c.split1;
  l.split2 += c.split2;
  l.tsplit1 += c.tsplit1;
  l.tsplit2 += c.tsplit2;
}

/// ADMM on the reformulated problem with fixed penalty params.rho0. Stops
/// when feasibility and the Z-block change are within tolerance, or at
/// params.max_iter. History rows carry G + H as energy, the feasibility as
/// primal residual, rho |dZ| as dual residual and the augmented Lagrangian.
inline ConvergentResult run_convergent(const ReducedProblem& p1, const ReducedProblem& p2, const SolverParams& params,
                                       double nu, double mu,
                                       const std::optional<ConvergentBlocks>& init = std::nullopt) {
  params.validate();
  if (!(nu > 0.0) || !(mu > 0.0)) throw Error("run_convergent: nu and mu must be positive");
  ConvergentResult result;
  result.blocks = init ? *init : convergent_initial_blocks(p1, p2, params, nu, mu);
  ConvergentBlocks& b = result.blocks;
  b.nu = nu;
  b.mu = mu;
  const Index k = params.k;
  result.duals = {Mat::Zero(k, k),           Mat::Zero(k, k),           Mat::Zero(p1.dim(), k),
                  Mat::Zero(p2.dim(), k),    Mat::Zero(p1.dim(), k),    Mat::Zero(p2.dim(), k)};
  const double rho = params.rho0;

  for (std::int64_t it = 1; it <= params.max_iter; ++it) {
    const Mat Z_old = b.Z, B1pp_old = b.B1pp, B2pp_old = b.B2pp, B1tpp_old = b.B1tpp, B2tpp_old = b.B2tpp;
    convergent_sweep(b, result.duals, p1, p2, rho);
    bool finite = true;
    for (const Mat* x : {&b.B1, &b.B1p, &b.B1t, &b.B2, &b.B2p, &b.B2t, &b.C, &b.Z}) {
      finite = finite && x->allFinite() && (x->size() == 0 || x->cwiseAbs().maxCoeff() <= params.divergence_bound);
    }
    if (!finite) throw DivergenceError(it);

    const double primal = convergent_feasibility(b, p1, p2);
    const double dz = std::sqrt(2.0 * (b.Z - Z_old).squaredNorm() + g_norm_sq(b.B1pp - B1pp_old, p1.G) +
                                g_norm_sq(b.B2pp - B2pp_old, p2.G) + g_norm_sq(b.B1tpp - B1tpp_old, p1.G) +
                                g_norm_sq(b.B2tpp - B2tpp_old, p2.G));
    const double dual = rho * dz;
    result.history.push_back(ResidualRecord{it, convergent_objective(b, p1, p2), primal, dual, rho,
                                            convergent_lagrangian(b, result.duals, p1, p2, rho)});
    const double scale = std::sqrt(2.0 * static_cast<double>(k) + g_norm_sq(b.B1, p1.G) + g_norm_sq(b.B2, p2.G));
    if (primal <= params.eps_abs + params.eps_rel * scale && dual <= params.eps_abs + params.eps_rel * scale) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace fmbs
