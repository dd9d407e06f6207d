#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <Eigen/SparseCholesky>

#include "fmbs/error.hpp"
#include "fmbs/geodesic.hpp"
#include "fmbs/linalg.hpp"
#include "fmbs/mesh.hpp"
#include "fmbs/operators.hpp"

namespace fmbs {

/// n corresponding scalar functions on one mesh. `raw` holds the functions
/// column-wise; `scaled` is the mass-weighted copy G * raw used by the solver.
struct DescriptorSet {
  Mat raw;
  Mat scaled;
  std::vector<std::string> labels;

  Index vertex_count() const { return raw.rows(); }
  Index count() const { return raw.cols(); }
};

/// Builds a DescriptorSet and checks its invariants (n >= 1, no zero column).
inline DescriptorSet make_descriptor_set(Mat raw, const MassMatrix& mass, std::vector<std::string> labels = {}) {
  if (raw.cols() < 1) throw Error("descriptor set needs at least one column");
  if (raw.rows() != mass.size()) {
    throw Error("descriptor rows (" + std::to_string(raw.rows()) + ") do not match vertex count (" +
                std::to_string(mass.size()) + ")");
  }
  if (!raw.allFinite()) throw Error("descriptor matrix has non-finite entries");
  for (Index c = 0; c < raw.cols(); ++c) {
    if (raw.col(c).cwiseAbs().maxCoeff() == 0.0) throw Error("descriptor column " + std::to_string(c) + " is all zero");
  }
  if (labels.empty()) {
    for (Index c = 0; c < raw.cols(); ++c) labels.push_back("f" + std::to_string(c));
  }
  if (static_cast<Index>(labels.size()) != raw.cols()) throw Error("descriptor label count mismatch");
  Mat scaled = mass.diag.asDiagonal() * raw;
  return DescriptorSet{std::move(raw), std::move(scaled), std::move(labels)};
}

/// Concatenates descriptor families column-wise after rescaling each family
/// to unit Frobenius norm.
inline DescriptorSet concatenate_families(const std::vector<DescriptorSet>& families, const MassMatrix& mass) {
  Index total = 0;
  for (const auto& f : families) total += f.count();
  if (total == 0) throw Error("no descriptors to concatenate");
  Mat raw(mass.size(), total);
  std::vector<std::string> labels;
  Index col = 0;
  for (const auto& f : families) {
    if (f.vertex_count() != mass.size()) throw Error("descriptor family has wrong vertex count");
    raw.middleCols(col, f.count()) = f.raw / f.raw.norm();
    labels.insert(labels.end(), f.labels.begin(), f.labels.end());
    col += f.count();
  }
  return make_descriptor_set(std::move(raw), mass, std::move(labels));
}

/// Laplace-Beltrami eigenpairs, G-orthonormal, eigenvalues nondecreasing.
struct LBBasis {
  Mat functions;
  Vec eigenvalues;

  Index size() const { return functions.cols(); }
};

/// Left singular vectors of a descriptor matrix.
struct PODSubspace {
  Mat modes;
  Vec singular_values;
  double coverage = 1.0;

  Index rank() const { return modes.cols(); }
};

/// Spectral-subspace problem for one mesh: F = U^T G Fraw, G = U^T G U,
/// W = U^T W U.
struct ReducedProblem {
  Mat F;
  Mat G;
  Mat W;
  PODSubspace pod;

  Index dim() const { return G.rows(); }
  Index descriptor_count() const { return F.cols(); }
};

namespace detail {

/// Flips each column so that its largest-magnitude entry is positive.
inline void fix_signs(Mat& A) {
  for (Index c = 0; c < A.cols(); ++c) {
    Index arg = 0;
    A.col(c).cwiseAbs().maxCoeff(&arg);
    if (A(arg, c) < 0.0) A.col(c) = -A.col(c);
  }
}

inline constexpr Index kDenseEigenLimit = 3000;

inline LBBasis lb_dense(const SpMat& W, const Vec& g, Index k) {
  const Vec inv_sqrt = g.cwiseSqrt().cwiseInverse();
  Mat S = inv_sqrt.asDiagonal() * Mat(W) * inv_sqrt.asDiagonal();
  S = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(S);
  if (eig.info() != Eigen::Success) throw LinalgError("eigensolver failed in lb_eigenbasis");
  LBBasis out;
  out.eigenvalues = eig.eigenvalues().head(k);
  out.functions = inv_sqrt.asDiagonal() * eig.eigenvectors().leftCols(k);
  return out;
}

/// Shift-invert block subspace iteration with Rayleigh-Ritz projection, for
/// meshes too large for a dense solve.
inline LBBasis lb_subspace_iteration(const SpMat& W, const Vec& g, Index k, unsigned seed) {
  const Index m = W.rows();
  const Index block = std::min(m, k + std::max<Index>(k, 10));
  const double shift = 1e-8 * W.diagonal().sum() / g.sum();
  SpMat A = W;
  for (Index i = 0; i < m; ++i) A.coeffRef(i, i) += shift * g[i];
  Eigen::SimplicialLDLT<SpMat> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw LinalgError("factorization failed in lb_eigenbasis");

  std::mt19937 rng(seed);
  std::normal_distribution<double> normal;
  Mat X(m, block);
  for (Index i = 0; i < X.size(); ++i) X.data()[i] = normal(rng);

  Vec previous = Vec::Constant(k, std::numeric_limits<double>::infinity());
  LBBasis out;
  for (int it = 0; it < 1000; ++it) {
    const Mat rhs = g.asDiagonal() * X;
    X = ldlt.solve(rhs);
    X = g_orthonormalize(X, MassMatrix{g});
    Mat Wr = X.transpose() * W * X;
    Wr = 0.5 * (Wr + Wr.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> eig(Wr);
    if (eig.info() != Eigen::Success) throw LinalgError("eigensolver failed in lb_eigenbasis");
    X = X * eig.eigenvectors();
    out.eigenvalues = eig.eigenvalues().head(k);
    const double scale = std::max(1.0, out.eigenvalues.cwiseAbs().maxCoeff());
    if ((out.eigenvalues - previous).cwiseAbs().maxCoeff() < 1e-12 * scale) break;
    previous = out.eigenvalues;
  }
  out.functions = X.leftCols(k);
  return out;
}

}  // namespace detail

/// k smallest eigenpairs of W phi = lambda G phi, G-orthonormal.
inline LBBasis lb_eigenbasis(const CotanMatrix& W, const MassMatrix& G, Index k, unsigned seed = 0) {
  const Index m = W.size();
  if (k < 1 || k > m) throw Error("lb_eigenbasis: k must be in [1, " + std::to_string(m) + "]");
  if (G.size() != m) throw Error("lb_eigenbasis: mass size mismatch");
  LBBasis out = m <= detail::kDenseEigenLimit ? detail::lb_dense(W.matrix, G.diag, k)
                                              : detail::lb_subspace_iteration(W.matrix, G.diag, k, seed);
  const double top = std::max(1.0, out.eigenvalues.cwiseAbs().maxCoeff());
  for (Index i = 0; i < out.eigenvalues.size(); ++i) {
    if (out.eigenvalues[i] < 0.0 && out.eigenvalues[i] > -1e-9 * top) out.eigenvalues[i] = 0.0;
  }
  detail::fix_signs(out.functions);
  return out;
}

/// Wave Kernel Signature. Energies are evenly spaced in log-eigenvalue over
/// the nonzero spectrum; sigma = variance * energy step. Each energy column is
/// normalized by the sum of its spectral weights.
inline DescriptorSet wks(const LBBasis& basis, const MassMatrix& mass, Index n_energies, double variance = 6.0) {
  if (n_energies < 1) throw Error("wks: need at least one energy");
  const double top = basis.eigenvalues.size() > 0 ? basis.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  std::vector<Index> used;
  for (Index i = 0; i < basis.size(); ++i) {
    if (basis.eigenvalues[i] > 1e-9 * top && basis.eigenvalues[i] > 0.0) used.push_back(i);
  }
  if (used.empty()) throw Error("wks: all eigenvalues are zero");
  if (used.size() < 2) throw Error("wks: need at least two nonzero eigenvalues");

  Vec log_lambda(static_cast<Index>(used.size()));
  for (size_t i = 0; i < used.size(); ++i) log_lambda[static_cast<Index>(i)] = std::log(basis.eigenvalues[used[i]]);
  const double e_min = log_lambda.minCoeff();
  const double e_max = log_lambda.maxCoeff() / 1.02;
  const double step = n_energies > 1 ? (e_max - e_min) / static_cast<double>(n_energies - 1) : (e_max - e_min);
  const double sigma = variance * step;

  Mat phi_sq(basis.functions.rows(), static_cast<Index>(used.size()));
  for (size_t i = 0; i < used.size(); ++i) phi_sq.col(static_cast<Index>(i)) = basis.functions.col(used[i]).array().square();

  Mat raw(basis.functions.rows(), n_energies);
  std::vector<std::string> labels;
  for (Index e = 0; e < n_energies; ++e) {
    const double energy = e_min + step * static_cast<double>(e);
    const Vec weights = (-(energy - log_lambda.array()).square() / (2.0 * sigma * sigma)).exp().matrix();
    raw.col(e) = phi_sq * weights / weights.sum();
    labels.push_back("wks" + std::to_string(e));
  }
  return make_descriptor_set(std::move(raw), mass, std::move(labels));
}

/// One column per landmark: exp(-d^2 / width^2) of the edge-graph geodesic
/// distance, normalized to maximum 1.
inline DescriptorSet landmark_descriptors(const TriMesh& mesh, const MassMatrix& mass,
                                          const std::vector<Index>& landmarks, double width) {
  if (landmarks.empty()) throw Error("landmark_descriptors: no landmarks");
  if (!(width > 0.0)) throw Error("landmark_descriptors: width must be positive");
  const EdgeGraph graph(mesh);
  Mat raw(mesh.vertex_count(), static_cast<Index>(landmarks.size()));
  std::vector<std::string> labels;
  for (size_t l = 0; l < landmarks.size(); ++l) {
    const Index v = landmarks[l];
    if (v < 0 || v >= mesh.vertex_count()) throw Error("landmark index " + std::to_string(v) + " out of range");
    const Vec d = graph.distances_from(v);
    Vec col = (-(d.array() / width).square()).exp().matrix();
    for (Index i = 0; i < col.size(); ++i) {
      if (!std::isfinite(col[i])) col[i] = 0.0;
    }
    raw.col(static_cast<Index>(l)) = col / col.maxCoeff();
    labels.push_back("landmark" + std::to_string(v));
  }
  return make_descriptor_set(std::move(raw), mass, std::move(labels));
}

/// Leading left singular vectors of `raw`. r is the smallest count whose
/// cumulative squared-singular-value fraction reaches `coverage`, raised to
/// `min_modes` when requested (capped by min(m, n)).
inline PODSubspace pod_modes(const Mat& raw, double coverage, Index min_modes = 1) {
  if (raw.cols() < 1) throw Error("pod_modes: empty descriptor matrix");
  if (!(coverage > 0.0 && coverage <= 1.0)) throw Error("pod_modes: coverage must be in (0, 1]");
  Eigen::BDCSVD<Mat> svd(raw, Eigen::ComputeThinU);
  const Vec& s = svd.singularValues();
  const double total = s.squaredNorm();
  Index r = s.size();
  double acc = 0.0;
  for (Index i = 0; i < s.size(); ++i) {
    acc += s[i] * s[i];
    if (acc >= coverage * total * (1.0 - 1e-14)) {
      r = i + 1;
      break;
    }
  }
  r = std::min<Index>(std::max(r, min_modes), s.size());
  PODSubspace out;
  out.modes = svd.matrixU().leftCols(r);
  out.singular_values = s.head(r);
  out.coverage = coverage;
  detail::fix_signs(out.modes);
  return out;
}

inline PODSubspace pod_modes(const DescriptorSet& d, double coverage, Index min_modes = 1) {
  return pod_modes(d.raw, coverage, min_modes);
}

/// Projects the scaled descriptors, mass and stiffness onto the POD modes.
inline ReducedProblem reduce(const PODSubspace& U, const Mat& scaled_descriptors, const MassMatrix& G,
                             const CotanMatrix& W) {
  const Index m = U.modes.rows();
  if (scaled_descriptors.rows() != m || G.size() != m || W.size() != m) throw Error("reduce: dimension mismatch");
  ReducedProblem out;
  out.F = U.modes.transpose() * scaled_descriptors;
  out.G = U.modes.transpose() * G.diag.asDiagonal() * U.modes;
  out.G = 0.5 * (out.G + out.G.transpose());
  const Mat WU = W.matrix * U.modes;
  out.W = U.modes.transpose() * WU;
  out.W = 0.5 * (out.W + out.W.transpose());
  out.pod = U;
  return out;
}

/// Divides both reduced descriptor matrices by s = sqrt((|F1|^2 + |F2|^2) / 2)
/// so the fidelity energy is measured relative to the descriptor energy and
/// the penalty parameter is unit-free. C and D are unchanged by a common
/// scale. Returns s.
inline double balance_descriptor_scale(ReducedProblem& p1, ReducedProblem& p2) {
  const double s = std::sqrt(0.5 * (p1.F.squaredNorm() + p2.F.squaredNorm()));
  if (s > 0.0) {
    p1.F /= s;
    p2.F /= s;
  }
  return s;
}

inline Mat lift(const PODSubspace& U, const Mat& reduced) {
  if (reduced.rows() != U.rank()) throw Error("lift: dimension mismatch");
  return U.modes * reduced;
}

}  // namespace fmbs
