#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "fmbs/error.hpp"
#include "fmbs/map_extract.hpp"
#include "fmbs/mesh.hpp"
#include "fmbs/operators.hpp"
#include "fmbs/primitives.hpp"
#include "fmbs/solver/admm.hpp"
#include "fmbs/spectral.hpp"

namespace fmbs {

/// How descriptors are built for one mesh.
struct DescriptorSpec {
  Index lb_count = 60;  // eigenpairs feeding the WKS
  Index wks_energies = 50;
  double wks_variance = 6.0;
  std::vector<Index> landmarks;
  double landmark_width = 0.3;
  /// Extra m x n descriptor blocks, one family each.
  std::vector<Mat> external;
};

/// Per-mesh spectral artifacts.
struct ShapeData {
  TriMesh mesh;
  MassMatrix G;
  CotanMatrix W;
  LBBasis lb;
  DescriptorSet descriptors;
};

inline ShapeData prepare_shape(TriMesh mesh, const DescriptorSpec& spec, unsigned seed = 0) {
  ShapeData s{std::move(mesh), {}, {}, {}, {}};
  s.G = lumped_mass(s.mesh);
  s.W = cotan_weights(s.mesh);
  s.lb = lb_eigenbasis(s.W, s.G, std::min(spec.lb_count, s.mesh.vertex_count()), seed);
  std::vector<DescriptorSet> families;
  if (spec.wks_energies > 0) families.push_back(wks(s.lb, s.G, spec.wks_energies, spec.wks_variance));
  if (!spec.landmarks.empty()) {
    families.push_back(landmark_descriptors(s.mesh, s.G, spec.landmarks, spec.landmark_width));
  }
  for (const Mat& e : spec.external) families.push_back(make_descriptor_set(e, s.G));
  if (families.empty()) throw Error("no descriptors configured");
  s.descriptors = concatenate_families(families, s.G);
  return s;
}

/// POD rank used for a solve with basis size k: the coverage rule, raised to
/// at least 2k so the designed bases have room to move.
inline Index pod_min_modes(Index k) { return 2 * k; }

struct PairProblem {
  ReducedProblem p1, p2;
  double descriptor_scale = 1.0;
};

inline PairProblem build_pair(const ShapeData& a, const ShapeData& b, double coverage, Index k) {
  if (a.descriptors.count() != b.descriptors.count()) {
    throw Error("descriptor counts differ between meshes (" + std::to_string(a.descriptors.count()) + " vs " +
                std::to_string(b.descriptors.count()) + ")");
  }
  PairProblem p;
  p.p1 = reduce(pod_modes(a.descriptors, coverage, pod_min_modes(k)), a.descriptors.scaled, a.G, a.W);
  p.p2 = reduce(pod_modes(b.descriptors, coverage, pod_min_modes(k)), b.descriptors.scaled, b.G, b.W);
  p.descriptor_scale = balance_descriptor_scale(p.p1, p.p2);
  return p;
}

struct PairSolution {
  SolveResult solve;
  FinalBases bases;
};

inline PairSolution solve_pair(const ShapeData& a, const ShapeData& b, const PairProblem& pair,
                               const SolverParams& params) {
  PairSolution out;
  out.solve = run(pair.p1, pair.p2, params);
  out.bases = finalize(out.solve.state, pair.p1.pod, pair.p2.pod, a.G, b.G, a.descriptors.scaled,
                       b.descriptors.scaled);
  return out;
}

/// The desk-scale test pair: two different smooth deformations of a
/// 642-vertex icosphere sharing connectivity, so the identity is the
/// ground-truth map.
struct DemoPair {
  TriMesh source, target;
  std::vector<Index> landmarks;
};

inline DemoPair demo_pair() {
  const TriMesh base = icosphere(3);
  Deformation d1;
  d1.scale = {1.3, 1.0, 0.8};
  d1.bump_amplitude = 0.3;
  d1.bump_center = {1, 1, 0.5};
  Deformation d2;
  d2.scale = {1.25, 1.05, 0.8};
  d2.twist = 0.4;
  d2.bump_amplitude = 0.25;
  d2.bump_center = {1, 1, 0.6};
  return {deform(base, d1), deform(base, d2), {0, 100, 200, 300, 400}};
}

}  // namespace fmbs
