#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fmbs/error.hpp"
#include "fmbs/geodesic.hpp"
#include "fmbs/map_extract.hpp"
#include "fmbs/mesh.hpp"
#include "fmbs/operators.hpp"

namespace fmbs {

struct FeatureErrors {
  Vec e1;  // per mode, length k
  Vec e2;  // per vertex of mesh 2
};

/// Mean squared matching errors of n descriptor pairs, spectral (per mode)
/// and spatial (per vertex):
///   e1 = 1/n sum_j (C B1^T G1 f1j - B2^T G2 f2j)^2
///   e2 = 1/n sum_j (B2 C B1^T G1 f1j - f2j)^2
/// F1, F2 hold the unscaled descriptors column-wise.
inline FeatureErrors feature_errors(const Mat& B1, const Mat& B2, const Mat& C, const Mat& F1, const Mat& F2,
                                    const MassMatrix& G1, const MassMatrix& G2) {
  if (F1.cols() != F2.cols()) throw Error("feature_errors: descriptor counts differ");
  if (F1.rows() != B1.rows() || F2.rows() != B2.rows() || G1.size() != B1.rows() || G2.size() != B2.rows()) {
    throw Error("feature_errors: descriptor rows do not match the bases");
  }
  if (C.rows() != B2.cols() || C.cols() != B1.cols()) throw Error("feature_errors: C does not match the bases");
  const double n = static_cast<double>(std::max<Index>(F1.cols(), 1));
  const Mat X1 = C * (B1.transpose() * G1.diag.asDiagonal() * F1);
  const Mat X2 = B2.transpose() * G2.diag.asDiagonal() * F2;
  FeatureErrors out;
  out.e1 = (X1 - X2).rowwise().squaredNorm() / n;
  out.e2 = (B2 * X1 - F2).rowwise().squaredNorm() / n;
  return out;
}

struct ErrorCurve {
  std::vector<double> thresholds;
  std::vector<double> fractions;

  void validate() const {
    if (thresholds.size() != fractions.size()) throw Error("error curve: size mismatch");
    for (size_t i = 0; i < thresholds.size(); ++i) {
      if (!(thresholds[i] >= 0.0) || (i > 0 && !(thresholds[i] > thresholds[i - 1]))) {
        throw Error("error curve: thresholds must be increasing and nonnegative");
      }
      if (!(fractions[i] >= 0.0 && fractions[i] <= 1.0) || (i > 0 && fractions[i] < fractions[i - 1])) {
        throw Error("error curve: fractions must be nondecreasing in [0, 1]");
      }
    }
  }
};

/// 0, 0.0025, ..., 0.25
inline std::vector<double> default_thresholds(double max = 0.25, double step = 0.0025) {
  if (!(step > 0.0) || !(max >= 0.0)) throw Error("default_thresholds: bad grid");
  std::vector<double> t;
  const auto count = static_cast<Index>(std::llround(max / step));
  for (Index i = 0; i <= count; ++i) t.push_back(static_cast<double>(i) * step);
  return t;
}

/// Geodesic distance between mapped and ground-truth targets of every source
/// vertex, divided by sqrt(area of mesh 2).
inline Vec normalized_geodesic_errors(const PointMap& map, const PointMap& gt, const TriMesh& mesh2) {
  if (map.size() != gt.size()) {
    throw Error("geodesic errors: maps have different source sizes (" + std::to_string(map.size()) + " vs " +
                std::to_string(gt.size()) + ")");
  }
  for (const PointMap* p : {&map, &gt}) {
    PointMap q = *p;
    q.target_count = mesh2.vertex_count();
    q.validate();
  }
  const EdgeGraph graph(mesh2);
  const double norm = std::sqrt(mesh2.total_area());

  // one Dijkstra per distinct ground-truth target
  std::vector<std::vector<Index>> by_target(static_cast<size_t>(mesh2.vertex_count()));
  for (Index i = 0; i < gt.size(); ++i) by_target[static_cast<size_t>(gt.targets[static_cast<size_t>(i)])].push_back(i);
  Vec err(map.size());
  for (Index t = 0; t < mesh2.vertex_count(); ++t) {
    const auto& sources = by_target[static_cast<size_t>(t)];
    if (sources.empty()) continue;
    Index unreachable = 0;
    const Vec d = graph.distances_from(t, &unreachable);
    if (unreachable > 0) throw MeshError("geodesic error: target mesh is disconnected");
    for (Index i : sources) err[i] = d[map.targets[static_cast<size_t>(i)]] / norm;
  }
  return err;
}

/// Fraction of entries with error <= t, for each threshold t.
inline ErrorCurve cumulative_curve(const Vec& errors, const std::vector<double>& thresholds) {
  ErrorCurve c;
  c.thresholds = thresholds;
  std::vector<double> sorted(errors.data(), errors.data() + errors.size());
  std::sort(sorted.begin(), sorted.end());
  for (double t : thresholds) {
    const auto below = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    c.fractions.push_back(sorted.empty() ? 1.0 : static_cast<double>(below) / static_cast<double>(sorted.size()));
  }
  c.validate();
  return c;
}

inline ErrorCurve geodesic_error_curve(const PointMap& map, const PointMap& gt, const TriMesh& mesh2,
                                       const std::vector<double>& thresholds = default_thresholds()) {
  return cumulative_curve(normalized_geodesic_errors(map, gt, mesh2), thresholds);
}

}  // namespace fmbs
