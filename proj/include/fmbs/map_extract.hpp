#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/SVD>

#include "fmbs/error.hpp"
#include "fmbs/operators.hpp"
#include "fmbs/types.hpp"

namespace fmbs {

/// Vertex map from mesh 1 to mesh 2: targets[i] is the image of vertex i.
struct PointMap {
  std::vector<Index> targets;
  Index target_count = 0;

  Index size() const { return static_cast<Index>(targets.size()); }

  void validate() const {
    for (size_t i = 0; i < targets.size(); ++i) {
      if (targets[i] < 0 || targets[i] >= target_count) {
        throw Error("point map entry " + std::to_string(i) + " = " + std::to_string(targets[i]) +
                    " out of range [0, " + std::to_string(target_count) + ")");
      }
    }
  }

  bool operator==(const PointMap& o) const { return target_count == o.target_count && targets == o.targets; }
};

inline PointMap identity_map(Index m) {
  PointMap p;
  p.targets.resize(static_cast<size_t>(m));
  std::iota(p.targets.begin(), p.targets.end(), Index{0});
  p.target_count = m;
  return p;
}

/// Fraction of entries where two maps agree.
inline double map_agreement(const PointMap& a, const PointMap& b) {
  if (a.size() != b.size()) throw Error("map_agreement: maps have different source sizes");
  if (a.size() == 0) return 1.0;
  Index same = 0;
  for (Index i = 0; i < a.size(); ++i) same += a.targets[static_cast<size_t>(i)] == b.targets[static_cast<size_t>(i)];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

inline constexpr Index kLinearScanLimit = 20000;

namespace detail {

/// Exact nearest-neighbour search over the rows of a point matrix. Ties go to
/// the smallest row index.
class KdTree {
 public:
  explicit KdTree(const Mat& points) : pts_(points), order_(static_cast<size_t>(points.rows())) {
    std::iota(order_.begin(), order_.end(), Index{0});
    if (pts_.rows() > 0) root_ = build(0, pts_.rows());
  }

  Index nearest(const Eigen::RowVectorXd& q) const {
    Best best;
    if (root_ >= 0) search(root_, q, best);
    return best.index;
  }

 private:
  struct Node {
    Index begin, end;  // range in order_ for leaves
    Index axis = -1;
    double split = 0.0;
    Index left = -1, right = -1;
  };
  struct Best {
    double dist = std::numeric_limits<double>::infinity();
    Index index = -1;
    void offer(double d, Index i) {
      if (d < dist || (d == dist && i < index)) {
        dist = d;
        index = i;
      }
    }
  };
  static constexpr Index kLeaf = 16;

  Index build(Index begin, Index end) {
    const Index id = static_cast<Index>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeaf) return id;
    Eigen::RowVectorXd lo = pts_.row(order_[static_cast<size_t>(begin)]);
    Eigen::RowVectorXd hi = lo;
    for (Index i = begin; i < end; ++i) {
      lo = lo.cwiseMin(pts_.row(order_[static_cast<size_t>(i)]));
      hi = hi.cwiseMax(pts_.row(order_[static_cast<size_t>(i)]));
    }
    Index axis = 0;
    (hi - lo).maxCoeff(&axis);
    const Index mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](Index a, Index b) { return pts_(a, axis) < pts_(b, axis); });
    const double split = pts_(order_[static_cast<size_t>(mid)], axis);
    const Index left = build(begin, mid);
    const Index right = build(mid, end);
    Node& n = nodes_[static_cast<size_t>(id)];
    n.axis = axis;
    n.split = split;
    n.left = left;
    n.right = right;
    return id;
  }

  void search(Index id, const Eigen::RowVectorXd& q, Best& best) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    if (n.axis < 0) {
      for (Index i = n.begin; i < n.end; ++i) {
        const Index r = order_[static_cast<size_t>(i)];
        best.offer((pts_.row(r) - q).squaredNorm(), r);
      }
      return;
    }
    const double diff = q(n.axis) - n.split;
    const Index first = diff < 0.0 ? n.left : n.right;
    const Index second = diff < 0.0 ? n.right : n.left;
    search(first, q, best);
    // <= so equal-distance points with smaller index are still visited
    if (diff * diff <= best.dist) search(second, q, best);
  }

  const Mat& pts_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
  Index root_ = -1;
};

inline std::vector<Index> nearest_rows(const Mat& queries, const Mat& points) {
  std::vector<Index> out(static_cast<size_t>(queries.rows()), 0);
  if (points.rows() == 0) throw Error("nearest neighbour search over an empty point set");
  if (points.rows() <= kLinearScanLimit) {
    const Vec pn = points.rowwise().squaredNorm();
    for (Index i = 0; i < queries.rows(); ++i) {
      // |p|^2 - 2 p.q ranks like |p - q|^2; recheck exact distances among near ties
      const Vec score = pn - 2.0 * points * queries.row(i).transpose();
      Index best = 0;
      score.minCoeff(&best);
      double best_d = (points.row(best) - queries.row(i)).squaredNorm();
      const double slack = 1e-12 * (pn.maxCoeff() + queries.row(i).squaredNorm()) + 1e-300;
      for (Index j = 0; j < points.rows(); ++j) {
        if (score[j] <= score[best] + 2.0 * slack && j != best) {
          const double d = (points.row(j) - queries.row(i)).squaredNorm();
          if (d < best_d || (d == best_d && j < best)) {
            best = j;
            best_d = d;
          }
        }
      }
      out[static_cast<size_t>(i)] = best;
    }
    return out;
  }
  const KdTree tree(points);
  for (Index i = 0; i < queries.rows(); ++i) out[static_cast<size_t>(i)] = tree.nearest(queries.row(i));
  return out;
}

inline void check_bases(const Mat& B1, const Mat& B2, const Mat& C) {
  if (B1.cols() != B2.cols() || C.rows() != B2.cols() || C.cols() != B1.cols()) {
    throw Error("map extraction: basis widths " + std::to_string(B1.cols()) + ", " + std::to_string(B2.cols()) +
                " do not match C (" + std::to_string(C.rows()) + "x" + std::to_string(C.cols()) + ")");
  }
}

}  // namespace detail

/// Nearest row of B2 to each row of B1 C^T.
inline PointMap extract_p2p(const Mat& B1, const Mat& B2, const Mat& C) {
  detail::check_bases(B1, B2, C);
  PointMap p;
  p.targets = detail::nearest_rows(B1 * C.transpose(), B2);
  p.target_count = B2.rows();
  return p;
}

/// Sum over source vertices of |C b1_i - b2_pi(i)|^2.
inline double embedding_cost(const Mat& B1, const Mat& B2, const Mat& C, const PointMap& map) {
  const Mat E = B1 * C.transpose();
  double total = 0.0;
  for (Index i = 0; i < E.rows(); ++i) total += (E.row(i) - B2.row(map.targets[static_cast<size_t>(i)])).squaredNorm();
  return total;
}

struct IcpResult {
  Mat C;
  PointMap map;
  /// embedding_cost after each refit, evaluated at the refit C and the map it was fitted to
  std::vector<double> costs;
  Index iterations = 0;
};

/// Orthogonal C minimizing sum |C b1_i - b2_pi(i)|^2.
inline Mat procrustes(const Mat& B1, const Mat& B2, const PointMap& map) {
  Mat B2m(B1.rows(), B2.cols());
  for (Index i = 0; i < B1.rows(); ++i) B2m.row(i) = B2.row(map.targets[static_cast<size_t>(i)]);
  const Mat M = B2m.transpose() * B1;
  Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

/// Alternates nearest-neighbour matching and orthogonal refitting of C,
/// stopping after n_iters refits or once the map no longer changes.
inline IcpResult icp_refine(const Mat& B1, const Mat& B2, const Mat& C0, Index n_iters) {
  detail::check_bases(B1, B2, C0);
  if (C0.rows() != C0.cols()) throw Error("icp_refine: C must be square");
  IcpResult r;
  r.C = C0;
  r.map = extract_p2p(B1, B2, C0);
  for (Index it = 0; it < n_iters; ++it) {
    r.C = procrustes(B1, B2, r.map);
    r.costs.push_back(embedding_cost(B1, B2, r.C, r.map));
    ++r.iterations;
    PointMap next = extract_p2p(B1, B2, r.C);
    const bool same = next == r.map;
    r.map = std::move(next);
    if (same) break;
  }
  return r;
}

/// B2 C B1^T G1 f
inline Vec transfer_function(const Vec& f1, const Mat& B1, const Mat& B2, const Mat& C, const MassMatrix& G1) {
  detail::check_bases(B1, B2, C);
  if (f1.size() != B1.rows() || G1.size() != B1.rows()) {
    throw Error("transfer_function: function length " + std::to_string(f1.size()) + " does not match mesh 1 (" +
                std::to_string(B1.rows()) + " vertices)");
  }
  return B2 * (C * (B1.transpose() * G1.diag.cwiseProduct(f1)));
}

inline void save_point_map(const PointMap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write point map " + path.string());
  out << map.size() << ' ' << map.target_count << '\n';
  for (Index t : map.targets) out << t << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

inline PointMap load_point_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open point map " + path.string());
  Index m1 = 0, m2 = 0;
  if (!(in >> m1 >> m2) || m1 < 0 || m2 < 0) throw IoError(path.string() + ": bad point map header");
  PointMap p;
  p.target_count = m2;
  p.targets.resize(static_cast<size_t>(m1));
  for (Index i = 0; i < m1; ++i) {
    if (!(in >> p.targets[static_cast<size_t>(i)])) {
      throw IoError(path.string() + ": expected " + std::to_string(m1) + " entries, got " + std::to_string(i));
    }
  }
  try {
    p.validate();
  } catch (const Error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return p;
}

}  // namespace fmbs
