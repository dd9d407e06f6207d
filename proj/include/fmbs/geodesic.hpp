#pragma once

#include <functional>
#include <iostream>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

#include "fmbs/error.hpp"
#include "fmbs/mesh.hpp"

namespace fmbs {

/// Vertex adjacency with Euclidean edge lengths.
class EdgeGraph {
 public:
  explicit EdgeGraph(const TriMesh& mesh) : adjacency_(static_cast<size_t>(mesh.vertex_count())) {
    for (const auto& [i, j] : mesh.edges()) {
      const double len = (mesh.vertices().row(i) - mesh.vertices().row(j)).norm();
      adjacency_[static_cast<size_t>(i)].emplace_back(j, len);
      adjacency_[static_cast<size_t>(j)].emplace_back(i, len);
    }
  }

  Index vertex_count() const { return static_cast<Index>(adjacency_.size()); }

  /// Dijkstra from `source`. Unreachable vertices are +inf; `unreachable`
  /// receives their count when non-null.
  Vec distances_from(Index source, Index* unreachable = nullptr) const {
    if (source < 0 || source >= vertex_count()) {
      throw MeshError("geodesic source " + std::to_string(source) + " out of range");
    }
    Vec dist = Vec::Constant(vertex_count(), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, Index>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    dist[source] = 0.0;
    queue.emplace(0.0, source);
    while (!queue.empty()) {
      auto [d, v] = queue.top();
      queue.pop();
      if (d > dist[v]) continue;
      for (const auto& [w, len] : adjacency_[static_cast<size_t>(v)]) {
        if (d + len < dist[w]) {
          dist[w] = d + len;
          queue.emplace(dist[w], w);
        }
      }
    }
    if (unreachable) *unreachable = (dist.array() == std::numeric_limits<double>::infinity()).count();
    return dist;
  }

 private:
  std::vector<std::vector<std::pair<Index, double>>> adjacency_;
};

/// Shortest edge-path distances from `source`. On a disconnected mesh the
/// unreachable vertices are +inf and a warning is printed to stderr.
inline Vec geodesic_distances(const TriMesh& mesh, Index source) {
  Index unreachable = 0;
  Vec d = EdgeGraph(mesh).distances_from(source, &unreachable);
  if (unreachable > 0) {
    std::cerr << "warning: mesh is disconnected; " << unreachable << " vertices unreachable from vertex " << source
              << '\n';
  }
  return d;
}

}  // namespace fmbs
