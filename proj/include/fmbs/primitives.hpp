#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <utility>
#include <vector>

#include "fmbs/mesh.hpp"

namespace fmbs {

/// Icosahedron refined `subdivisions` times by edge midpoints, projected on
/// the sphere. 20 * 4^s faces, 10 * 4^s + 2 vertices.
inline TriMesh icosphere(int subdivisions, double radius = 1.0) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                                    {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<std::array<Index, 3>> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                         {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                         {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                         {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<Index, Index>, Index> midpoints;
    auto midpoint = [&](Index a, Index b) {
      auto key = std::minmax(a, b);
      auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      v.push_back((v[static_cast<size_t>(a)] + v[static_cast<size_t>(b)]).normalized());
      const Index id = static_cast<Index>(v.size()) - 1;
      midpoints.emplace(key, id);
      return id;
    };
    std::vector<std::array<Index, 3>> refined;
    refined.reserve(4 * f.size());
    for (const auto& tri : f) {
      const Index a = midpoint(tri[0], tri[1]);
      const Index b = midpoint(tri[1], tri[2]);
      const Index c = midpoint(tri[2], tri[0]);
      refined.push_back({tri[0], a, c});
      refined.push_back({tri[1], b, a});
      refined.push_back({tri[2], c, b});
      refined.push_back({a, b, c});
    }
    f = std::move(refined);
  }
  Vertices vertices(static_cast<Index>(v.size()), 3);
  for (size_t i = 0; i < v.size(); ++i) vertices.row(static_cast<Index>(i)) = radius * v[i].transpose();
  Faces faces(static_cast<Index>(f.size()), 3);
  for (size_t i = 0; i < f.size(); ++i) faces.row(static_cast<Index>(i)) << f[i][0], f[i][1], f[i][2];
  return TriMesh(std::move(vertices), std::move(faces));
}

/// Smooth shape change applied to a mesh: anisotropic axis scaling, a twist
/// about z, and a radial bump.
struct Deformation {
  Eigen::Vector3d scale = Eigen::Vector3d::Ones();
  double twist = 0.0;                        // radians per unit height
  double bump_amplitude = 0.0;               // relative radial displacement
  Eigen::Vector3d bump_center = Eigen::Vector3d::UnitX();
  double bump_width = 0.5;
};

inline TriMesh deform(const TriMesh& mesh, const Deformation& d) {
  Vertices out = mesh.vertices();
  const Eigen::Vector3d center = d.bump_center.normalized();
  for (Index i = 0; i < out.rows(); ++i) {
    Eigen::Vector3d p = out.row(i);
    const double r = p.norm();
    if (d.bump_amplitude != 0.0 && r > 0.0) {
      const double dist = (p / r - center).norm();
      p *= 1.0 + d.bump_amplitude * std::exp(-dist * dist / (d.bump_width * d.bump_width));
    }
    p = p.cwiseProduct(d.scale);
    const double angle = d.twist * p.z();
    const double c = std::cos(angle), s = std::sin(angle);
    out.row(i) << c * p.x() - s * p.y(), s * p.x() + c * p.y(), p.z();
  }
  return TriMesh(std::move(out), mesh.faces());
}

inline TriMesh scaled(const TriMesh& mesh, double factor) {
  return TriMesh(mesh.vertices() * factor, mesh.faces());
}

/// Relabels vertices: old vertex i becomes new vertex perm[i]. Face order is
/// kept, so `perm` is the ground-truth map from the input to the output.
inline TriMesh permute_vertices(const TriMesh& mesh, const std::vector<Index>& perm) {
  if (static_cast<Index>(perm.size()) != mesh.vertex_count()) throw MeshError("permutation size mismatch");
  Vertices v(mesh.vertex_count(), 3);
  for (Index i = 0; i < mesh.vertex_count(); ++i) v.row(perm[static_cast<size_t>(i)]) = mesh.vertices().row(i);
  Faces f = mesh.faces();
  for (Index r = 0; r < f.rows(); ++r)
    for (int c = 0; c < 3; ++c) f(r, c) = perm[static_cast<size_t>(f(r, c))];
  return TriMesh(std::move(v), std::move(f));
}

/// Regular tetrahedron with unit edge length.
inline TriMesh regular_tetrahedron() {
  Vertices v(4, 3);
  v << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1;
  v /= 2.0 * std::sqrt(2.0);
  Faces f(4, 3);
  f << 0, 1, 2, 0, 3, 1, 0, 2, 3, 1, 3, 2;
  return TriMesh(std::move(v), std::move(f));
}

/// Unit square [0,1]^2 split along the (0,0)-(1,1) diagonal.
inline TriMesh unit_square() {
  Vertices v(4, 3);
  v << 0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0;
  Faces f(2, 3);
  f << 0, 1, 2, 0, 2, 3;
  return TriMesh(std::move(v), std::move(f));
}

/// Planar grid of nx x ny quads, each split into two triangles.
inline TriMesh grid(Index nx, Index ny, double width, double height) {
  Vertices v((nx + 1) * (ny + 1), 3);
  for (Index j = 0; j <= ny; ++j)
    for (Index i = 0; i <= nx; ++i)
      v.row(j * (nx + 1) + i) << width * static_cast<double>(i) / static_cast<double>(nx),
          height * static_cast<double>(j) / static_cast<double>(ny), 0.0;
  Faces f(2 * nx * ny, 3);
  Index t = 0;
  for (Index j = 0; j < ny; ++j) {
    for (Index i = 0; i < nx; ++i) {
      const Index a = j * (nx + 1) + i, b = a + 1, c = a + nx + 2, d = a + nx + 1;
      f.row(t++) << a, b, c;
      f.row(t++) << a, c, d;
    }
  }
  return TriMesh(std::move(v), std::move(f));
}

}  // namespace fmbs
