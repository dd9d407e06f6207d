#pragma once

#include <vector>

#include "fmbs/mesh.hpp"
#include "fmbs/types.hpp"

namespace fmbs {

/// Diagonal lumped mass matrix; one entry per vertex, in area units.
struct MassMatrix {
  Vec diag;

  Index size() const { return diag.size(); }
  double total() const { return diag.sum(); }
  SpMat sparse() const {
    SpMat g(diag.size(), diag.size());
    g.reserve(Eigen::VectorXi::Ones(diag.size()));
    for (Index i = 0; i < diag.size(); ++i) g.insert(i, i) = diag[i];
    g.makeCompressed();
    return g;
  }
  Mat dense() const { return diag.asDiagonal(); }
};

/// Symmetric positive-semidefinite cotangent stiffness matrix (rows sum to 0).
struct CotanMatrix {
  SpMat matrix;

  Index size() const { return matrix.rows(); }
};

/// Each vertex receives one third of the area of its incident triangles.
inline MassMatrix lumped_mass(const TriMesh& mesh) {
  MassMatrix g{Vec::Zero(mesh.vertex_count())};
  for (Index f = 0; f < mesh.face_count(); ++f) {
    const double third = mesh.face_area(f) / 3.0;
    for (int c = 0; c < 3; ++c) g.diag[mesh.faces()(f, c)] += third;
  }
  return g;
}

/// Off-diagonal (i, j) is -(cot a + cot b) / 2 over the angles opposite the
/// edge; the diagonal is the negated off-diagonal row sum, so f.(W f) >= 0 on
/// Delaunay meshes.
inline CotanMatrix cotan_weights(const TriMesh& mesh) {
  const auto& V = mesh.vertices();
  const auto& F = mesh.faces();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<size_t>(12 * mesh.face_count()));
  for (Index f = 0; f < mesh.face_count(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const Index k = F(f, c);
      const Index i = F(f, (c + 1) % 3);
      const Index j = F(f, (c + 2) % 3);
      const Eigen::Vector3d a = V.row(i) - V.row(k);
      const Eigen::Vector3d b = V.row(j) - V.row(k);
      const double half_cot = 0.5 * a.dot(b) / a.cross(b).norm();
      triplets.emplace_back(i, j, -half_cot);
      triplets.emplace_back(j, i, -half_cot);
      triplets.emplace_back(i, i, half_cot);
      triplets.emplace_back(j, j, half_cot);
    }
  }
  CotanMatrix w{SpMat(mesh.vertex_count(), mesh.vertex_count())};
  w.matrix.setFromTriplets(triplets.begin(), triplets.end());
  w.matrix.makeCompressed();
  return w;
}

}  // namespace fmbs
