#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fmbs/error.hpp"
#include "fmbs/types.hpp"

namespace fmbs {

using Vertices = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using Faces = Eigen::Matrix<Index, Eigen::Dynamic, 3>;

/// Faces with area below this fraction of the squared bounding-box diagonal
/// are rejected.
inline constexpr double kDegenerateAreaRatio = 1e-12;

/// Validated manifold triangle mesh. Construction checks index range,
/// repeated vertices, degenerate faces and edge-manifoldness; the object is
/// immutable afterwards.
class TriMesh {
 public:
  /// Empty mesh.
  TriMesh() = default;
  TriMesh(Vertices vertices, Faces faces) : vertices_(std::move(vertices)), faces_(std::move(faces)) {
    validate();
  }

  Index vertex_count() const { return vertices_.rows(); }
  Index face_count() const { return faces_.rows(); }
  const Vertices& vertices() const { return vertices_; }
  const Faces& faces() const { return faces_; }

  double face_area(Index f) const {
    const Eigen::Vector3d a = vertices_.row(faces_(f, 0));
    const Eigen::Vector3d b = vertices_.row(faces_(f, 1));
    const Eigen::Vector3d c = vertices_.row(faces_(f, 2));
    return 0.5 * (b - a).cross(c - a).norm();
  }

  double total_area() const {
    double s = 0.0;
    for (Index f = 0; f < face_count(); ++f) s += face_area(f);
    return s;
  }

  double bounding_box_diagonal() const {
    if (vertex_count() == 0) return 0.0;
    return (vertices_.colwise().maxCoeff() - vertices_.colwise().minCoeff()).norm();
  }

  /// Undirected edges (i < j), sorted.
  std::vector<std::pair<Index, Index>> edges() const {
    std::vector<std::pair<Index, Index>> out;
    out.reserve(static_cast<size_t>(3 * face_count()));
    for (Index f = 0; f < face_count(); ++f) {
      for (int c = 0; c < 3; ++c) {
        Index i = faces_(f, c);
        Index j = faces_(f, (c + 1) % 3);
        out.emplace_back(std::min(i, j), std::max(i, j));
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  void validate() const {
    const Index m = vertex_count();
    if (m <= 0) throw MeshError("mesh has no vertices");
    if (face_count() <= 0) throw MeshError("mesh has no faces");
    if (!vertices_.allFinite()) throw MeshError("mesh has non-finite vertex coordinates");

    for (Index f = 0; f < face_count(); ++f) {
      for (int c = 0; c < 3; ++c) {
        if (faces_(f, c) < 0 || faces_(f, c) >= m) {
          throw MeshError("face " + std::to_string(f) + ": vertex index out of range (" +
                          std::to_string(faces_(f, c)) + " not in [0, " + std::to_string(m) + "))");
        }
      }
      if (faces_(f, 0) == faces_(f, 1) || faces_(f, 1) == faces_(f, 2) || faces_(f, 0) == faces_(f, 2)) {
        throw MeshError("face " + std::to_string(f) + " repeats a vertex");
      }
    }

    const double diag = bounding_box_diagonal();
    const double min_area = kDegenerateAreaRatio * diag * diag;
    for (Index f = 0; f < face_count(); ++f) {
      if (!(face_area(f) > min_area)) {
        throw MeshError("degenerate face " + std::to_string(f) + " (area " + std::to_string(face_area(f)) + ")");
      }
    }

    std::map<std::pair<Index, Index>, int> edge_faces;
    for (Index f = 0; f < face_count(); ++f) {
      for (int c = 0; c < 3; ++c) {
        Index i = faces_(f, c);
        Index j = faces_(f, (c + 1) % 3);
        if (++edge_faces[{std::min(i, j), std::max(i, j)}] > 2) {
          throw MeshError("non-manifold edge (" + std::to_string(std::min(i, j)) + ", " +
                          std::to_string(std::max(i, j)) + ") at face " + std::to_string(f));
        }
      }
    }
  }

  Vertices vertices_;
  Faces faces_;
};

namespace detail {

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

/// Next line that is neither blank nor a comment.
inline bool next_content_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '#') continue;
    return true;
  }
  return false;
}

inline TriMesh build_mesh(const std::vector<std::array<double, 3>>& v,
                          const std::vector<std::array<Index, 3>>& f) {
  Vertices vertices(static_cast<Index>(v.size()), 3);
  for (size_t i = 0; i < v.size(); ++i)
    vertices.row(static_cast<Index>(i)) << v[i][0], v[i][1], v[i][2];
  Faces faces(static_cast<Index>(f.size()), 3);
  for (size_t i = 0; i < f.size(); ++i)
    faces.row(static_cast<Index>(i)) << f[i][0], f[i][1], f[i][2];
  return TriMesh(std::move(vertices), std::move(faces));
}

inline std::array<Index, 3> triangle_from(const std::vector<Index>& poly, const std::string& where) {
  if (poly.size() != 3) {
    throw MeshError(where + ": non-triangular face with " + std::to_string(poly.size()) + " vertices");
  }
  return {poly[0], poly[1], poly[2]};
}

inline TriMesh read_off(std::istream& in, const std::string& name) {
  std::string line;
  if (!next_content_line(in, line)) throw MeshError(name + ": empty OFF file");
  std::istringstream header(line);
  std::string magic;
  header >> magic;
  if (magic.rfind("OFF", 0) != 0) throw MeshError(name + ": missing OFF header");
  long nv = -1, nf = -1, ne = 0;
  if (!(header >> nv)) {
    if (!next_content_line(in, line)) throw MeshError(name + ": missing OFF counts");
    std::istringstream counts(line);
    counts >> nv >> nf >> ne;
  } else {
    header >> nf >> ne;
  }
  if (nv < 0 || nf < 0) throw MeshError(name + ": malformed OFF counts");

  std::vector<std::array<double, 3>> v(static_cast<size_t>(nv));
  for (long i = 0; i < nv; ++i) {
    if (!next_content_line(in, line)) throw MeshError(name + ": truncated vertex list");
    std::istringstream ls(line);
    if (!(ls >> v[i][0] >> v[i][1] >> v[i][2])) throw MeshError(name + ": bad vertex line " + std::to_string(i));
  }
  std::vector<std::array<Index, 3>> f;
  f.reserve(static_cast<size_t>(nf));
  for (long i = 0; i < nf; ++i) {
    if (!next_content_line(in, line)) throw MeshError(name + ": truncated face list");
    std::istringstream ls(line);
    long count = 0;
    if (!(ls >> count)) throw MeshError(name + ": bad face line " + std::to_string(i));
    std::vector<Index> poly(static_cast<size_t>(std::max(0L, count)));
    for (auto& idx : poly) {
      if (!(ls >> idx)) throw MeshError(name + ": bad face line " + std::to_string(i));
    }
    f.push_back(triangle_from(poly, name + " face " + std::to_string(i)));
  }
  return build_mesh(v, f);
}

inline TriMesh read_obj(std::istream& in, const std::string& name) {
  std::vector<std::array<double, 3>> v;
  std::vector<std::array<Index, 3>> f;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      std::array<double, 3> p{};
      if (!(ls >> p[0] >> p[1] >> p[2])) throw MeshError(name + ":" + std::to_string(lineno) + ": bad vertex");
      v.push_back(p);
    } else if (tag == "f") {
      std::vector<Index> poly;
      std::string tok;
      while (ls >> tok) {
        long idx = 0;
        try {
          idx = std::stol(tok.substr(0, tok.find('/')));
        } catch (const std::exception&) {
          throw MeshError(name + ":" + std::to_string(lineno) + ": bad face index '" + tok + "'");
        }
        // OBJ indices are 1-based; negative values count back from the end.
        poly.push_back(idx < 0 ? static_cast<Index>(v.size()) + idx : idx - 1);
      }
      f.push_back(triangle_from(poly, name + ":" + std::to_string(lineno)));
    }
  }
  return build_mesh(v, f);
}

inline TriMesh read_ply(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) throw MeshError(name + ": missing ply magic");

  struct Element {
    std::string name;
    long count = 0;
    std::vector<std::string> props;  // "list" entries stored as "list:<name>"
  };
  std::vector<Element> elements;
  bool ascii = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
    } else if (tag == "element") {
      Element e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (tag == "property") {
      if (elements.empty()) throw MeshError(name + ": property before element");
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type, pname;
        ls >> count_type >> item_type >> pname;
        elements.back().props.push_back("list:" + pname);
      } else {
        std::string pname;
        ls >> pname;
        elements.back().props.push_back(pname);
      }
    } else if (tag == "end_header") {
      break;
    }
  }
  if (!ascii) throw MeshError(name + ": only ASCII PLY is supported");

  std::vector<std::array<double, 3>> v;
  std::vector<std::array<Index, 3>> f;
  for (const auto& e : elements) {
    for (long i = 0; i < e.count; ++i) {
      if (!std::getline(in, line)) throw MeshError(name + ": truncated element '" + e.name + "'");
      std::istringstream ls(line);
      if (e.name == "vertex") {
        std::array<double, 3> p{};
        for (const auto& prop : e.props) {
          double value = 0.0;
          if (!(ls >> value)) throw MeshError(name + ": bad vertex " + std::to_string(i));
          if (prop == "x") p[0] = value;
          if (prop == "y") p[1] = value;
          if (prop == "z") p[2] = value;
        }
        v.push_back(p);
      } else if (e.name == "face") {
        std::vector<Index> poly;
        for (const auto& prop : e.props) {
          if (prop.rfind("list:", 0) == 0) {
            long count = 0;
            ls >> count;
            std::vector<Index> items(static_cast<size_t>(std::max(0L, count)));
            for (auto& idx : items) {
              if (!(ls >> idx)) throw MeshError(name + ": bad face " + std::to_string(i));
            }
            if (prop == "list:vertex_indices" || prop == "list:vertex_index") poly = items;
          } else {
            double skip;
            ls >> skip;
          }
        }
        f.push_back(triangle_from(poly, name + " face " + std::to_string(i)));
      }
    }
  }
  return build_mesh(v, f);
}

}  // namespace detail

/// Reads an ASCII OFF, OBJ or PLY triangle mesh. Vertex and face order are
/// kept as in the file.
inline TriMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file " + path.string());
  const std::string ext = detail::lowercase(path.extension().string());
  const std::string name = path.string();
  if (ext == ".off") return detail::read_off(in, name);
  if (ext == ".obj") return detail::read_obj(in, name);
  if (ext == ".ply") return detail::read_ply(in, name);
  throw IoError("unsupported mesh format '" + ext + "' for " + name);
}

/// Writes an ASCII OFF file with full double precision.
inline void save_off(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write mesh file " + path.string());
  out.precision(17);
  out << "OFF\n" << mesh.vertex_count() << ' ' << mesh.face_count() << " 0\n";
  for (Index i = 0; i < mesh.vertex_count(); ++i) {
    out << mesh.vertices()(i, 0) << ' ' << mesh.vertices()(i, 1) << ' ' << mesh.vertices()(i, 2) << '\n';
  }
  for (Index f = 0; f < mesh.face_count(); ++f) {
    out << "3 " << mesh.faces()(f, 0) << ' ' << mesh.faces()(f, 1) << ' ' << mesh.faces()(f, 2) << '\n';
  }
  if (!out) throw IoError("failed writing mesh file " + path.string());
}

}  // namespace fmbs
