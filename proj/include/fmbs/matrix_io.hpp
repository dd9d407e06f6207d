#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fmbs/error.hpp"
#include "fmbs/types.hpp"

namespace fmbs {

// Text matrices: header "rows cols", then one row per line.

inline void save_matrix_text(const Mat& A, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17) << A.rows() << ' ' << A.cols() << '\n';
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = 0; j < A.cols(); ++j) out << (j ? " " : "") << A(i, j);
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

inline Mat load_matrix_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open matrix file " + path.string());
  Index r = 0, c = 0;
  if (!(in >> r >> c) || r < 0 || c < 0) throw IoError(path.string() + ": bad matrix header");
  Mat A(r, c);
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < c; ++j) {
      if (!(in >> A(i, j))) {
        throw IoError(path.string() + ": expected " + std::to_string(r * c) + " entries, got " +
                      std::to_string(i * c + j));
      }
    }
  }
  return A;
}

/// Whitespace-separated vertex indices; '#' starts a comment.
inline std::vector<Index> load_index_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open index file " + path.string());
  std::vector<Index> out;
  std::string line;
  while (std::getline(in, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    std::istringstream row(line);
    std::string tok;
    while (row >> tok) {
      try {
        size_t used = 0;
        const long long v = std::stoll(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        out.push_back(static_cast<Index>(v));
      } catch (const std::exception&) {
        throw IoError(path.string() + ": bad index '" + tok + "'");
      }
    }
  }
  return out;
}

// Binary matrices: int64 rows, int64 cols, column-major doubles.

inline void write_matrix_binary(std::ostream& out, const Mat& A) {
  const std::int64_t r = A.rows(), c = A.cols();
  out.write(reinterpret_cast<const char*>(&r), sizeof r);
  out.write(reinterpret_cast<const char*>(&c), sizeof c);
  out.write(reinterpret_cast<const char*>(A.data()), static_cast<std::streamsize>(sizeof(double) * A.size()));
}

inline Mat read_matrix_binary(std::istream& in, const std::string& where) {
  std::int64_t r = 0, c = 0;
  in.read(reinterpret_cast<char*>(&r), sizeof r);
  in.read(reinterpret_cast<char*>(&c), sizeof c);
  if (!in || r < 0 || c < 0 || r > (1 << 28) || c > (1 << 28) || (r > 0 && c > (std::int64_t{1} << 32) / r)) {
    throw IoError(where + ": bad matrix block");
  }
  Mat A(r, c);
  in.read(reinterpret_cast<char*>(A.data()), static_cast<std::streamsize>(sizeof(double) * A.size()));
  if (!in) throw IoError(where + ": truncated matrix block");
  return A;
}

}  // namespace fmbs
