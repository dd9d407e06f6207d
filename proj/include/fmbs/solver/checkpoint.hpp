#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "fmbs/error.hpp"
#include "fmbs/matrix_io.hpp"
#include "fmbs/solver/objective.hpp"

namespace fmbs {

inline constexpr char kCheckpointMagic[8] = {'F', 'M', 'B', 'S', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout: magic, uint32 version, double rho, int64 iter, then B1, B2, B1',
/// B2', C, D, P1, P2, Q1', Q2' as binary matrices.
inline void save_checkpoint(const SolverState& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  out.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof kCheckpointVersion);
  out.write(reinterpret_cast<const char*>(&s.rho), sizeof s.rho);
  const std::int64_t iter = s.iter;
  out.write(reinterpret_cast<const char*>(&iter), sizeof iter);
  for (const Mat* m : {&s.B1, &s.B2, &s.B1p, &s.B2p, &s.C, &s.D, &s.P1, &s.P2, &s.Q1p, &s.Q2p}) {
    write_matrix_binary(out, *m);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

inline SolverState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string where = "checkpoint " + path.string();
  char magic[8] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw IoError(where + ": not a checkpoint file");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (!in || version != kCheckpointVersion) {
    throw IoError(where + ": unsupported version " + std::to_string(version));
  }
  SolverState s;
  std::int64_t iter = 0;
  in.read(reinterpret_cast<char*>(&s.rho), sizeof s.rho);
  in.read(reinterpret_cast<char*>(&iter), sizeof iter);
  if (!in) throw IoError(where + ": truncated header");
  s.iter = iter;
  for (Mat* m : {&s.B1, &s.B2, &s.B1p, &s.B2p, &s.C, &s.D, &s.P1, &s.P2, &s.Q1p, &s.Q2p}) {
    *m = read_matrix_binary(in, where);
  }
  return s;
}

}  // namespace fmbs
