#pragma once

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <type_traits>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include "json.hpp"
#include <openssl/evp.h>

#include "fmbs/error.hpp"
#include "fmbs/eval.hpp"
#include "fmbs/map_extract.hpp"
#include "fmbs/matrix_io.hpp"
#include "fmbs/pipeline.hpp"
#include "fmbs/report.hpp"
#include "fmbs/solver/checkpoint.hpp"

namespace fmbs {

namespace fs = std::filesystem;

/// Everything one run needs. Relative paths in the file are resolved against
/// the directory holding the config.
struct RunConfig {
  fs::path source, target;
  DescriptorSpec descriptors;             // landmarks/external filled per side at load time
  fs::path landmarks_source, landmarks_target;
  std::vector<fs::path> external_source, external_target;
  SolverParams solver;
  double coverage = 0.9;
  Index icp_iters = 10;
  std::optional<fs::path> ground_truth;
  double threshold_max = 0.25;
  double threshold_step = 0.0025;
  fs::path out_dir = "out";
  unsigned seed = 0;

  void validate() const {
    auto must_exist = [](const fs::path& p, const char* what) {
      if (!fs::exists(p)) throw Error(std::string("config: ") + what + " '" + p.string() + "' does not exist");
    };
    must_exist(source, "mesh.source");
    must_exist(target, "mesh.target");
    if (landmarks_source.empty() != landmarks_target.empty()) {
      throw Error("config: landmarks must be given for both meshes or neither");
    }
    if (!landmarks_source.empty()) {
      must_exist(landmarks_source, "descriptors.landmarks_source");
      must_exist(landmarks_target, "descriptors.landmarks_target");
    }
    if (external_source.size() != external_target.size()) {
      throw Error("config: external descriptor lists differ in length");
    }
    for (const auto& p : external_source) must_exist(p, "descriptors.external_source");
    for (const auto& p : external_target) must_exist(p, "descriptors.external_target");
    if (ground_truth) must_exist(*ground_truth, "eval.ground_truth");
    solver.validate();
    if (!(coverage > 0.0 && coverage <= 1.0)) throw Error("config: solver.coverage must be in (0, 1]");
    if (icp_iters < 0) throw Error("config: extract.icp_iters must be >= 0");
    if (descriptors.lb_count < 2) throw Error("config: descriptors.lb_count must be >= 2");
    if (descriptors.wks_energies < 0) throw Error("config: descriptors.wks_energies must be >= 0");
    if (!(descriptors.landmark_width > 0.0)) throw Error("config: descriptors.landmark_width must be positive");
  }
};

namespace detail {

inline std::vector<fs::path> split_paths(const std::string& s, const fs::path& base) {
  std::vector<fs::path> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    item = item.substr(b, item.find_last_not_of(" \t") - b + 1);
    out.push_back(base / item);
  }
  return out;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error("config: " + key + " must be a boolean, got '" + v + "'");
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in, const fs::path& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(std::string("config: ") + e.what());
  }
  static const std::map<std::string, std::vector<std::string>> known = {
      {"mesh", {"source", "target"}},
      {"descriptors",
       {"lb_count", "wks_energies", "wks_variance", "landmarks_source", "landmarks_target", "landmark_width",
        "external_source", "external_target"}},
      {"solver",
       {"preset", "k", "coverage", "rho0", "mu_cfid", "mu_iso", "mu_dir", "max_iter", "eps_abs", "eps_rel",
        "rho_update", "rho_freeze_iter", "divergence_bound"}},
      {"extract", {"icp_iters"}},
      {"eval", {"ground_truth", "threshold_max", "threshold_step"}},
      {"output", {"dir"}},
      {"run", {"seed"}},
  };
  for (const auto& [section, body] : tree) {
    auto it = known.find(section);
    if (it == known.end()) throw Error("config: unknown section [" + section + "]");
    for (const auto& [key, _] : body) {
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end()) {
        throw Error("config: unknown key " + section + "." + key);
      }
    }
  }

  auto get = [&](const std::string& key) -> std::optional<std::string> {
    auto v = tree.get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return *v;
  };
  auto num = [&](const std::string& key, auto& target) {
    auto v = get(key);
    if (!v) return;
    try {
      using T = std::decay_t<decltype(target)>;
      size_t used = 0;
      if constexpr (std::is_floating_point_v<T>) {
        target = std::stod(*v, &used);
      } else {
        target = static_cast<T>(std::stoll(*v, &used));
      }
      if (used != v->size()) throw std::invalid_argument(*v);
    } catch (const std::exception&) {
      throw Error("config: " + key + " is not a number: '" + *v + "'");
    }
  };

  RunConfig c;
  auto src = get("mesh.source");
  auto tgt = get("mesh.target");
  if (!src || !tgt) throw Error("config: mesh.source and mesh.target are required");
  c.source = base_dir / *src;
  c.target = base_dir / *tgt;

  num("descriptors.lb_count", c.descriptors.lb_count);
  num("descriptors.wks_energies", c.descriptors.wks_energies);
  num("descriptors.wks_variance", c.descriptors.wks_variance);
  num("descriptors.landmark_width", c.descriptors.landmark_width);
  if (auto v = get("descriptors.landmarks_source")) c.landmarks_source = base_dir / *v;
  if (auto v = get("descriptors.landmarks_target")) c.landmarks_target = base_dir / *v;
  if (auto v = get("descriptors.external_source")) c.external_source = detail::split_paths(*v, base_dir);
  if (auto v = get("descriptors.external_target")) c.external_target = detail::split_paths(*v, base_dir);

  if (auto v = get("solver.preset")) {
    const ParameterPreset& p = find_preset(*v);
    c.coverage = p.coverage;
    c.solver.mu_cfid = p.mu_cfid;
    c.solver.mu_iso = p.mu_iso;
    c.solver.mu_dir = p.mu_dir;
  }
  num("solver.k", c.solver.k);
  num("solver.coverage", c.coverage);
  num("solver.rho0", c.solver.rho0);
  num("solver.mu_cfid", c.solver.mu_cfid);
  num("solver.mu_iso", c.solver.mu_iso);
  num("solver.mu_dir", c.solver.mu_dir);
  num("solver.max_iter", c.solver.max_iter);
  num("solver.eps_abs", c.solver.eps_abs);
  num("solver.eps_rel", c.solver.eps_rel);
  num("solver.rho_freeze_iter", c.solver.rho_freeze_iter);
  num("solver.divergence_bound", c.solver.divergence_bound);
  if (auto v = get("solver.rho_update")) c.solver.rho_update = detail::parse_bool(*v, "solver.rho_update");

  num("extract.icp_iters", c.icp_iters);
  if (auto v = get("eval.ground_truth")) c.ground_truth = base_dir / *v;
  num("eval.threshold_max", c.threshold_max);
  num("eval.threshold_step", c.threshold_step);
  if (auto v = get("output.dir")) c.out_dir = base_dir / *v;
  else c.out_dir = base_dir / c.out_dir;
  num("run.seed", c.seed);
  return c;
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  RunConfig c = parse_config(in, path.parent_path());
  c.validate();
  return c;
}

// ---------------------------------------------------------------- caching

inline constexpr char kCacheMagic[8] = {'F', 'M', 'B', 'S', 'C', 'A', 'C', 'H'};
inline constexpr std::uint32_t kCacheVersion = 1;

namespace detail {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& add(const void* data, size_t n) {
    if (EVP_DigestUpdate(ctx_, data, n) != 1) throw Error("sha256 update failed");
    return *this;
  }
  Sha256& add(const std::string& s) {
    const std::uint64_t n = s.size();
    add(&n, sizeof n);
    return add(s.data(), s.size());
  }
  template <class T>
  Sha256& add_value(const T& v) {
    return add(&v, sizeof v);
  }
  Sha256& add_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return add(buf.str());
  }

  std::string raw() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_, md, &len) != 1) throw Error("sha256 final failed");
    return std::string(reinterpret_cast<char*>(md), len);
  }
  std::string hex() {
    std::ostringstream o;
    for (unsigned char ch : raw()) o << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(ch);
    return o.str();
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace detail

inline fs::path cache_root(const RunConfig& c) {
  if (const char* env = std::getenv("FMBS_CACHE_DIR"); env && *env) return fs::path(env);
  return c.out_dir / "cache";
}

/// Spectral artifacts of one mesh as stored in the cache.
struct CachedShape {
  MassMatrix G;
  CotanMatrix W;
  LBBasis lb;
  Mat descriptors_raw;
  PODSubspace pod;
};

inline std::string shape_cache_key(const fs::path& mesh, const DescriptorSpec& spec, const fs::path& landmark_file,
                                   const std::vector<fs::path>& external, double coverage, Index k, unsigned seed) {
  detail::Sha256 h;
  h.add(std::string("fmbs-shape-cache-v1"));
  h.add_file(mesh);
  h.add_value(spec.lb_count).add_value(spec.wks_energies).add_value(spec.wks_variance);
  h.add_value(spec.landmark_width);
  h.add(landmark_file.empty() ? std::string() : std::string("landmarks"));
  if (!landmark_file.empty()) h.add_file(landmark_file);
  h.add_value(static_cast<std::uint64_t>(external.size()));
  for (const auto& e : external) h.add_file(e);
  h.add_value(coverage).add_value(pod_min_modes(k)).add_value(seed);
  return h.hex();
}

inline void save_cached_shape(const CachedShape& s, const fs::path& path) {
  std::ostringstream body;
  write_matrix_binary(body, s.G.diag);
  std::vector<Eigen::Triplet<double>> trip;
  for (Index col = 0; col < s.W.matrix.outerSize(); ++col) {
    for (SpMat::InnerIterator it(s.W.matrix, col); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
  }
  Mat t(static_cast<Index>(trip.size()), 3);
  for (size_t i = 0; i < trip.size(); ++i) {
    t.row(static_cast<Index>(i)) << static_cast<double>(trip[i].row()), static_cast<double>(trip[i].col()),
        trip[i].value();
  }
  write_matrix_binary(body, t);
  write_matrix_binary(body, s.lb.functions);
  write_matrix_binary(body, s.lb.eigenvalues);
  write_matrix_binary(body, s.descriptors_raw);
  write_matrix_binary(body, s.pod.modes);
  write_matrix_binary(body, s.pod.singular_values);
  write_matrix_binary(body, Mat::Constant(1, 1, s.pod.coverage));

  std::string payload(kCacheMagic, sizeof kCacheMagic);
  payload.append(reinterpret_cast<const char*>(&kCacheVersion), sizeof kCacheVersion);
  payload += body.str();
  const std::string digest = detail::Sha256().add(payload.data(), payload.size()).raw();

  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write cache file " + tmp.string());
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    out.write(digest.data(), static_cast<std::streamsize>(digest.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

/// Throws IoError when the file is missing, truncated or fails its checksum.
inline CachedShape load_cached_shape(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open cache file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string data = buf.str();
  const size_t head = sizeof kCacheMagic + sizeof kCacheVersion;
  if (data.size() < head + 32) throw IoError(path.string() + ": truncated cache file");
  const std::string payload = data.substr(0, data.size() - 32);
  if (detail::Sha256().add(payload.data(), payload.size()).raw() != data.substr(data.size() - 32)) {
    throw IoError(path.string() + ": cache checksum mismatch");
  }
  if (std::memcmp(payload.data(), kCacheMagic, sizeof kCacheMagic) != 0) throw IoError(path.string() + ": bad magic");
  std::uint32_t version = 0;
  std::memcpy(&version, payload.data() + sizeof kCacheMagic, sizeof version);
  if (version != kCacheVersion) throw IoError(path.string() + ": unsupported cache version");

  std::istringstream body(payload.substr(head));
  const std::string where = "cache " + path.string();
  CachedShape s;
  s.G.diag = read_matrix_binary(body, where);
  const Mat t = read_matrix_binary(body, where);
  const Index m = s.G.diag.size();
  std::vector<Eigen::Triplet<double>> trip;
  for (Index i = 0; i < t.rows(); ++i) {
    trip.emplace_back(static_cast<Index>(t(i, 0)), static_cast<Index>(t(i, 1)), t(i, 2));
  }
  s.W.matrix.resize(m, m);
  s.W.matrix.setFromTriplets(trip.begin(), trip.end());
  s.lb.functions = read_matrix_binary(body, where);
  s.lb.eigenvalues = read_matrix_binary(body, where);
  s.descriptors_raw = read_matrix_binary(body, where);
  s.pod.modes = read_matrix_binary(body, where);
  s.pod.singular_values = read_matrix_binary(body, where);
  s.pod.coverage = read_matrix_binary(body, where)(0, 0);
  return s;
}

/// Loaded meshes plus spectral artifacts for both sides of a run.
struct PrecomputeResult {
  ShapeData source, target;
  PODSubspace pod_source, pod_target;
  bool cache_hit_source = false;
  bool cache_hit_target = false;
  fs::path cache_source, cache_target;
};

namespace detail {

inline DescriptorSpec side_spec(const RunConfig& c, const fs::path& landmarks, const std::vector<fs::path>& external) {
  DescriptorSpec s = c.descriptors;
  s.landmarks = landmarks.empty() ? std::vector<Index>{} : load_index_list(landmarks);
  s.external.clear();
  for (const auto& e : external) s.external.push_back(load_matrix_text(e));
  return s;
}

inline void prepare_side(const RunConfig& c, const fs::path& mesh_path, const fs::path& landmarks,
                         const std::vector<fs::path>& external, const char* label, ShapeData& shape,
                         PODSubspace& pod, bool& hit, fs::path& cache_file) {
  TriMesh mesh = [&] {
    try {
      return load_mesh(mesh_path);
    } catch (const Error& e) {
      throw Error(std::string("precompute (") + label + " mesh): " + e.what());
    }
  }();
  const std::string key =
      shape_cache_key(mesh_path, c.descriptors, landmarks, external, c.coverage, c.solver.k, c.seed);
  cache_file = cache_root(c) / (key + ".bin");
  hit = false;
  if (fs::exists(cache_file)) {
    try {
      CachedShape cs = load_cached_shape(cache_file);
      if (cs.G.size() != mesh.vertex_count() || cs.descriptors_raw.rows() != mesh.vertex_count()) {
        throw IoError(cache_file.string() + ": cached sizes do not match the mesh");
      }
      shape.mesh = std::move(mesh);
      shape.G = std::move(cs.G);
      shape.W = std::move(cs.W);
      shape.lb = std::move(cs.lb);
      shape.descriptors = make_descriptor_set(std::move(cs.descriptors_raw), shape.G);
      pod = std::move(cs.pod);
      hit = true;
      return;
    } catch (const Error& e) {
      std::cerr << "warning: " << e.what() << "; recomputing\n";
    }
  }
  try {
    shape = prepare_shape(std::move(mesh), side_spec(c, landmarks, external), c.seed);
    pod = pod_modes(shape.descriptors, c.coverage, pod_min_modes(c.solver.k));
  } catch (const Error& e) {
    throw Error(std::string("precompute (") + label + "): " + e.what());
  }
  save_cached_shape({shape.G, shape.W, shape.lb, shape.descriptors.raw, pod}, cache_file);
}

}  // namespace detail

inline PrecomputeResult cmd_precompute(const RunConfig& c) {
  PrecomputeResult r;
  detail::prepare_side(c, c.source, c.landmarks_source, c.external_source, "source", r.source, r.pod_source,
                       r.cache_hit_source, r.cache_source);
  detail::prepare_side(c, c.target, c.landmarks_target, c.external_target, "target", r.target, r.pod_target,
                       r.cache_hit_target, r.cache_target);
  if (r.source.descriptors.count() != r.target.descriptors.count()) {
    throw Error("precompute: descriptor counts differ between meshes (" +
                std::to_string(r.source.descriptors.count()) + " vs " +
                std::to_string(r.target.descriptors.count()) + ")");
  }
  return r;
}

// ---------------------------------------------------------------- solve

struct SolveOutputs {
  SolveResult result;
  FinalBases bases;
  double descriptor_scale = 1.0;
};

inline SolveOutputs cmd_solve(const RunConfig& c) {
  const PrecomputeResult pre = cmd_precompute(c);
  ReducedProblem p1 = reduce(pre.pod_source, pre.source.descriptors.scaled, pre.source.G, pre.source.W);
  ReducedProblem p2 = reduce(pre.pod_target, pre.target.descriptors.scaled, pre.target.G, pre.target.W);
  SolveOutputs out;
  out.descriptor_scale = balance_descriptor_scale(p1, p2);
  fs::create_directories(c.out_dir);
  try {
    out.result = run(p1, p2, c.solver);
  } catch (const DivergenceError&) {
    throw;
  } catch (const Error& e) {
    throw Error(std::string("solve: ") + e.what());
  }
  out.bases = finalize(out.result.state, p1.pod, p2.pod, pre.source.G, pre.target.G, pre.source.descriptors.scaled,
                       pre.target.descriptors.scaled);
  save_checkpoint(out.result.state, c.out_dir / "checkpoint.bin");
  write_history_csv(out.result.history, c.out_dir / "residuals.csv");
  save_matrix_text(out.bases.B1, c.out_dir / "B1.txt");
  save_matrix_text(out.bases.B2, c.out_dir / "B2.txt");
  save_matrix_text(out.bases.C, c.out_dir / "C.txt");

  nlohmann::json summary;
  summary["iterations"] = out.result.state.iter;
  summary["converged"] = out.result.converged;
  summary["energy"] = out.result.history.empty() ? energy_total(out.result.state, p1, p2, c.solver)
                                                 : out.result.history.back().energy;
  summary["descriptor_scale"] = out.descriptor_scale;
  summary["rank_source"] = p1.dim();
  summary["rank_target"] = p2.dim();
  summary["k"] = c.solver.k;
  std::ofstream js(c.out_dir / "solve.json");
  js << summary.dump(2) << '\n';
  if (!js) throw IoError("write failed for " + (c.out_dir / "solve.json").string());
  return out;
}

// ---------------------------------------------------------------- extract

struct ExtractOutputs {
  PointMap map;
  Mat C;
};

inline ExtractOutputs cmd_extract(const RunConfig& c) {
  for (const char* f : {"B1.txt", "B2.txt", "C.txt"}) {
    if (!fs::exists(c.out_dir / f)) {
      throw IoError("extract: missing checkpoint output " + (c.out_dir / f).string() + " (run solve first)");
    }
  }
  const Mat B1 = load_matrix_text(c.out_dir / "B1.txt");
  const Mat B2 = load_matrix_text(c.out_dir / "B2.txt");
  const Mat C = load_matrix_text(c.out_dir / "C.txt");
  const IcpResult r = icp_refine(B1, B2, C, c.icp_iters);
  save_point_map(r.map, c.out_dir / "map.txt");
  save_matrix_text(r.C, c.out_dir / "C_refined.txt");
  return {r.map, r.C};
}

// ---------------------------------------------------------------- eval

struct EvalOutputs {
  FeatureErrors errors;
  std::optional<ErrorCurve> curve;
  std::vector<fs::path> files;
};

inline EvalOutputs cmd_eval(const RunConfig& c) {
  const fs::path map_file = c.out_dir / "map.txt";
  if (!fs::exists(map_file)) throw IoError("eval: missing map " + map_file.string() + " (run extract first)");
  for (const char* f : {"B1.txt", "B2.txt", "C.txt"}) {
    if (!fs::exists(c.out_dir / f)) throw IoError("eval: missing solve output " + (c.out_dir / f).string());
  }
  const PrecomputeResult pre = cmd_precompute(c);
  const Mat B1 = load_matrix_text(c.out_dir / "B1.txt");
  const Mat B2 = load_matrix_text(c.out_dir / "B2.txt");
  const Mat C = load_matrix_text(c.out_dir / "C.txt");
  const PointMap map = load_point_map(map_file);

  EvalOutputs out;
  out.errors = feature_errors(B1, B2, C, pre.source.descriptors.raw, pre.target.descriptors.raw, pre.source.G,
                              pre.target.G);
  const fs::path dir = c.out_dir / "report";
  std::vector<NamedCurve> curves;
  if (c.ground_truth) {
    const PointMap gt = load_point_map(*c.ground_truth);
    out.curve = geodesic_error_curve(map, gt, pre.target.mesh, default_thresholds(c.threshold_max, c.threshold_step));
    curves.push_back({"geodesic", *out.curve});
  } else {
    std::cerr << "notice: no ground truth configured; reporting feature errors only\n";
  }
  std::vector<NamedHistory> histories;
  if (c.ground_truth && fs::exists(c.out_dir / "residuals.csv")) {
    histories.push_back({"solver", read_history_csv(c.out_dir / "residuals.csv")});
  }
  out.files = emit_report(curves, histories, dir);

  auto write_vec = [&](const Vec& v, const char* name, const char* col) {
    const fs::path p = dir / name;
    auto o = detail::open_out(p);
    o << "index," << col << '\n';
    for (Index i = 0; i < v.size(); ++i) o << i << ',' << v[i] << '\n';
    detail::check_written(o, p);
    out.files.push_back(p);
  };
  write_vec(out.errors.e1, "e1.csv", "e1");
  write_vec(out.errors.e2, "e2.csv", "e2");

  nlohmann::json summary;
  summary["mean_e1"] = out.errors.e1.mean();
  summary["mean_e2"] = out.errors.e2.mean();
  if (out.curve) {
    summary["fraction_at_zero"] = out.curve->fractions.front();
    double auc = 0.0;
    for (double f : out.curve->fractions) auc += f;
    summary["mean_fraction"] = auc / static_cast<double>(out.curve->fractions.size());
  }
  const fs::path sp = dir / "summary.json";
  std::ofstream js(sp);
  js << summary.dump(2) << '\n';
  if (!js) throw IoError("write failed for " + sp.string());
  out.files.push_back(sp);
  return out;
}

}  // namespace fmbs
