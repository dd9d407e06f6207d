// Writes the desk-scale demo inputs: two deformed icospheres, landmark files,
// the identity ground truth and a ready-to-run config. With --permute the
// target is a vertex-relabelled copy of the source instead.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>

#include "CLI11.hpp"
#include "fmbs/map_extract.hpp"
#include "fmbs/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"desk-scale demo data"};
  std::string dir = "demo";
  bool permute = false;
  bool identical = false;
  unsigned seed = 7;
  app.add_option("dir", dir, "output directory");
  app.add_flag("--permute", permute, "target is a random vertex permutation of the source");
  app.add_flag("--identical", identical, "target is the source itself");
  app.add_option("--seed", seed, "permutation seed");
  CLI11_PARSE(app, argc, argv);

  namespace fs = std::filesystem;
  using fmbs::Index;
  try {
    fs::create_directories(dir);
    const fmbs::DemoPair pair = fmbs::demo_pair();
    fmbs::TriMesh target = pair.target;
    std::vector<Index> perm(static_cast<size_t>(pair.source.vertex_count()));
    std::iota(perm.begin(), perm.end(), Index{0});
    if (permute) {
      std::mt19937 rng(seed);
      std::shuffle(perm.begin(), perm.end(), rng);
      target = fmbs::permute_vertices(pair.source, perm);
    } else if (identical) {
      target = pair.source;
    }
    fmbs::save_off(pair.source, fs::path(dir) / "source.off");
    fmbs::save_off(target, fs::path(dir) / "target.off");

    std::ofstream ls(fs::path(dir) / "landmarks_source.txt"), lt(fs::path(dir) / "landmarks_target.txt");
    for (Index l : pair.landmarks) {
      ls << l << '\n';
      lt << perm[static_cast<size_t>(l)] << '\n';
    }
    fmbs::PointMap gt;
    gt.targets = perm;
    gt.target_count = target.vertex_count();
    fmbs::save_point_map(gt, fs::path(dir) / "gt.txt");

    std::ofstream cfg(fs::path(dir) / "run.ini");
    cfg << "[mesh]\nsource = source.off\ntarget = target.off\n\n"
        << "[descriptors]\nlb_count = 60\nwks_energies = 50\nwks_variance = 6\n"
        << "landmarks_source = landmarks_source.txt\nlandmarks_target = landmarks_target.txt\nlandmark_width = 0.3\n\n"
        << "[solver]\nk = 10\ncoverage = 0.9\nrho0 = 1\nmax_iter = 10000\n\n"
        << "[extract]\nicp_iters = 10\n\n"
        << "[eval]\nground_truth = gt.txt\n\n"
        << "[output]\ndir = out\n\n"
        << "[run]\nseed = 0\n";
    if (!cfg || !ls || !lt) throw fmbs::IoError("failed writing demo files in " + dir);
    std::cout << "wrote " << dir << "/run.ini\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
