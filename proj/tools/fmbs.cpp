#include <chrono>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "fmbs/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Functional maps with basis design"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_dir;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration (INI)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory, overrides [output] dir");
  };
  auto* pre = app.add_subcommand("precompute", "mass, stiffness, eigenbasis, descriptors and POD caches");
  auto* solve = app.add_subcommand("solve", "run the basis-design solver");
  auto* extract = app.add_subcommand("extract", "point-to-point map from the solved bases");
  auto* eval = app.add_subcommand("eval", "feature errors, geodesic error curve and plots");
  for (auto* s : {pre, solve, extract, eval}) add_common(s);

  CLI11_PARSE(app, argc, argv);

  const auto t0 = std::chrono::steady_clock::now();
  try {
    fmbs::RunConfig cfg = fmbs::load_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;

    if (pre->parsed()) {
      const auto r = fmbs::cmd_precompute(cfg);
      std::cout << "source: " << (r.cache_hit_source ? "cache hit " : "computed ") << r.cache_source.string()
                << " (r = " << r.pod_source.rank() << ")\n";
      std::cout << "target: " << (r.cache_hit_target ? "cache hit " : "computed ") << r.cache_target.string()
                << " (r = " << r.pod_target.rank() << ")\n";
    } else if (solve->parsed()) {
      const auto r = fmbs::cmd_solve(cfg);
      const double energy = r.result.history.empty() ? 0.0 : r.result.history.back().energy;
      std::cout << "iterations " << r.result.state.iter << (r.result.converged ? " (converged)" : " (max_iter)")
                << ", energy " << energy << "\n";
    } else if (extract->parsed()) {
      const auto r = fmbs::cmd_extract(cfg);
      std::cout << "wrote " << (cfg.out_dir / "map.txt").string() << " (" << r.map.size() << " vertices)\n";
    } else if (eval->parsed()) {
      const auto r = fmbs::cmd_eval(cfg);
      std::cout << "mean e1 " << r.errors.e1.mean() << ", mean e2 " << r.errors.e2.mean() << "\n";
      if (r.curve) std::cout << "fraction at threshold 0: " << r.curve->fractions.front() << "\n";
      std::cout << "report in " << (cfg.out_dir / "report").string() << "\n";
    }
  } catch (const fmbs::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "elapsed " << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
  return 0;
}
