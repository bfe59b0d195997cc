#include <CLI11.hpp>
#include <algorithm>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "kherd/bench.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::vector<std::string>& experiments,
            const std::vector<std::string>& methods, const std::vector<std::uint64_t>& seeds,
            const std::string& out, int threads) {
  auto configs = kherd::parse_config_file(config_path);
  if (!experiments.empty()) {
    std::erase_if(configs, [&](const kherd::ExperimentConfig& c) {
      return std::find(experiments.begin(), experiments.end(), c.name) == experiments.end();
    });
    if (configs.empty()) {
      std::cerr << "no experiment section matches the --experiment filter\n";
      return 1;
    }
  }
  int failures = 0;
  for (auto& cfg : configs) {
    if (!methods.empty()) {
      for (const auto& m : methods) {
        if (!kherd::is_known_method(m)) {
          std::cerr << "unknown method '" << m << "'\n";
          return 1;
        }
      }
      cfg.methods = methods;
    }
    if (!seeds.empty()) cfg.seeds = seeds;
    if (!out.empty()) cfg.out_dir = out;

    std::cout << "[" << cfg.name << "] " << cfg.methods.size() << " methods x "
              << cfg.seeds.size() << " seeds, T = " << cfg.iterations << ", m = "
              << cfg.candidate_count << std::endl;
    kherd::RunOptions opts;
    opts.threads = threads;
    opts.log = &std::cerr;
    const auto res = kherd::run_experiment(cfg, opts);
    std::cout << "  wrote " << res.csv_path.string() << "\n  wrote "
              << res.manifest_path.string() << "\n  wrote " << res.plot_path.string()
              << std::endl;
    for (const auto& f : res.failed_runs) {
      std::cerr << "  failed: " << f << std::endl;
      ++failures;
    }
  }
  return failures == 0 ? 0 : 1;
}

int cmd_slope(const std::string& csv, const std::string& axis, double from, double to,
              const std::string& method, long long seed) {
  const auto rows = kherd::read_csv(csv);
  const auto ax = axis == "time" ? kherd::SlopeAxis::time : kherd::SlopeAxis::nodes;
  std::map<std::pair<std::string, std::uint64_t>, std::vector<kherd::ResultRow>> runs;
  for (const auto& r : rows) {
    if (!method.empty() && r.method != method) continue;
    if (seed >= 0 && r.seed != static_cast<std::uint64_t>(seed)) continue;
    runs[{r.method, r.seed}].push_back(r);
  }
  if (runs.empty()) {
    std::cerr << "no runs match the filters\n";
    return 1;
  }
  int errors = 0;
  for (const auto& [key, run_rows] : runs) {
    try {
      const double s = kherd::loglog_slope(run_rows, ax, from, to);
      std::cout << key.first << " seed=" << key.second << " slope=" << kherd::format_double(s)
                << std::endl;
    } catch (const std::exception& e) {
      std::cerr << key.first << " seed=" << key.second << " error: " << e.what() << std::endl;
      ++errors;
    }
  }
  return errors == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kherd - kernel herding quadrature experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run experiments from a config file");
  std::string config_path;
  std::vector<std::string> methods, experiments;
  std::vector<std::uint64_t> seeds;
  std::string out;
  int threads = 0;
  run->add_option("--config", config_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--experiment", experiments, "run only these sections");
  run->add_option("--methods", methods, "override the configured methods");
  run->add_option("--seeds", seeds, "override the configured seeds");
  run->add_option("--out", out, "override the output directory");
  run->add_option("--threads", threads, "worker threads (default: hardware)");

  auto* slope = app.add_subcommand("slope", "fit log-log convergence slopes from a CSV");
  std::string csv, axis = "nodes", method_filter;
  double from = 0.0, to = 0.0;
  long long seed_filter = -1;
  slope->add_option("--csv", csv, "result CSV")->required()->check(CLI::ExistingFile);
  slope->add_option("--x", axis, "x axis: nodes or time")
      ->check(CLI::IsMember({"nodes", "time"}));
  slope->add_option("--from", from, "lower end of the fit range")->required();
  slope->add_option("--to", to, "upper end of the fit range")->required();
  slope->add_option("--method", method_filter, "restrict to one method");
  slope->add_option("--seed", seed_filter, "restrict to one seed");

  auto* check = app.add_subcommand("check", "run built-in property suites");
  std::string suite = "invariants";
  check->add_option("--suite", suite, "suite name")->check(CLI::IsMember({"invariants"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return cmd_run(config_path, experiments, methods, seeds, out, threads);
    }
    if (slope->parsed()) {
      return cmd_slope(csv, axis, from, to, method_filter, seed_filter);
    }
    if (check->parsed()) {
      const int failures = kherd::run_invariant_suite(std::cout);
      std::cout << (failures == 0 ? "all properties hold" : "property failures detected")
                << std::endl;
      return failures == 0 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
