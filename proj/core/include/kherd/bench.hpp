#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "kherd/herding.hpp"
#include "kherd/kernels.hpp"

namespace kherd {

// One experiment section of a config file. Methods are named as in the bench
// CLI: eq_weight linesearch fc pmp gcos fc_pmp fc_gcos.
struct ExperimentConfig {
  std::string name = "experiment";
  KernelKind kernel = KernelKind::gaussian;
  double matern_rho = 1.7320508075688772;  // sqrt(3)
  int dim = 2;
  double box_half_width = 1.0;
  MeasureKind measure = MeasureKind::trunc_gaussian;
  bool analytic = true;  // analytic embedding when available
  std::size_t embedding_samples = 20000;
  std::uint64_t embedding_seed = 20127;
  std::vector<std::string> methods = {"linesearch"};
  std::size_t iterations = 300;   // T
  std::size_t inner_rounds = 10;  // K_max
  double delta_pmp = -1e-4;
  double delta_gcos = 1e-4;
  std::size_t candidate_count = 5000;
  std::vector<std::uint64_t> seeds = {1};
  std::string out_dir = "results";

  Domain domain() const;
  std::string canonical_text() const;  // serialized form backing the config hash
};

// Flat INI-style file: `[name]` opens an experiment, `key = value` assigns,
// `#`/`;` start comments. Keys before the first section become defaults for
// every experiment in the file.
std::vector<ExperimentConfig> parse_config_file(const std::filesystem::path& path);
std::vector<ExperimentConfig> parse_config_text(const std::string& text);

// herding driver settings for one named method of an experiment
HerdingConfig method_config(const ExperimentConfig& cfg, const std::string& method);
bool is_known_method(const std::string& method);

// CSV schema, one row per outer iteration of one (method, seed) run.
struct ResultRow {
  std::string method;
  std::uint64_t seed = 0;
  std::size_t t = 0;
  std::size_t node_count = 0;
  double mmd = 0.0;  // sqrt(2 epsilon_t), clamped at zero
  double wall_time_seconds = 0.0;
  double cos_theta = 0.0;
  double gamma = 0.0;
  std::size_t inner_rounds = 0;  // K_t
};

void write_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_csv(const std::filesystem::path& path);
std::string format_double(double v);  // 17 significant digits, round-trip safe

// m i.i.d. draws from the base measure, deterministic per seed.
std::vector<Point> generate_candidates(const Domain& domain, MeasureKind measure,
                                       std::size_t m, std::uint64_t seed);

// sup over the probe set of the distance to the nearest node.
double fill_distance(const std::vector<Point>& nodes, const std::vector<Point>& probe);

enum class SlopeAxis { nodes, time };

// Least-squares slope of log(mmd) against log(x) over rows of a single run
// with x in [from, to]. Throws if fewer than five rows qualify or any mmd
// in range is nonpositive.
double loglog_slope(const std::vector<ResultRow>& run_rows, SlopeAxis axis, double from,
                    double to);

struct RunOptions {
  bool write_files = true;
  int threads = 0;  // 0: hardware concurrency
  std::ostream* log = nullptr;
};

struct ExperimentOutput {
  std::vector<ResultRow> rows;
  std::vector<std::string> failed_runs;
  std::filesystem::path csv_path, manifest_path, plot_path;
};

// Runs every (method, seed) pair of the experiment. Rows come back in
// canonical (method, seed, t) order; CSV, run manifest and a plot script are
// written under out_dir unless write_files is off. Embedding construction is
// shared across runs and excluded from the per-run wall times.
ExperimentOutput run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

std::uint64_t fnv1a64(const std::string& text);

// Desk-scale property sweep behind `check --suite invariants`; prints one
// line per property, returns the number of failures.
int run_invariant_suite(std::ostream& os);

}  // namespace kherd
