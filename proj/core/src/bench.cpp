#include "kherd/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "kherd/errors.hpp"
#include "kherd/rng.hpp"
#include "kherd/simplexopt.hpp"

namespace kherd {

namespace {

const char* kCsvHeader = "method,seed,t,node_count,mmd,wall_time_seconds,cos_theta,gamma,K_t";

std::string kernel_name(KernelKind k) {
  switch (k) {
    case KernelKind::gaussian: return "gaussian";
    case KernelKind::matern32: return "matern32";
    case KernelKind::sphere_distance: return "sphere";
  }
  return "?";
}

std::string measure_name(MeasureKind m) {
  return m == MeasureKind::uniform ? "uniform" : "trunc_gaussian";
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) {
    if (!tok.empty() && tok.back() == ',') tok.pop_back();
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& s) {
  const std::string t = trim(s);
  double v = 0.0;
  if (t == "nan" || t == "-nan") return std::numeric_limits<double>::quiet_NaN();
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size()) {
    throw std::invalid_argument("not a real number: '" + t + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  const std::string t = trim(s);
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size()) {
    throw std::invalid_argument("not an unsigned integer: '" + t + "'");
  }
  return v;
}

}  // namespace

Domain ExperimentConfig::domain() const {
  if (kernel == KernelKind::sphere_distance) return make_unit_sphere();
  return make_symmetric_box(dim, box_half_width);
}

std::string ExperimentConfig::canonical_text() const {
  std::ostringstream os;
  os << "name=" << name << "\nkernel=" << kernel_name(kernel) << "\nrho=" << format_double(matern_rho)
     << "\ndim=" << dim << "\nhalf_width=" << format_double(box_half_width)
     << "\nmeasure=" << measure_name(measure) << "\nembedding="
     << (analytic ? "analytic" : "empirical") << "\nembedding_samples=" << embedding_samples
     << "\nembedding_seed=" << embedding_seed << "\nT=" << iterations
     << "\nK_max=" << inner_rounds << "\ndelta_pmp=" << format_double(delta_pmp)
     << "\ndelta_gcos=" << format_double(delta_gcos) << "\ncandidates=" << candidate_count
     << "\nmethods=";
  for (const auto& m : methods) os << m << ' ';
  os << "\nseeds=";
  for (auto s : seeds) os << s << ' ';
  os << '\n';
  return os.str();
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool is_known_method(const std::string& method) {
  return method == "eq_weight" || method == "linesearch" || method == "fc" ||
         method == "pmp" || method == "gcos" || method == "fc_pmp" || method == "fc_gcos";
}

HerdingConfig method_config(const ExperimentConfig& cfg, const std::string& method) {
  HerdingConfig h;
  h.max_iterations = cfg.iterations;
  h.inner_rounds = cfg.inner_rounds;
  if (method == "eq_weight") {
    h.variant = Variant::eq_weight;
  } else if (method == "linesearch") {
    h.variant = Variant::linesearch;
  } else if (method == "fc") {
    h.variant = Variant::fully_corrective;
  } else if (method == "pmp" || method == "fc_pmp") {
    h.variant = Variant::accelerated;
    h.approximator = method == "pmp" ? Approximator::pmp : Approximator::fc_pmp;
    h.delta = cfg.delta_pmp;
  } else if (method == "gcos" || method == "fc_gcos") {
    h.variant = Variant::accelerated;
    h.approximator = method == "gcos" ? Approximator::gcos : Approximator::fc_gcos;
    h.delta = cfg.delta_gcos;
  } else {
    throw std::invalid_argument("unknown method '" + method + "'");
  }
  return h;
}

namespace {

void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "kernel") {
    const std::string v = trim(value);
    if (v == "gaussian") {
      cfg.kernel = KernelKind::gaussian;
    } else if (v == "matern32" || v == "matern") {
      cfg.kernel = KernelKind::matern32;
    } else if (v == "sphere" || v == "sphere_distance") {
      cfg.kernel = KernelKind::sphere_distance;
      cfg.measure = MeasureKind::uniform;
    } else {
      throw std::invalid_argument("unknown kernel '" + v + "'");
    }
  } else if (key == "rho") {
    cfg.matern_rho = parse_double(value);
  } else if (key == "dim") {
    cfg.dim = static_cast<int>(parse_u64(value));
  } else if (key == "half_width") {
    cfg.box_half_width = parse_double(value);
  } else if (key == "measure") {
    const std::string v = trim(value);
    if (v == "uniform") {
      cfg.measure = MeasureKind::uniform;
    } else if (v == "trunc_gaussian") {
      cfg.measure = MeasureKind::trunc_gaussian;
    } else {
      throw std::invalid_argument("unknown measure '" + v + "'");
    }
  } else if (key == "embedding") {
    const std::string v = trim(value);
    if (v == "analytic") {
      cfg.analytic = true;
    } else if (v == "empirical") {
      cfg.analytic = false;
    } else {
      throw std::invalid_argument("embedding must be analytic or empirical");
    }
  } else if (key == "embedding_samples") {
    cfg.embedding_samples = parse_u64(value);
  } else if (key == "embedding_seed") {
    cfg.embedding_seed = parse_u64(value);
  } else if (key == "methods") {
    cfg.methods = split_ws(value);
    for (const auto& m : cfg.methods) {
      if (!is_known_method(m)) throw std::invalid_argument("unknown method '" + m + "'");
    }
  } else if (key == "T" || key == "iterations") {
    cfg.iterations = parse_u64(value);
  } else if (key == "K_max" || key == "inner_rounds") {
    cfg.inner_rounds = parse_u64(value);
  } else if (key == "delta_pmp") {
    cfg.delta_pmp = parse_double(value);
  } else if (key == "delta_gcos") {
    cfg.delta_gcos = parse_double(value);
  } else if (key == "candidates" || key == "candidate_count") {
    cfg.candidate_count = parse_u64(value);
  } else if (key == "seeds") {
    cfg.seeds.clear();
    for (const auto& tok : split_ws(value)) cfg.seeds.push_back(parse_u64(tok));
  } else if (key == "out") {
    cfg.out_dir = trim(value);
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.methods.empty()) throw std::invalid_argument("config lists no methods");
  if (cfg.seeds.empty()) throw std::invalid_argument("config lists no seeds");
  if (cfg.candidate_count < 1) throw std::invalid_argument("candidates must be >= 1");
  if (cfg.iterations < 1) throw std::invalid_argument("T must be >= 1");
}

}  // namespace

std::vector<ExperimentConfig> parse_config_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<std::pair<std::string, std::string>> defaults;
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> sections;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": unterminated section header");
      }
      sections.emplace_back(trim(line.substr(1, line.size() - 2)),
                            std::vector<std::pair<std::string, std::string>>{});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (sections.empty()) {
      defaults.emplace_back(key, value);
    } else {
      sections.back().second.emplace_back(key, value);
    }
  }
  std::vector<ExperimentConfig> out;
  if (sections.empty()) sections.emplace_back("experiment", std::vector<std::pair<std::string, std::string>>{});
  for (const auto& [name, kvs] : sections) {
    ExperimentConfig cfg;
    cfg.name = name;
    for (const auto& [k, v] : defaults) apply_key(cfg, k, v);
    for (const auto& [k, v] : kvs) apply_key(cfg, k, v);
    validate_config(cfg);
    out.push_back(std::move(cfg));
  }
  return out;
}

std::vector<ExperimentConfig> parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  if (ec != std::errc()) return "nan";
  return std::string(buf, p);
}

void write_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path.string());
  out << kCsvHeader << '\n';
  for (const ResultRow& r : rows) {
    out << r.method << ',' << r.seed << ',' << r.t << ',' << r.node_count << ','
        << format_double(r.mmd) << ',' << format_double(r.wall_time_seconds) << ','
        << format_double(r.cos_theta) << ',' << format_double(r.gamma) << ','
        << r.inner_rounds << '\n';
  }
}

std::vector<ResultRow> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader) {
    throw std::invalid_argument("unexpected CSV header in " + path.string());
  }
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::string tok;
    std::istringstream ls(line);
    while (std::getline(ls, tok, ',')) f.push_back(tok);
    if (f.size() != 9) throw std::invalid_argument("bad CSV row: " + line);
    ResultRow r;
    r.method = f[0];
    r.seed = parse_u64(f[1]);
    r.t = parse_u64(f[2]);
    r.node_count = parse_u64(f[3]);
    r.mmd = parse_double(f[4]);
    r.wall_time_seconds = parse_double(f[5]);
    r.cos_theta = parse_double(f[6]);
    r.gamma = parse_double(f[7]);
    r.inner_rounds = parse_u64(f[8]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<Point> generate_candidates(const Domain& domain, MeasureKind measure,
                                       std::size_t m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("candidate count must be >= 1");
  return sample_measure(domain, measure, m, seed);
}

double fill_distance(const std::vector<Point>& nodes, const std::vector<Point>& probe) {
  if (nodes.empty()) throw std::invalid_argument("fill distance needs at least one node");
  double worst = 0.0;
  for (const Point& x : probe) {
    double nearest = std::numeric_limits<double>::infinity();
    for (const Point& n : nodes) {
      nearest = std::min(nearest, (x - n).norm());
    }
    worst = std::max(worst, nearest);
  }
  return worst;
}

double loglog_slope(const std::vector<ResultRow>& run_rows, SlopeAxis axis, double from,
                    double to) {
  std::vector<double> lx, ly;
  for (const ResultRow& r : run_rows) {
    const double x = axis == SlopeAxis::nodes ? static_cast<double>(r.node_count)
                                              : r.wall_time_seconds;
    if (x < from || x > to) continue;
    if (!(r.mmd > 0.0)) {
      throw std::invalid_argument("loglog_slope requires mmd > 0 on every row in range");
    }
    if (!(x > 0.0)) continue;
    lx.push_back(std::log(x));
    ly.push_back(std::log(r.mmd));
  }
  if (lx.size() < 5) {
    throw std::invalid_argument("loglog_slope needs at least five rows in range");
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("loglog_slope: degenerate x range");
  return sxy / sxx;
}

namespace {

struct RunJob {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<ResultRow> rows;
  std::string summary;
  std::string error;
};

std::string plot_script(const std::string& name) {
  std::ostringstream os;
  os << "#!/usr/bin/env python3\n"
     << "\"\"\"Log-log convergence plots for " << name << ".csv (same directory).\"\"\"\n"
     << "import csv\n"
     << "import collections\n"
     << "import os\n\n"
     << "import matplotlib\n"
     << "matplotlib.use(\"Agg\")\n"
     << "import matplotlib.pyplot as plt\n\n"
     << "here = os.path.dirname(os.path.abspath(__file__))\n"
     << "rows = list(csv.DictReader(open(os.path.join(here, \"" << name << ".csv\"))))\n"
     << "by_run = collections.defaultdict(list)\n"
     << "for r in rows:\n"
     << "    by_run[(r[\"method\"], r[\"seed\"])].append(r)\n\n"
     << "fig, axes = plt.subplots(1, 2, figsize=(11, 4.5))\n"
     << "colors = {}\n"
     << "palette = plt.rcParams[\"axes.prop_cycle\"].by_key()[\"color\"]\n"
     << "for (method, seed), rs in sorted(by_run.items()):\n"
     << "    rs.sort(key=lambda r: int(r[\"t\"]))\n"
     << "    if method not in colors:\n"
     << "        colors[method] = palette[len(colors) % len(palette)]\n"
     << "    label = method if seed == sorted(s for m, s in by_run if m == method)[0] else None\n"
     << "    nodes = [int(r[\"node_count\"]) for r in rs]\n"
     << "    mmd = [float(r[\"mmd\"]) for r in rs]\n"
     << "    secs = [float(r[\"wall_time_seconds\"]) for r in rs]\n"
     << "    keep = [i for i, v in enumerate(mmd) if v > 0]\n"
     << "    axes[0].loglog([nodes[i] for i in keep], [mmd[i] for i in keep],\n"
     << "                   color=colors[method], alpha=0.7, label=label)\n"
     << "    keep = [i for i in keep if secs[i] > 0]\n"
     << "    axes[1].loglog([secs[i] for i in keep], [mmd[i] for i in keep],\n"
     << "                   color=colors[method], alpha=0.7, label=label)\n"
     << "axes[0].set_xlabel(\"number of nodes\")\n"
     << "axes[0].set_ylabel(\"MMD\")\n"
     << "axes[1].set_xlabel(\"wall time [s]\")\n"
     << "axes[1].set_ylabel(\"MMD\")\n"
     << "for ax in axes:\n"
     << "    ax.grid(True, which=\"both\", alpha=0.3)\n"
     << "    ax.legend()\n"
     << "fig.suptitle(\"" << name << "\")\n"
     << "fig.tight_layout()\n"
     << "fig.savefig(os.path.join(here, \"" << name << ".png\"), dpi=150)\n"
     << "print(\"wrote\", os.path.join(here, \"" << name << ".png\"))\n";
  return os.str();
}

std::vector<ResultRow> rows_from_trace(const std::string& method, std::uint64_t seed,
                                       const IterationTrace& trace) {
  std::vector<ResultRow> rows;
  rows.reserve(trace.rows.size());
  for (const TraceRow& tr : trace.rows) {
    ResultRow r;
    r.method = method;
    r.seed = seed;
    r.t = tr.t;
    r.node_count = tr.node_count;
    r.mmd = std::sqrt(std::max(0.0, 2.0 * tr.epsilon));
    r.wall_time_seconds = tr.seconds;
    r.cos_theta = tr.cos_theta;
    r.gamma = tr.gamma;
    r.inner_rounds = tr.inner_rounds;
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

ExperimentOutput run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  validate_config(cfg);
  const Domain domain = cfg.domain();
  const Kernel kernel(cfg.kernel, domain, cfg.matern_rho);
  std::unique_ptr<MeanEmbedding> emb;
  if (cfg.analytic) {
    emb = analytic_embedding(kernel, cfg.measure);
  } else {
    emb = empirical_embedding(kernel, cfg.measure, cfg.embedding_samples, cfg.embedding_seed);
  }
  // force the O(m^2) part of an empirical embedding now; it is shared by all
  // runs and excluded from their wall times
  (void)emb->double_integral();

  std::vector<RunJob> jobs;
  for (const auto& method : cfg.methods) {
    for (auto seed : cfg.seeds) {
      RunJob j;
      j.method = method;
      j.seed = seed;
      jobs.push_back(std::move(j));
    }
  }

  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      RunJob& job = jobs[i];
      try {
        const auto candidates =
            generate_candidates(domain, cfg.measure, cfg.candidate_count, job.seed);
        const HerdingConfig hc = method_config(cfg, job.method);
        const HerdingResult res = herd(hc, kernel, *emb, candidates);
        job.rows = rows_from_trace(job.method, job.seed, res.trace);
        const auto probe = sample_measure(domain, MeasureKind::uniform, 10000,
                                          fnv1a64(cfg.name) ^ 0x66696c6cULL);
        std::ostringstream s;
        s << "run method=" << job.method << " seed=" << job.seed << " rows="
          << job.rows.size() << " final_mmd=" << format_double(job.rows.back().mmd)
          << " final_nodes=" << res.measure.size() << " distinct_nodes="
          << job.rows.back().node_count << " fill_distance="
          << format_double(fill_distance(res.measure.nodes(), probe)) << " kernel_evals="
          << res.kernel_evals << " stop=\"" << res.trace.stop_reason << "\"";
        job.summary = s.str();
      } catch (const std::exception& e) {
        job.error = e.what();
        if (opts.log) {
          std::lock_guard<std::mutex> lk(log_mutex);
          *opts.log << "[run " << job.method << "/" << job.seed << " failed] " << e.what()
                    << '\n';
        }
      }
    }
  };

  unsigned n_threads = opts.threads > 0 ? static_cast<unsigned>(opts.threads)
                                        : std::thread::hardware_concurrency();
  n_threads = std::max(1u, std::min<unsigned>(n_threads, jobs.size()));
  std::vector<std::thread> pool;
  for (unsigned i = 0; i + 1 < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  ExperimentOutput out;
  for (const RunJob& job : jobs) {
    if (!job.error.empty()) {
      out.failed_runs.push_back(job.method + "/" + std::to_string(job.seed) + ": " + job.error);
      continue;
    }
    out.rows.insert(out.rows.end(), job.rows.begin(), job.rows.end());
  }

  if (opts.write_files) {
    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    out.csv_path = dir / (cfg.name + ".csv");
    out.manifest_path = dir / (cfg.name + ".manifest.txt");
    out.plot_path = dir / (cfg.name + "_plot.py");
    write_csv(out.csv_path, out.rows);

    std::ofstream man(out.manifest_path);
    char hashbuf[32];
    std::snprintf(hashbuf, sizeof(hashbuf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(cfg.canonical_text())));
    man << "experiment = " << cfg.name << "\nconfig_hash = " << hashbuf << "\nseeds =";
    for (auto s : cfg.seeds) man << ' ' << s;
    man << "\nmethods =";
    for (const auto& m : cfg.methods) man << ' ' << m;
    man << '\n';
    for (const RunJob& job : jobs) {
      if (job.error.empty()) {
        man << job.summary << '\n';
      } else {
        man << "run method=" << job.method << " seed=" << job.seed << " FAILED: " << job.error
            << '\n';
      }
    }

    std::ofstream plot(out.plot_path);
    plot << plot_script(cfg.name);
  }
  return out;
}

int run_invariant_suite(std::ostream& os) {
  int failures = 0;
  auto report = [&](const std::string& name, bool ok, const std::string& detail = "") {
    os << (ok ? "[ok]   " : "[FAIL] ") << name;
    if (!detail.empty()) os << "  (" << detail << ")";
    os << '\n';
    if (!ok) ++failures;
  };

  ExperimentConfig cfg;
  cfg.name = "invariants";
  cfg.kernel = KernelKind::gaussian;
  cfg.dim = 2;
  cfg.measure = MeasureKind::trunc_gaussian;
  cfg.analytic = true;
  cfg.methods = {"eq_weight", "linesearch", "fc", "pmp", "gcos", "fc_pmp", "fc_gcos"};
  cfg.iterations = 25;
  cfg.inner_rounds = 6;
  cfg.candidate_count = 400;
  cfg.seeds = {7};

  const Domain domain = cfg.domain();
  const Kernel kernel(cfg.kernel, domain);
  const auto emb = analytic_embedding(kernel, cfg.measure);
  const auto candidates = generate_candidates(domain, cfg.measure, cfg.candidate_count, 7);

  for (const auto& method : cfg.methods) {
    HerdingConfig hc = method_config(cfg, method);
    if (hc.variant == Variant::accelerated &&
        (hc.approximator == Approximator::gcos || hc.approximator == Approximator::fc_gcos)) {
      hc.delta = 0.0;
    }
    const HerdingResult res = herd(hc, kernel, *emb, candidates);
    bool simplex_ok = true;
    bool monotone_ok = true;
    double prev_eps = std::numeric_limits<double>::infinity();
    for (const TraceRow& r : res.trace.rows) {
      simplex_ok = simplex_ok && r.min_weight >= -1e-12 && std::abs(r.weight_sum - 1.0) <= 1e-10;
      monotone_ok = monotone_ok && r.epsilon <= prev_eps + 1e-12;
      prev_eps = r.epsilon;
    }
    report(method + ": weights stay on the simplex", simplex_ok);
    if (method != "eq_weight") {
      report(method + ": epsilon non-increasing", monotone_ok);
    }
    if (method == "gcos" || method == "fc_gcos") {
      bool cos_ok = true;
      for (const auto& rounds : res.trace.inner_cos) {
        for (std::size_t k = 1; k < rounds.size(); ++k) {
          cos_ok = cos_ok && rounds[k] >= rounds[k - 1] - 1e-10;
        }
      }
      report(method + ": inner cos non-decreasing", cos_ok);
    }
    if (method == "pmp" || method == "fc_pmp") {
      bool res_ok = true;
      for (const auto& rounds : res.trace.inner_residuals) {
        for (std::size_t k = 1; k < rounds.size(); ++k) {
          res_ok = res_ok && rounds[k] <= rounds[k - 1] + 1e-12;
        }
      }
      report(method + ": pursuit residual non-increasing", res_ok);
    }
  }

  // small random QP instances against their optimality certificates
  Rng rng(99);
  bool qp_ok = true;
  for (int rep = 0; rep < 5; ++rep) {
    const int k = 5;
    Eigen::MatrixXd A(k, k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) A(i, j) = rng.normal();
    }
    QuadraticProblem prob{A * A.transpose() + 0.1 * Eigen::MatrixXd::Identity(k, k),
                          Eigen::VectorXd::NullaryExpr(k, [&](Eigen::Index) { return rng.normal(); })};
    const Eigen::VectorXd c = nnls(prob);
    qp_ok = qp_ok && c.minCoeff() >= 0.0;
    const Eigen::VectorXd w = simplex_qp(prob);
    qp_ok = qp_ok && w.minCoeff() >= 0.0 && std::abs(w.sum() - 1.0) <= 1e-12;
  }
  report("nnls/simplex_qp reach their certificates on random instances", qp_ok);

  return failures;
}

}  // namespace kherd
