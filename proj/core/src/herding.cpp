#include "kherd/herding.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "kherd/errors.hpp"
#include "kherd/simplexopt.hpp"

namespace kherd {

namespace {

constexpr double kEpsilonFloor = 1e-14;
constexpr double kPruneTol = 1e-10;

double now_seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void validate(const HerdingConfig& cfg) {
  if (cfg.max_iterations < 1) throw std::invalid_argument("T must be >= 1");
  if (cfg.inner_rounds < 1) throw std::invalid_argument("K_max must be >= 1");
  if (cfg.variant == Variant::accelerated) {
    const bool cos_rule =
        cfg.approximator == Approximator::gcos || cfg.approximator == Approximator::fc_gcos;
    if (cos_rule && cfg.delta < 0.0) {
      throw std::invalid_argument("gcos/fc_gcos require delta >= 0");
    }
    if (!cos_rule && !(cfg.delta < 1.0)) {
      throw std::invalid_argument("pmp/fc_pmp require delta < 1");
    }
  }
}

Direction approximate_gradient(const HerdingConfig& cfg, IterateState& state) {
  switch (cfg.approximator) {
    case Approximator::pmp:
      return pmp(state, cfg.inner_rounds, cfg.delta);
    case Approximator::gcos:
      return gcos(state, cfg.inner_rounds, cfg.delta);
    case Approximator::fc_pmp:
      return fc_pmp(state, cfg.inner_rounds, cfg.delta);
    case Approximator::fc_gcos:
      return fc_gcos(state, cfg.inner_rounds, cfg.delta);
  }
  return Direction{};
}

// residual of the simplex-optimality conditions over the active support,
// straight from the engine's cached inner products
double active_orthogonality_residual(IterateState& state) {
  double worst = 0.0;
  const auto w = state.active_weights();
  for (std::size_t a = 0; a < state.active_count(); ++a) {
    if (w[a] <= 1e-8) continue;
    worst = std::max(worst, std::abs(state.active_p(a)));
  }
  return worst;
}

}  // namespace

double line_search_gamma(double inner_resid_dir, double dir_norm2) {
  if (!(dir_norm2 > 0.0)) {
    throw std::invalid_argument("degenerate direction: zero norm");
  }
  const double g = inner_resid_dir / dir_norm2;
  return std::clamp(g, 0.0, 1.0);
}

double line_search_step(const IterateState& state, const Direction& d) {
  (void)state;
  if (d.empty()) throw std::invalid_argument("degenerate direction: zero norm");
  // <mu - nu, g> / ||g||^2 with g = d / Lambda
  return line_search_gamma(d.q * d.lambda, d.norm2);
}

std::size_t argmax_vertex_index(const IterateState& state) {
  const std::size_t m = state.candidate_count();
  std::size_t best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    const double v = state.p(i);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  return best;
}

Point argmax_vertex(const Kernel& kernel, const MeanEmbedding& emb,
                    const DiscreteMeasure& nu, const std::vector<Point>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("candidate set must be nonempty");
  GramCache cache = GramCache::from_measure(kernel, emb, nu);
  std::size_t best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double v = inner_residual_vs_atom(emb, nu, cache, candidates[i]);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  return candidates[best];
}

HerdingResult herd(const HerdingConfig& cfg, const Kernel& kernel,
                   const MeanEmbedding& emb, const std::vector<Point>& candidates) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const bool fc = cfg.variant == Variant::fully_corrective;
  IterateState state(kernel, emb, candidates, /*keep_node_columns=*/fc);

  // start from the strongest single atom
  std::size_t init = 0;
  double best_z = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (state.cand_z(i) > best_z) {
      best_z = state.cand_z(i);
      init = i;
    }
  }
  state.init_single_atom(init);

  HerdingResult out;
  IterationTrace& trace = out.trace;
  std::string stop;

  for (std::size_t t = 1; t <= cfg.max_iterations; ++t) {
    if (fc) state.recompute_scalars();
    TraceRow row;
    row.t = t;
    row.epsilon = state.epsilon();
    row.node_count = state.distinct_selected();
    row.min_weight = state.min_weight();
    row.weight_sum = state.weight_sum();
    row.cos_theta = std::numeric_limits<double>::quiet_NaN();
    row.gamma = std::numeric_limits<double>::quiet_NaN();
    row.fc_residual = fc ? active_orthogonality_residual(state)
                         : std::numeric_limits<double>::quiet_NaN();
    row.seconds = now_seconds(t0);

    bool stopping = false;
    if (t == cfg.max_iterations) {
      stop = "max iterations";
      stopping = true;
    } else if (row.epsilon < kEpsilonFloor) {
      stop = "epsilon below floor";
      trace.converged = true;
      stopping = true;
    }

    Direction dir;
    double gamma = 0.0;
    if (!stopping) {
      if (cfg.variant == Variant::accelerated) {
        dir = approximate_gradient(cfg, state);
      } else {
        dir = single_atom_direction(state, argmax_vertex_index(state));
      }
      if (dir.empty() || !(dir.norm2 > 0.0)) {
        stop = "approximator returned a zero direction";
        trace.converged = true;
        stopping = true;
      } else {
        gamma = cfg.variant == Variant::eq_weight
                    ? 1.0 / static_cast<double>(t + 1)
                    : line_search_step(state, dir);
        if (cfg.variant != Variant::eq_weight && gamma <= 0.0) {
          // the optimum along g_t is the current iterate; no progress possible
          stop = "line search returned zero step";
          trace.converged = true;
          stopping = true;
        }
      }
    }

    if (stopping) {
      trace.rows.push_back(row);
      break;
    }

    row.cos_theta = step_cos(state.residual_norm2(), dir);
    row.gamma = gamma;
    row.gamma_clamped = gamma == 1.0;
    row.inner_rounds = static_cast<std::size_t>(dir.rounds);
    if (cfg.record_inner) {
      trace.inner_cos.push_back(dir.round_cos);
      trace.inner_residuals.push_back(dir.residual_norms);
      trace.inner_evals.push_back(dir.round_evals);
    }
    trace.rows.push_back(row);

    state.apply_direction(dir, gamma);
    if (fc) {
      QuadraticProblem prob{state.active_gram(), state.active_z()};
      SolveOptions opts;
      const auto cur = state.active_weights();
      opts.warm_start = Eigen::Map<const Eigen::VectorXd>(cur.data(), cur.size());
      const Eigen::VectorXd w = simplex_qp(prob, opts);
      state.set_active_weights(std::span<const double>(w.data(), w.size()));
      state.prune_active(kPruneTol);
    }
  }

  if (stop.empty()) stop = "max iterations";
  trace.stop_reason = stop;
  out.measure = state.snapshot();
  out.kernel_evals = state.kernel_evals();
  return out;
}

HerdingResult herd_vanilla(const HerdingConfig& cfg, const Kernel& kernel,
                           const MeanEmbedding& emb, const std::vector<Point>& candidates) {
  if (cfg.variant != Variant::eq_weight && cfg.variant != Variant::linesearch) {
    throw std::invalid_argument("herd_vanilla expects eq_weight or linesearch");
  }
  return herd(cfg, kernel, emb, candidates);
}

HerdingResult herd_fully_corrective(const HerdingConfig& cfg, const Kernel& kernel,
                                    const MeanEmbedding& emb,
                                    const std::vector<Point>& candidates) {
  if (cfg.variant != Variant::fully_corrective) {
    throw std::invalid_argument("herd_fully_corrective expects the fully_corrective variant");
  }
  return herd(cfg, kernel, emb, candidates);
}

HerdingResult herd_accelerated(const HerdingConfig& cfg, const Kernel& kernel,
                               const MeanEmbedding& emb,
                               const std::vector<Point>& candidates) {
  if (cfg.variant != Variant::accelerated) {
    throw std::invalid_argument("herd_accelerated expects the accelerated variant");
  }
  return herd(cfg, kernel, emb, candidates);
}

}  // namespace kherd
