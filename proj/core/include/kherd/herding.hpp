#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kherd/gradapprox.hpp"
#include "kherd/kernels.hpp"
#include "kherd/measure.hpp"
#include "kherd/state.hpp"

namespace kherd {

enum class Variant { eq_weight, linesearch, fully_corrective, accelerated };
enum class Approximator { pmp, gcos, fc_pmp, fc_gcos };

struct HerdingConfig {
  Variant variant = Variant::linesearch;
  Approximator approximator = Approximator::gcos;  // accelerated only
  std::size_t max_iterations = 100;                // outer iterations T
  std::size_t inner_rounds = 10;                   // K_max
  double delta = 0.0;                              // truncation parameter
  bool record_inner = true;                        // keep per-round diagnostics
};

// One row per iterate nu_t; the step fields describe the move from nu_t to
// nu_{t+1} and are NaN/0 on the final row.
struct TraceRow {
  std::size_t t = 0;
  double epsilon = 0.0;        // 0.5 ||mu_K - nu_t||^2
  std::size_t node_count = 0;  // distinct nodes selected so far
  double cos_theta = 0.0;      // angle between mu_K - nu_t and g_t
  double gamma = 0.0;          // step size
  bool gamma_clamped = false;  // gamma hit 1; the contraction identity is off
  std::size_t inner_rounds = 0;
  double seconds = 0.0;        // cumulative wall time when nu_t was reached
  double min_weight = 0.0;
  double weight_sum = 0.0;
  double fc_residual = 0.0;  // orthogonality residual (fully corrective only)
};

struct IterationTrace {
  std::vector<TraceRow> rows;
  // per outer iteration when record_inner is set:
  std::vector<std::vector<double>> inner_cos;        // cos theta_{t,k} per accepted round
  std::vector<std::vector<double>> inner_residuals;  // ||r_k|| (matching pursuit)
  std::vector<std::vector<std::uint64_t>> inner_evals;
  bool converged = false;
  std::string stop_reason;
};

struct HerdingResult {
  DiscreteMeasure measure;
  IterationTrace trace;
  std::uint64_t kernel_evals = 0;
};

// cos angle between the residual mu_K - nu_t and the step direction
inline double step_cos(double residual_norm2, const Direction& d) {
  return align(residual_norm2, d.norm2, d.q);
}

// Exact line search min_{0<=g<=1} ||nu + g (d/Lambda) - mu_K||^2 from the
// two scalars <mu_K - nu, g> and ||g||^2. Zero-norm directions are an error;
// the caller treats them as convergence.
double line_search_gamma(double inner_resid_dir, double dir_norm2);
double line_search_step(const IterateState& state, const Direction& d);

// Candidate maximizing <mu_K - nu, K(y,.) - nu>; ties break to the lowest
// index. Contract-level variant evaluates the expansion from scratch.
std::size_t argmax_vertex_index(const IterateState& state);
Point argmax_vertex(const Kernel& kernel, const MeanEmbedding& emb,
                    const DiscreteMeasure& nu, const std::vector<Point>& candidates);

// Unified driver; dispatches on config.variant.
HerdingResult herd(const HerdingConfig& cfg, const Kernel& kernel,
                   const MeanEmbedding& emb, const std::vector<Point>& candidates);

// Named entry points with the variant pinned.
HerdingResult herd_vanilla(const HerdingConfig& cfg, const Kernel& kernel,
                           const MeanEmbedding& emb, const std::vector<Point>& candidates);
HerdingResult herd_fully_corrective(const HerdingConfig& cfg, const Kernel& kernel,
                                    const MeanEmbedding& emb,
                                    const std::vector<Point>& candidates);
HerdingResult herd_accelerated(const HerdingConfig& cfg, const Kernel& kernel,
                               const MeanEmbedding& emb,
                               const std::vector<Point>& candidates);

}  // namespace kherd
