#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "kherd/kernels.hpp"
#include "kherd/measure.hpp"
#include "kherd/state.hpp"

namespace kherd {

// Conic combination d = sum_i c_i (K(y_i,.) - nu) approximating the negative
// gradient mu_K - nu. The returned step direction is g = d / Lambda with
// Lambda = sum_i c_i, so that nu + g is again a convex combination of atoms.
struct Direction {
  std::vector<std::size_t> atoms;  // candidate indices, unique
  std::vector<double> coeffs;      // c_i >= 0, parallel to atoms
  double lambda = 0.0;             // sum of coefficients
  double q = 0.0;                  // <mu_K - nu, d>
  double norm2 = 0.0;              // ||d||^2
  Eigen::MatrixXd atom_kernel;     // K(y_i, y_j) between atoms
  Eigen::MatrixXd cand_cols;       // K(y_cand, y_atom) for every candidate
  int rounds = 0;                  // inner rounds used (K_t)

  // per-round diagnostics
  std::vector<double> round_cos;          // cos theta after each accepted round
  std::vector<double> round_cos_pre;      // before the refit (fully corrective only)
  std::vector<double> residual_norms;     // ||r_k||, matching-pursuit family
  std::vector<std::uint64_t> round_evals; // kernel evaluations per round
  // matching-pursuit ledger for replaying the Lambda bookkeeping:
  // (+1, lambda_k, .) forward step, (-1, lambda_k, ||d_k||) backward step
  struct PursuitEvent {
    int type;
    double lambda_k;
    double d_norm;
  };
  std::vector<PursuitEvent> events;

  bool empty() const { return atoms.empty() || !(lambda > 0.0); }
};

// inner / (||f1|| ||f2||) clamped to [-1, 1]; -1 when either norm vanishes
double align(double f1_norm2, double f2_norm2, double inner);

// Scalars describing one trial atom y against the current direction d:
//   p = <mu_K - nu, K(y,.) - nu>      q = <mu_K - nu, d>
//   alpha = ||K(y,.) - nu||^2         beta = <K(y,.) - nu, d>
//   gamma = ||d||^2
// The objective along c >= 0 is g(c) = (c p + q) / sqrt(alpha c^2 + 2 beta c + gamma).
struct CosStepScalars {
  double p, q, alpha, beta, gamma;
};

// Stationary point c* = (q beta - p gamma)/(p beta - q alpha) of g(c), kept
// only when c* > 0 and c* p + q >= 0; otherwise the maximum over c >= 0 sits
// at c = 0 and the atom contributes nothing. Returns {c*, g(c*)}.
std::optional<std::pair<double, double>> gcos_closed_form(const CosStepScalars& s);

// Trivial one-atom direction toward candidate ci; the vanilla herding step.
Direction single_atom_direction(IterateState& state, std::size_t ci);

// Positive matching pursuit: greedy conic approximation of mu_K - nu with a
// backward (shrinking) step option. delta < 1; rounds stop when the align
// gain drops to delta or K_max is reached.
Direction pmp(IterateState& state, std::size_t k_max, double delta);

// Greedy cos maximization: each round adds the atom and coefficient with the
// best closed-form g value; cos theta never decreases across accepted rounds.
// Requires delta >= 0.
Direction gcos(IterateState& state, std::size_t k_max, double delta);

// As gcos, but all coefficients are re-fit by nonnegative least squares each
// round before the acceptance test; zero-coefficient atoms are dropped.
Direction fc_gcos(IterateState& state, std::size_t k_max, double delta);

// As pmp with the same nonnegative least-squares refit per accepted round.
Direction fc_pmp(IterateState& state, std::size_t k_max, double delta);

// Contract-level entry points that build their own engine state from an
// arbitrary iterate. Cost O(m * nodes) on entry.
Direction pmp(const Kernel& k, const MeanEmbedding& emb, const DiscreteMeasure& nu,
              const std::vector<Point>& candidates, std::size_t k_max, double delta);
Direction gcos(const Kernel& k, const MeanEmbedding& emb, const DiscreteMeasure& nu,
               const std::vector<Point>& candidates, std::size_t k_max, double delta);
Direction fc_gcos(const Kernel& k, const MeanEmbedding& emb, const DiscreteMeasure& nu,
                  const std::vector<Point>& candidates, std::size_t k_max, double delta);
Direction fc_pmp(const Kernel& k, const MeanEmbedding& emb, const DiscreteMeasure& nu,
                 const std::vector<Point>& candidates, std::size_t k_max, double delta);

}  // namespace kherd
