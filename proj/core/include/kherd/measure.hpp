#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <vector>

#include "kherd/kernels.hpp"

namespace kherd {

constexpr double kNodeMergeTol = 1e-12;

// Nodes with real weights. Atoms closer than kNodeMergeTol are one node; a
// repeated insertion adds to the existing weight instead of growing the rule.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;
  DiscreteMeasure(std::vector<Point> nodes, std::vector<double> weights);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<Point>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  const Point& node(std::size_t i) const { return nodes_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }

  std::size_t add_atom(const Point& x, double w);
  void set_weight(std::size_t i, double w) { weights_[i] = w; }
  void scale_weights(double s);
  void prune_below(double tol);

  std::optional<std::size_t> find(const Point& x, double tol = kNodeMergeTol) const;
  double weight_sum() const;
  double min_weight() const;

 private:
  std::vector<Point> nodes_;
  std::vector<double> weights_;
};

// Write-once caches of the node Gram matrix K(x_i, x_j) and the embedding
// values z_i = mu_K(x_i), plus the incrementally maintained self-energy
// w^T K w of the weighted rule. Grows append-only.
class GramCache {
 public:
  GramCache(const Kernel& kernel, const MeanEmbedding& emb);

  std::size_t size() const { return n_; }
  const Kernel& kernel() const { return *kernel_; }

  // evaluates the new row of the Gram matrix and mu_K at x
  std::size_t add_node(const Point& x);
  // trusted variant: row values against existing nodes plus K(x,x) and mu_K(x)
  std::size_t add_node_precomputed(const Point& x, std::span<const double> row,
                                   double diag, double z);

  double gram(std::size_t i, std::size_t j) const { return gram_(i, j); }
  double z(std::size_t i) const { return z_[i]; }
  const Point& node(std::size_t i) const { return nodes_[i]; }
  Eigen::Ref<const Eigen::MatrixXd> gram_matrix() const {
    return gram_.topLeftCorner(n_, n_);
  }
  Eigen::Ref<const Eigen::VectorXd> z_vector() const { return z_.head(n_); }

  // exact w^T K w over the leading size() nodes
  double self_energy_exact(std::span<const double> w) const;
  // exact w^T K w over an index subset of the cached nodes
  double quad_form(std::span<const std::size_t> idx, std::span<const double> w) const;

  double self_energy = 0.0;  // maintained by the driving loop

  static GramCache from_measure(const Kernel& kernel, const MeanEmbedding& emb,
                                const DiscreteMeasure& m);

 private:
  void grow(std::size_t need);
  const Kernel* kernel_;
  const MeanEmbedding* emb_;
  std::vector<Point> nodes_;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd z_;
  std::size_t n_ = 0;
};

// Squared worst-case error of the rule against mu_K:
//   <mu_K, mu_K> - 2 sum_i w_i z_i + sum_ij w_i w_j K(x_i, x_j).
// The cache must hold exactly the measure's nodes, in order.
double mmd_squared(const DiscreteMeasure& m, const MeanEmbedding& emb,
                   const GramCache& cache);

// <mu_K - nu, K(y,.) - nu> expanded into kernel and mu_K evaluations.
double inner_residual_vs_atom(const MeanEmbedding& emb, const DiscreteMeasure& nu,
                              const GramCache& cache, const Point& y);

struct OptimalWeights {
  Eigen::VectorXd weights;
  double worst_case_error2 = 0.0;  // iint K dmu dmu - z^T K^{-1} z
  bool jitter_applied = false;
};

// Unconstrained interpolation weights K_X w = z_X. Adds diagonal jitter
// 1e-12 * trace/n once if the Cholesky factorization fails; a Gram that stays
// numerically singular raises ConditioningError naming the closest node pair.
OptimalWeights optimal_weights(const std::vector<Point>& nodes, const Kernel& kernel,
                               const MeanEmbedding& emb);

// First-order optimality residual of simplex-constrained weights:
//   max over the support {j : w_j > 1e-8} of |<mu_K - nu, K(x_j,.) - nu>|.
// Zero at an exact simplex optimum. Weights must lie on the simplex.
double fc_orthogonality_residual(const DiscreteMeasure& m, const MeanEmbedding& emb,
                                 const GramCache& cache);

}  // namespace kherd
