#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "kherd/kernels.hpp"
#include "kherd/measure.hpp"

namespace kherd {

struct Direction;

// Inner-product engine for one optimization run. Holds the iterate
//   nu = sum_a w_a K(x_a, .)
// and reduces every RKHS inner product the drivers and the gradient
// approximators need to cached scalars:
//   cand_z[i]  = mu_K(y_i)          cand_nu[i] = nu(y_i)
//   s1 = <mu_K, nu>                 s2 = <nu, nu>
// so that p(i) = <mu_K - nu, K(y_i,.) - nu> and the atom norms come out in
// O(1) per candidate. A step touches each candidate once per added atom.
class IterateState {
 public:
  IterateState(const Kernel& kernel, const MeanEmbedding& emb,
               const std::vector<Point>& candidates, bool keep_node_columns = false);
  // seed from an existing measure (costs O(m * nodes) kernel evaluations)
  IterateState(const Kernel& kernel, const MeanEmbedding& emb,
               const std::vector<Point>& candidates, const DiscreteMeasure& start,
               bool keep_node_columns = false);

  std::size_t candidate_count() const { return cands_->size(); }
  const Point& candidate(std::size_t i) const { return (*cands_)[i]; }
  const Kernel& kernel() const { return *kernel_; }
  const MeanEmbedding& embedding() const { return *emb_; }

  double double_integral() const { return Z_; }
  double s1() const { return S1_; }
  double s2() const { return S2_; }
  double epsilon() const { return 0.5 * (Z_ - 2.0 * S1_ + S2_); }
  double residual_norm2() const { return Z_ - 2.0 * S1_ + S2_; }

  double cand_z(std::size_t i) const { return cand_z_[i]; }
  double cand_nu(std::size_t i) const { return cand_nu_[i]; }
  // <mu_K - nu, K(y_i,.) - nu>
  double p(std::size_t i) const { return cand_z_[i] - cand_nu_[i] - S1_ + S2_; }
  // ||K(y_i,.) - nu||^2
  double atom_norm2(std::size_t i) const {
    return kernel_->diag() - 2.0 * cand_nu_[i] + S2_;
  }

  // K(y_ci, y_j) for every candidate j; counted kernel evaluations
  void eval_column(std::size_t ci, std::span<double> out);
  std::uint64_t kernel_evals() const { return kernel_evals_; }

  void init_single_atom(std::size_t cand_idx);
  // nu <- nu + gamma * (d / Lambda); atoms are merged into the rule
  void apply_direction(const Direction& dir, double gamma);

  // ---- active rule (used by the fully-corrective driver)
  std::size_t active_count() const { return active_.size(); }
  std::span<const double> active_weights() const { return weights_; }
  Eigen::MatrixXd active_gram() const;
  Eigen::VectorXd active_z() const;
  // p at the a-th active node
  double active_p(std::size_t a) const;
  // full reweight; requires keep_node_columns so cand_nu can be rebuilt
  void set_active_weights(std::span<const double> w);
  void prune_active(double tol);

  std::size_t distinct_selected() const { return pool_.size(); }
  double min_weight() const;
  double weight_sum() const;
  DiscreteMeasure snapshot() const;

  // exact S1/S2 from the node pool; counters the drift of incremental updates
  void recompute_scalars();

 private:
  void init_candidates();
  std::size_t ensure_pool_node(std::size_t cand_idx, const double* column);
  std::size_t ensure_active(std::size_t pool_idx);
  void refresh_cand_nu_from_columns();

  const Kernel* kernel_;
  const MeanEmbedding* emb_;
  const std::vector<Point>* cands_;
  bool keep_node_columns_;

  double Z_ = 0.0, S1_ = 0.0, S2_ = 0.0;
  std::vector<double> cand_z_, cand_nu_;

  GramCache pool_;                          // every node ever selected
  std::vector<std::ptrdiff_t> pool_cand_;   // candidate index per pool node, -1 if foreign
  std::vector<std::ptrdiff_t> cand_pool_;   // inverse map
  std::vector<std::ptrdiff_t> pool_active_; // active slot per pool node, -1 if inactive
  std::vector<std::size_t> active_;         // pool indices carrying weight
  std::vector<double> weights_;

  Eigen::MatrixXd node_cols_;  // m x pool, only when keep_node_columns_
  std::uint64_t kernel_evals_ = 0;
  int updates_since_exact_ = 0;
};

}  // namespace kherd
