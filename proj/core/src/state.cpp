#include "kherd/state.hpp"

#include <cmath>
#include <stdexcept>

#include "kherd/errors.hpp"
#include "kherd/gradapprox.hpp"

namespace kherd {

IterateState::IterateState(const Kernel& kernel, const MeanEmbedding& emb,
                           const std::vector<Point>& candidates, bool keep_node_columns)
    : kernel_(&kernel),
      emb_(&emb),
      cands_(&candidates),
      keep_node_columns_(keep_node_columns),
      pool_(kernel, emb) {
  init_candidates();
}

IterateState::IterateState(const Kernel& kernel, const MeanEmbedding& emb,
                           const std::vector<Point>& candidates,
                           const DiscreteMeasure& start, bool keep_node_columns)
    : IterateState(kernel, emb, candidates, keep_node_columns) {
  const std::size_t m = candidates.size();
  for (std::size_t a = 0; a < start.size(); ++a) {
    const Point& x = start.node(a);
    // adopt candidate identity when the node matches one
    std::ptrdiff_t ci = -1;
    for (std::size_t i = 0; i < m; ++i) {
      if (((*cands_)[i] - x).norm() <= kNodeMergeTol) {
        ci = static_cast<std::ptrdiff_t>(i);
        break;
      }
    }
    const std::size_t pi = pool_.add_node(x);
    pool_cand_.push_back(ci);
    if (ci >= 0) cand_pool_[ci] = static_cast<std::ptrdiff_t>(pi);
    pool_active_.push_back(static_cast<std::ptrdiff_t>(active_.size()));
    active_.push_back(pi);
    weights_.push_back(start.weight(a));
    if (keep_node_columns_) {
      if (static_cast<std::size_t>(node_cols_.cols()) <= pi) {
        node_cols_.conservativeResize(m, std::max<Eigen::Index>(16, node_cols_.cols() * 2));
      }
      for (std::size_t i = 0; i < m; ++i) {
        node_cols_(i, pi) = kernel_->eval_unchecked(x, (*cands_)[i]);
      }
      kernel_evals_ += m;
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t a = 0; a < active_.size(); ++a) {
      acc += weights_[a] * kernel_->eval_unchecked(pool_.node(active_[a]), (*cands_)[i]);
    }
    cand_nu_[i] = acc;
  }
  kernel_evals_ += m * active_.size();
  recompute_scalars();
}

void IterateState::init_candidates() {
  const std::size_t m = cands_->size();
  if (m == 0) throw std::invalid_argument("candidate set must be nonempty");
  for (const Point& y : *cands_) kernel_->check_in_domain(y);
  Z_ = emb_->double_integral();
  cand_z_.resize(m);
  for (std::size_t i = 0; i < m; ++i) cand_z_[i] = (*emb_)((*cands_)[i]);
  cand_nu_.assign(m, 0.0);
  cand_pool_.assign(m, -1);
  if (keep_node_columns_) node_cols_.resize(m, 16);
}

void IterateState::eval_column(std::size_t ci, std::span<double> out) {
  const std::size_t m = cands_->size();
  if (out.size() != m) throw std::invalid_argument("column span size mismatch");
  const Point& x = (*cands_)[ci];
  for (std::size_t i = 0; i < m; ++i) out[i] = kernel_->eval_unchecked(x, (*cands_)[i]);
  kernel_evals_ += m;
}

std::size_t IterateState::ensure_pool_node(std::size_t cand_idx, const double* column) {
  if (cand_pool_[cand_idx] >= 0) return static_cast<std::size_t>(cand_pool_[cand_idx]);
  const std::size_t n = pool_.size();
  std::vector<double> row(n);
  for (std::size_t q = 0; q < n; ++q) {
    const std::ptrdiff_t qc = pool_cand_[q];
    if (column != nullptr && qc >= 0) {
      row[q] = column[qc];
    } else {
      row[q] = kernel_->eval_unchecked((*cands_)[cand_idx], pool_.node(q));
      ++kernel_evals_;
    }
  }
  const std::size_t pi =
      pool_.add_node_precomputed((*cands_)[cand_idx], row, kernel_->diag(), cand_z_[cand_idx]);
  pool_cand_.push_back(static_cast<std::ptrdiff_t>(cand_idx));
  cand_pool_[cand_idx] = static_cast<std::ptrdiff_t>(pi);
  pool_active_.push_back(-1);
  if (keep_node_columns_) {
    const std::size_t m = cands_->size();
    if (node_cols_.cols() <= static_cast<Eigen::Index>(pi)) {
      node_cols_.conservativeResize(m, node_cols_.cols() * 2);
    }
    if (column != nullptr) {
      for (std::size_t i = 0; i < m; ++i) node_cols_(i, pi) = column[i];
    } else {
      for (std::size_t i = 0; i < m; ++i) {
        node_cols_(i, pi) = kernel_->eval_unchecked((*cands_)[cand_idx], (*cands_)[i]);
      }
      kernel_evals_ += m;
    }
  }
  return pi;
}

std::size_t IterateState::ensure_active(std::size_t pool_idx) {
  if (pool_active_[pool_idx] >= 0) return static_cast<std::size_t>(pool_active_[pool_idx]);
  pool_active_[pool_idx] = static_cast<std::ptrdiff_t>(active_.size());
  active_.push_back(pool_idx);
  weights_.push_back(0.0);
  return active_.size() - 1;
}

void IterateState::init_single_atom(std::size_t cand_idx) {
  if (!active_.empty()) throw InvariantError("iterate already initialized");
  const std::size_t m = cands_->size();
  std::vector<double> col(m);
  eval_column(cand_idx, col);
  const std::size_t pi = ensure_pool_node(cand_idx, col.data());
  const std::size_t a = ensure_active(pi);
  weights_[a] = 1.0;
  cand_nu_ = col;
  S1_ = cand_z_[cand_idx];
  S2_ = kernel_->diag();
  pool_.self_energy = S2_;
}

void IterateState::apply_direction(const Direction& dir, double gamma) {
  if (dir.empty()) throw std::invalid_argument("cannot step along an empty direction");
  const std::size_t m = cands_->size();
  const std::size_t k = dir.atoms.size();
  const double lam = dir.lambda;
  const double step = gamma / lam;

  // mixed scalars against the *current* iterate, before any mutation
  double z_mix = 0.0, nu_mix = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    z_mix += dir.coeffs[j] * cand_z_[dir.atoms[j]];
    nu_mix += dir.coeffs[j] * cand_nu_[dir.atoms[j]];
  }
  Eigen::Map<const Eigen::VectorXd> c(dir.coeffs.data(), k);
  const double g_mix = c.dot(dir.atom_kernel * c);

  const double keep = 1.0 - gamma;
  S1_ = keep * S1_ + step * z_mix;
  S2_ = keep * keep * S2_ + 2.0 * keep * step * nu_mix + step * step * g_mix;

  for (double& w : weights_) w *= keep;
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t pi = ensure_pool_node(dir.atoms[j], dir.cand_cols.col(j).data());
    const std::size_t a = ensure_active(pi);
    weights_[a] += step * dir.coeffs[j];
  }
  if (keep == 0.0) prune_active(0.0);

  // nu(y_i) <- keep * nu(y_i) + step * sum_j c_j K(y_atom_j, y_i)
  Eigen::Map<Eigen::VectorXd> nu(cand_nu_.data(), m);
  nu = keep * nu + step * (dir.cand_cols * c);

  pool_.self_energy = S2_;
  if (++updates_since_exact_ >= 64) recompute_scalars();
}

Eigen::MatrixXd IterateState::active_gram() const {
  const std::size_t s = active_.size();
  Eigen::MatrixXd G(s, s);
  for (std::size_t a = 0; a < s; ++a) {
    for (std::size_t b = a; b < s; ++b) {
      G(a, b) = pool_.gram(active_[a], active_[b]);
      G(b, a) = G(a, b);
    }
  }
  return G;
}

Eigen::VectorXd IterateState::active_z() const {
  Eigen::VectorXd z(active_.size());
  for (std::size_t a = 0; a < active_.size(); ++a) z[a] = pool_.z(active_[a]);
  return z;
}

double IterateState::active_p(std::size_t a) const {
  const std::size_t pi = active_[a];
  const std::ptrdiff_t ci = pool_cand_[pi];
  double nu_at = 0.0;
  if (ci >= 0) {
    nu_at = cand_nu_[static_cast<std::size_t>(ci)];
    return cand_z_[static_cast<std::size_t>(ci)] - nu_at - S1_ + S2_;
  }
  for (std::size_t b = 0; b < active_.size(); ++b) {
    nu_at += weights_[b] * pool_.gram(active_[b], pi);
  }
  return pool_.z(pi) - nu_at - S1_ + S2_;
}

void IterateState::set_active_weights(std::span<const double> w) {
  if (w.size() != weights_.size()) throw std::invalid_argument("weight count mismatch");
  if (!keep_node_columns_) {
    throw InvariantError("full reweight requires node columns (construct with keep_node_columns)");
  }
  std::copy(w.begin(), w.end(), weights_.begin());
  refresh_cand_nu_from_columns();
  recompute_scalars();
}

void IterateState::refresh_cand_nu_from_columns() {
  const std::size_t m = cands_->size();
  Eigen::Map<Eigen::VectorXd> nu(cand_nu_.data(), m);
  nu.setZero();
  for (std::size_t a = 0; a < active_.size(); ++a) {
    nu += weights_[a] * node_cols_.col(active_[a]);
  }
}

void IterateState::prune_active(double tol) {
  std::size_t keep = 0;
  for (std::size_t a = 0; a < active_.size(); ++a) {
    if (weights_[a] > tol || (tol == 0.0 && weights_[a] != 0.0)) {
      active_[keep] = active_[a];
      weights_[keep] = weights_[a];
      ++keep;
    } else {
      pool_active_[active_[a]] = -1;
    }
  }
  active_.resize(keep);
  weights_.resize(keep);
  for (std::size_t a = 0; a < active_.size(); ++a) {
    pool_active_[active_[a]] = static_cast<std::ptrdiff_t>(a);
  }
}

double IterateState::min_weight() const {
  double v = std::numeric_limits<double>::infinity();
  for (double w : weights_) v = std::min(v, w);
  return v;
}

double IterateState::weight_sum() const {
  double s = 0.0;
  for (double w : weights_) s += w;
  return s;
}

DiscreteMeasure IterateState::snapshot() const {
  DiscreteMeasure m;
  for (std::size_t a = 0; a < active_.size(); ++a) {
    m.add_atom(pool_.node(active_[a]), weights_[a]);
  }
  return m;
}

void IterateState::recompute_scalars() {
  double s1 = 0.0;
  for (std::size_t a = 0; a < active_.size(); ++a) s1 += weights_[a] * pool_.z(active_[a]);
  S1_ = s1;
  S2_ = pool_.quad_form(active_, weights_);
  pool_.self_energy = S2_;
  updates_since_exact_ = 0;
}

}  // namespace kherd
