#include "kherd/measure.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "kherd/errors.hpp"

namespace kherd {

DiscreteMeasure::DiscreteMeasure(std::vector<Point> nodes, std::vector<double> weights) {
  if (nodes.size() != weights.size()) {
    throw std::invalid_argument("node/weight count mismatch");
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    add_atom(nodes[i], weights[i]);
  }
}

std::optional<std::size_t> DiscreteMeasure::find(const Point& x, double tol) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].size() == x.size() && (nodes_[i] - x).norm() <= tol) return i;
  }
  return std::nullopt;
}

std::size_t DiscreteMeasure::add_atom(const Point& x, double w) {
  if (auto i = find(x)) {
    weights_[*i] += w;
    return *i;
  }
  nodes_.push_back(x);
  weights_.push_back(w);
  return nodes_.size() - 1;
}

void DiscreteMeasure::scale_weights(double s) {
  for (double& w : weights_) w *= s;
}

void DiscreteMeasure::prune_below(double tol) {
  std::size_t keep = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (weights_[i] >= tol) {
      if (keep != i) {
        nodes_[keep] = std::move(nodes_[i]);
        weights_[keep] = weights_[i];
      }
      ++keep;
    }
  }
  nodes_.resize(keep);
  weights_.resize(keep);
}

double DiscreteMeasure::weight_sum() const {
  double s = 0.0;
  for (double w : weights_) s += w;
  return s;
}

double DiscreteMeasure::min_weight() const {
  double m = std::numeric_limits<double>::infinity();
  for (double w : weights_) m = std::min(m, w);
  return m;
}

GramCache::GramCache(const Kernel& kernel, const MeanEmbedding& emb)
    : kernel_(&kernel), emb_(&emb) {}

void GramCache::grow(std::size_t need) {
  if (static_cast<std::size_t>(gram_.rows()) >= need) return;
  std::size_t cap = gram_.rows() == 0 ? 16 : static_cast<std::size_t>(gram_.rows());
  while (cap < need) cap *= 2;
  gram_.conservativeResize(cap, cap);
  z_.conservativeResize(cap);
}

std::size_t GramCache::add_node(const Point& x) {
  grow(n_ + 1);
  for (std::size_t j = 0; j < n_; ++j) {
    const double v = kernel_->eval_unchecked(x, nodes_[j]);
    gram_(n_, j) = v;
    gram_(j, n_) = v;
  }
  gram_(n_, n_) = kernel_->diag();
  z_[n_] = (*emb_)(x);
  nodes_.push_back(x);
  return n_++;
}

std::size_t GramCache::add_node_precomputed(const Point& x, std::span<const double> row,
                                            double diag, double z) {
  if (row.size() != n_) throw std::invalid_argument("gram row length mismatch");
  grow(n_ + 1);
  for (std::size_t j = 0; j < n_; ++j) {
    gram_(n_, j) = row[j];
    gram_(j, n_) = row[j];
  }
  gram_(n_, n_) = diag;
  z_[n_] = z;
  nodes_.push_back(x);
  return n_++;
}

double GramCache::self_energy_exact(std::span<const double> w) const {
  if (w.size() != n_) throw std::invalid_argument("weight length mismatch");
  Eigen::Map<const Eigen::VectorXd> wv(w.data(), n_);
  return wv.dot(gram_.topLeftCorner(n_, n_) * wv);
}

double GramCache::quad_form(std::span<const std::size_t> idx,
                            std::span<const double> w) const {
  if (idx.size() != w.size()) throw std::invalid_argument("index/weight length mismatch");
  double acc = 0.0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    acc += w[a] * w[a] * gram_(idx[a], idx[a]);
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      acc += 2.0 * w[a] * w[b] * gram_(idx[a], idx[b]);
    }
  }
  return acc;
}

GramCache GramCache::from_measure(const Kernel& kernel, const MeanEmbedding& emb,
                                  const DiscreteMeasure& m) {
  GramCache cache(kernel, emb);
  for (const Point& x : m.nodes()) cache.add_node(x);
  return cache;
}

namespace {

void require_aligned(const DiscreteMeasure& m, const GramCache& cache) {
  if (m.size() != cache.size()) {
    throw InvariantError("gram cache does not match the measure's nodes");
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    if ((m.node(i) - cache.node(i)).norm() > kNodeMergeTol) {
      throw InvariantError("gram cache does not match the measure's nodes");
    }
  }
}

}  // namespace

double mmd_squared(const DiscreteMeasure& m, const MeanEmbedding& emb,
                   const GramCache& cache) {
  require_aligned(m, cache);
  const std::size_t n = m.size();
  double cross = 0.0;
  for (std::size_t i = 0; i < n; ++i) cross += m.weight(i) * cache.z(i);
  Eigen::Map<const Eigen::VectorXd> w(m.weights().data(), n);
  const double self = n == 0 ? 0.0 : w.dot(cache.gram_matrix() * w);
  return emb.double_integral() - 2.0 * cross + self;
}

double inner_residual_vs_atom(const MeanEmbedding& emb, const DiscreteMeasure& nu,
                              const GramCache& cache, const Point& y) {
  require_aligned(nu, cache);
  const Kernel& k = cache.kernel();
  k.check_in_domain(y);
  double nu_at_y = 0.0;
  double cross = 0.0;
  for (std::size_t j = 0; j < nu.size(); ++j) {
    nu_at_y += nu.weight(j) * k.eval_unchecked(y, nu.node(j));
    cross += nu.weight(j) * cache.z(j);
  }
  Eigen::Map<const Eigen::VectorXd> w(nu.weights().data(), nu.size());
  const double self = nu.size() == 0 ? 0.0 : w.dot(cache.gram_matrix() * w);
  return emb(y) - nu_at_y - cross + self;
}

OptimalWeights optimal_weights(const std::vector<Point>& nodes, const Kernel& kernel,
                               const MeanEmbedding& emb) {
  const std::size_t n = nodes.size();
  if (n == 0) throw std::invalid_argument("optimal_weights needs at least one node");
  Eigen::MatrixXd G(n, n);
  Eigen::VectorXd z(n);
  for (std::size_t i = 0; i < n; ++i) {
    kernel.check_in_domain(nodes[i]);
    G(i, i) = kernel.diag();
    z[i] = emb(nodes[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = kernel.eval_unchecked(nodes[i], nodes[j]);
      G(i, j) = v;
      G(j, i) = v;
    }
  }

  OptimalWeights out;
  Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-12 * G.trace() / static_cast<double>(n);
    G.diagonal().array() += jitter;
    out.jitter_applied = true;
    llt.compute(G);
  }
  bool usable = llt.info() == Eigen::Success;
  if (usable) {
    // Cholesky can succeed on a barely positive matrix; insist on the stated
    // eigenvalue floor before trusting the solve
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    usable = es.eigenvalues().minCoeff() > 1e-10;
  }
  if (!usable) {
    std::size_t bi = 0, bj = n > 1 ? 1 : 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = (nodes[i] - nodes[j]).norm();
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    throw ConditioningError("gram matrix numerically singular; closest node pair (" +
                                std::to_string(bi) + ", " + std::to_string(bj) +
                                ") at distance " + std::to_string(best),
                            bi, bj);
  }
  out.weights = llt.solve(z);
  out.worst_case_error2 = emb.double_integral() - z.dot(out.weights);
  return out;
}

double fc_orthogonality_residual(const DiscreteMeasure& m, const MeanEmbedding& emb,
                                 const GramCache& cache) {
  require_aligned(m, cache);
  if (m.min_weight() < -1e-12 || std::abs(m.weight_sum() - 1.0) > 1e-10) {
    throw std::invalid_argument("weights are not on the simplex");
  }
  const std::size_t n = m.size();
  Eigen::Map<const Eigen::VectorXd> w(m.weights().data(), n);
  const Eigen::VectorXd Gw = cache.gram_matrix() * w;
  double cross = 0.0;
  for (std::size_t i = 0; i < n; ++i) cross += m.weight(i) * cache.z(i);
  const double self = w.dot(Gw);
  double worst = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (m.weight(j) <= 1e-8) continue;
    const double r = cache.z(j) - Gw[j] - cross + self;
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

}  // namespace kherd
