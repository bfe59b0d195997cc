#include "kherd/gradapprox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

#include "kherd/errors.hpp"
#include "kherd/simplexopt.hpp"

namespace kherd {

double align(double f1_norm2, double f2_norm2, double inner) {
  if (!(f1_norm2 > 1e-300) || !(f2_norm2 > 1e-300)) return -1.0;
  return std::clamp(inner / std::sqrt(f1_norm2 * f2_norm2), -1.0, 1.0);
}

std::optional<std::pair<double, double>> gcos_closed_form(const CosStepScalars& s) {
  const double den = s.p * s.beta - s.q * s.alpha;
  if (std::abs(den) < 1e-300) return std::nullopt;  // g monotone; maximum sits at c = 0
  const double c = (s.q * s.beta - s.p * s.gamma) / den;
  if (!(c > 0.0) || c > 1e12) return std::nullopt;
  const double num = c * s.p + s.q;
  if (num < 0.0) return std::nullopt;
  const double d2 = s.alpha * c * c + 2.0 * s.beta * c + s.gamma;
  if (!(d2 > 1e-300)) return std::nullopt;
  return std::make_pair(c, num / std::sqrt(d2));
}

namespace {

// Incremental bookkeeping for one inner loop. For the running direction
// d = sum_j c_j (K(y_j,.) - nu) it maintains
//   q = <mu_K - nu, d>, gamma = ||d||^2, beta_i = <K(y_i,.) - nu, d>,
// plus the raw kernel column of every atom so one round costs O(m) kernel
// evaluations (none when an atom is re-selected) and O(m) arithmetic.
class DirectionBuilder {
 public:
  explicit DirectionBuilder(IterateState& st)
      : st_(st),
        m_(st.candidate_count()),
        r2_(st.residual_norm2()),
        eval_mark_(st.kernel_evals()) {
    p_.resize(m_);
    alpha_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      p_[i] = st_.p(i);
      alpha_[i] = st_.atom_norm2(i);
    }
    beta_.assign(m_, 0.0);
  }

  std::size_t m() const { return m_; }
  double r2() const { return r2_; }
  double q() const { return q_; }
  double gamma() const { return gamma_; }
  double p(std::size_t i) const { return p_[i]; }
  double alpha(std::size_t i) const { return alpha_[i]; }
  double beta(std::size_t i) const { return beta_[i]; }
  std::size_t atom_count() const { return atoms_.size(); }
  std::size_t atom(std::size_t j) const { return atoms_[j]; }
  const std::vector<double>& coeffs() const { return coeffs_; }
  double lambda() const { return lambda_; }
  double cur_align() const { return align(r2_, gamma_, q_); }
  double residual_norm2() const { return r2_ - 2.0 * q_ + gamma_; }

  std::uint64_t round_evals() {
    const std::uint64_t d = st_.kernel_evals() - eval_mark_;
    eval_mark_ = st_.kernel_evals();
    return d;
  }

  // d <- d + c (K(y_ci,.) - nu)
  void add_atom(std::size_t ci, double c) {
    const Eigen::VectorXd& col = fetch_column(ci);
    gamma_ += 2.0 * c * beta_[ci] + c * c * alpha_[ci];
    q_ += c * p_[ci];
    const double off = st_.s2() - st_.cand_nu(ci);
    for (std::size_t i = 0; i < m_; ++i) {
      beta_[i] += c * (col[i] - st_.cand_nu(i) + off);
    }
    lambda_ += c;
    if (auto slot = slot_of(ci)) {
      coeffs_[*slot] += c;
    } else {
      atoms_.push_back(ci);
      coeffs_.push_back(c);
    }
  }

  // d <- s d with s >= 0 (backward step); align against mu_K - nu is unchanged
  void rescale(double s) {
    q_ *= s;
    gamma_ *= s * s;
    lambda_ *= s;
    for (double& c : coeffs_) c *= s;
    for (double& b : beta_) b *= s;
  }

  struct Checkpoint {
    std::vector<std::size_t> atoms;
    std::vector<double> coeffs;
    double q, gamma, lambda;
  };
  Checkpoint checkpoint() const { return {atoms_, coeffs_, q_, gamma_, lambda_}; }
  // restore for an immediate finalize; beta_ is left stale on purpose
  void restore(Checkpoint cp) {
    atoms_ = std::move(cp.atoms);
    coeffs_ = std::move(cp.coeffs);
    q_ = cp.q;
    gamma_ = cp.gamma;
    lambda_ = cp.lambda;
  }

  // fully-corrective refit: replace all coefficients, drop zero atoms, and
  // rebuild q, gamma, beta in the reduced basis
  void set_coeffs(const Eigen::VectorXd& c) {
    if (c.size() != static_cast<Eigen::Index>(atoms_.size())) {
      throw std::invalid_argument("coefficient count mismatch");
    }
    std::vector<std::size_t> atoms;
    std::vector<double> coeffs;
    for (std::size_t j = 0; j < atoms_.size(); ++j) {
      if (c[j] > 0.0) {
        atoms.push_back(atoms_[j]);
        coeffs.push_back(c[j]);
      }
    }
    atoms_ = std::move(atoms);
    coeffs_ = std::move(coeffs);
    lambda_ = 0.0;
    q_ = 0.0;
    for (std::size_t j = 0; j < atoms_.size(); ++j) {
      lambda_ += coeffs_[j];
      q_ += coeffs_[j] * p_[atoms_[j]];
    }
    Eigen::Map<Eigen::VectorXd> bv(beta_.data(), m_);
    bv.setZero();
    double const_off = 0.0;
    for (std::size_t j = 0; j < atoms_.size(); ++j) {
      const_off += coeffs_[j] * (st_.s2() - st_.cand_nu(atoms_[j]));
      bv += coeffs_[j] * scratch_cols_[col_of_.at(atoms_[j])];
    }
    for (std::size_t i = 0; i < m_; ++i) {
      beta_[i] += const_off - lambda_ * st_.cand_nu(i);
    }
    if (atoms_.empty()) {
      gamma_ = 0.0;
      return;
    }
    const Eigen::MatrixXd A = atom_inner_matrix();
    Eigen::Map<const Eigen::VectorXd> cv(coeffs_.data(), coeffs_.size());
    gamma_ = cv.dot(A * cv);
  }

  // <a_j, a_l> between the current atoms
  Eigen::MatrixXd atom_inner_matrix() const {
    const std::size_t k = atoms_.size();
    Eigen::MatrixXd A(k, k);
    for (std::size_t a = 0; a < k; ++a) {
      const Eigen::VectorXd& col = scratch_cols_[col_of_.at(atoms_[a])];
      for (std::size_t b = 0; b < k; ++b) {
        A(a, b) = col[atoms_[b]] - st_.cand_nu(atoms_[a]) - st_.cand_nu(atoms_[b]) + st_.s2();
      }
    }
    return 0.5 * (A + A.transpose());
  }

  Direction finalize() {
    Direction d;
    d.atoms = atoms_;
    d.coeffs = coeffs_;
    d.lambda = lambda_;
    d.q = q_;
    d.norm2 = gamma_;
    const std::size_t k = atoms_.size();
    d.atom_kernel.resize(k, k);
    d.cand_cols.resize(m_, k);
    for (std::size_t j = 0; j < k; ++j) {
      const Eigen::VectorXd& col = scratch_cols_[col_of_.at(atoms_[j])];
      d.cand_cols.col(j) = col;
      for (std::size_t l = 0; l < k; ++l) d.atom_kernel(j, l) = col[atoms_[l]];
    }
    if (k > 0) {
      d.atom_kernel = (0.5 * (d.atom_kernel + d.atom_kernel.transpose())).eval();
    }
    return d;
  }

 private:
  const Eigen::VectorXd& fetch_column(std::size_t ci) {
    if (auto it = col_of_.find(ci); it != col_of_.end()) return scratch_cols_[it->second];
    std::vector<double> col(m_);
    st_.eval_column(ci, col);
    scratch_cols_.emplace_back(Eigen::Map<Eigen::VectorXd>(col.data(), m_));
    col_of_[ci] = scratch_cols_.size() - 1;
    return scratch_cols_.back();
  }

  std::optional<std::size_t> slot_of(std::size_t ci) const {
    for (std::size_t j = 0; j < atoms_.size(); ++j) {
      if (atoms_[j] == ci) return j;
    }
    return std::nullopt;
  }

  IterateState& st_;
  std::size_t m_;
  double r2_;
  std::vector<double> p_, alpha_, beta_;
  std::vector<std::size_t> atoms_;
  std::vector<double> coeffs_;
  double q_ = 0.0, gamma_ = 0.0, lambda_ = 0.0;
  std::vector<Eigen::VectorXd> scratch_cols_;
  std::map<std::size_t, std::size_t> col_of_;
  std::uint64_t eval_mark_;
};

// best single vertex direction by align; nullopt when nothing points uphill
std::optional<std::size_t> best_align_atom(const DirectionBuilder& b) {
  std::optional<std::size_t> best;
  double best_val = 0.0;
  for (std::size_t i = 0; i < b.m(); ++i) {
    const double a = align(b.r2(), b.alpha(i), b.p(i));
    if (a > best_val) {
      best_val = a;
      best = i;
    }
  }
  return best;
}

// vertex with the largest residual inner product <r, v>; lowest index wins
std::size_t pursuit_vertex(const DirectionBuilder& b, double* inner) {
  std::size_t vk = 0;
  double fwd = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < b.m(); ++i) {
    const double v = b.p(i) - b.beta(i);
    if (v > fwd) {
      fwd = v;
      vk = i;
    }
  }
  *inner = fwd;
  return vk;
}

void require_q_positive(const DirectionBuilder& b, const char* who) {
  if (!(b.q() > 0.0)) {
    throw InvariantError(std::string(who) + ": <mu_K - nu, d> = " + std::to_string(b.q()) +
                         " lost positivity (||d||^2 = " + std::to_string(b.gamma()) +
                         ", atoms = " + std::to_string(b.atom_count()) + ")");
  }
}

}  // namespace

Direction single_atom_direction(IterateState& state, std::size_t ci) {
  DirectionBuilder b(state);
  b.add_atom(ci, 1.0);
  Direction d = b.finalize();
  d.rounds = 1;
  d.round_cos.push_back(align(b.r2(), d.norm2, d.q));
  d.round_evals.push_back(b.round_evals());
  return d;
}

Direction pmp(IterateState& state, std::size_t k_max, double delta) {
  if (k_max < 1) throw std::invalid_argument("k_max must be >= 1");
  if (!(delta < 1.0)) throw std::invalid_argument("matching pursuit needs delta < 1");
  DirectionBuilder b(state);
  std::vector<double> residuals{std::sqrt(std::max(0.0, b.residual_norm2()))};
  std::vector<double> cos_hist;
  std::vector<std::uint64_t> evals;
  std::vector<Direction::PursuitEvent> events;
  int accepted = 0;

  for (std::size_t k = 0; k < k_max; ++k) {
    double fwd = 0.0;
    const std::size_t vk = pursuit_vertex(b, &fwd);
    double bwd = -std::numeric_limits<double>::infinity();
    if (k > 0 && b.gamma() > 1e-300) {
      bwd = (b.gamma() - b.q()) / std::sqrt(b.gamma());
    }
    const bool forward = fwd >= bwd;
    if (!((forward ? fwd : bwd) > 0.0)) break;  // nothing points uphill

    const double old_align = b.cur_align();
    if (forward) {
      const double a = b.alpha(vk);
      if (!(a > 1e-300)) break;
      const double lam = fwd / a;
      // tentative scalars are enough to evaluate the acceptance test
      const double g2 = b.gamma() + 2.0 * lam * b.beta(vk) + lam * lam * a;
      const double q2 = b.q() + lam * b.p(vk);
      if (!(align(b.r2(), g2, q2) - old_align > delta)) break;
      b.add_atom(vk, lam);
      events.push_back({+1, lam, 0.0});
    } else {
      const double dn = std::sqrt(b.gamma());
      const double scale = 1.0 - bwd / dn;
      if (!(scale > 0.0)) break;  // direction would vanish; keep what we have
      // a rescale leaves align unchanged, so the gain is exactly zero
      if (!(0.0 > delta)) break;
      events.push_back({-1, bwd, dn});
      b.rescale(scale);
    }
    ++accepted;
    cos_hist.push_back(b.cur_align());
    residuals.push_back(std::sqrt(std::max(0.0, b.residual_norm2())));
    evals.push_back(b.round_evals());
  }

  if (b.atom_count() == 0) return Direction{};
  Direction d = b.finalize();
  d.rounds = accepted;
  d.round_cos = std::move(cos_hist);
  d.residual_norms = std::move(residuals);
  d.round_evals = std::move(evals);
  d.events = std::move(events);
  return d;
}

Direction gcos(IterateState& state, std::size_t k_max, double delta) {
  if (k_max < 1) throw std::invalid_argument("k_max must be >= 1");
  if (delta < 0.0) throw std::invalid_argument("greedy cos maximization needs delta >= 0");
  DirectionBuilder b(state);
  const auto first = best_align_atom(b);
  if (!first) return Direction{};
  b.add_atom(*first, 1.0);
  std::vector<double> cos_hist{b.cur_align()};
  std::vector<std::uint64_t> evals{b.round_evals()};
  int rounds = 1;

  for (std::size_t k = 1; k < k_max; ++k) {
    require_q_positive(b, "gcos");
    std::optional<std::size_t> best;
    double best_c = 0.0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < b.m(); ++i) {
      const CosStepScalars s{b.p(i), b.q(), b.alpha(i), b.beta(i), b.gamma()};
      if (const auto cf = gcos_closed_form(s)) {
        if (cf->second > best_val) {
          best_val = cf->second;
          best_c = cf->first;
          best = i;
        }
      }
    }
    if (!best) break;  // every candidate restricted out; d stands as is
    const double new_align = best_val / std::sqrt(b.r2());
    if (!(new_align - b.cur_align() > delta)) break;
    b.add_atom(*best, best_c);
    cos_hist.push_back(b.cur_align());
    evals.push_back(b.round_evals());
    ++rounds;
  }

  Direction d = b.finalize();
  d.rounds = rounds;
  d.round_cos = std::move(cos_hist);
  d.round_evals = std::move(evals);
  return d;
}

namespace {

// Shared fully-corrective loop. `pursuit` switches the selection rule between
// matching pursuit and the closed-form cos rule; either way every accepted
// round ends with a nonnegative refit of all coefficients.
Direction fully_corrective_loop(IterateState& state, std::size_t k_max, double delta,
                                bool pursuit) {
  DirectionBuilder b(state);

  std::optional<std::size_t> first;
  double c0 = 1.0;
  if (pursuit) {
    double fwd = 0.0;
    const std::size_t vk = pursuit_vertex(b, &fwd);
    if (fwd > 0.0 && b.alpha(vk) > 1e-300) {
      first = vk;
      c0 = fwd / b.alpha(vk);
    }
  } else {
    first = best_align_atom(b);
  }
  if (!first || !(c0 > 0.0)) return Direction{};
  b.add_atom(*first, c0);

  std::vector<double> cos_hist{b.cur_align()};
  std::vector<double> cos_pre{b.cur_align()};
  std::vector<double> residuals;
  if (pursuit) {
    residuals.push_back(std::sqrt(std::max(0.0, b.r2())));
    residuals.push_back(std::sqrt(std::max(0.0, b.residual_norm2())));
  }
  std::vector<std::uint64_t> evals{b.round_evals()};
  int rounds = 1;

  for (std::size_t k = 1; k < k_max; ++k) {
    require_q_positive(b, pursuit ? "fc_pmp" : "fc_gcos");
    bool backward = false;
    double backward_scale = 1.0;
    std::optional<std::size_t> pick;
    double pick_c = 0.0;
    if (pursuit) {
      double fwd = 0.0;
      const std::size_t vk = pursuit_vertex(b, &fwd);
      double bwd = -std::numeric_limits<double>::infinity();
      if (b.gamma() > 1e-300) bwd = (b.gamma() - b.q()) / std::sqrt(b.gamma());
      if (fwd >= bwd) {
        if (!(fwd > 0.0) || !(b.alpha(vk) > 1e-300)) break;
        pick = vk;
        pick_c = fwd / b.alpha(vk);
        if (!(pick_c > 0.0)) break;
      } else {
        if (!(bwd > 0.0)) break;
        backward = true;
        backward_scale = 1.0 - bwd / std::sqrt(b.gamma());
        if (!(backward_scale > 0.0)) break;
      }
    } else {
      double best_val = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < b.m(); ++i) {
        const CosStepScalars s{b.p(i), b.q(), b.alpha(i), b.beta(i), b.gamma()};
        if (const auto cf = gcos_closed_form(s)) {
          if (cf->second > best_val) {
            best_val = cf->second;
            pick_c = cf->first;
            pick = i;
          }
        }
      }
      if (!pick) break;
    }

    const double old_align = b.cur_align();
    const auto cp = b.checkpoint();
    const std::vector<double> prev_coeffs = b.coeffs();
    const std::size_t prev_atoms = b.atom_count();

    if (backward) {
      b.rescale(backward_scale);
    } else {
      b.add_atom(*pick, pick_c);
    }
    const double pre_refit = b.cur_align();

    QuadraticProblem prob{b.atom_inner_matrix(), Eigen::VectorXd(b.atom_count())};
    for (std::size_t j = 0; j < b.atom_count(); ++j) prob.b[j] = b.p(b.atom(j));
    SolveOptions opts;
    opts.warm_start = Eigen::Map<const Eigen::VectorXd>(b.coeffs().data(), b.atom_count());
    const Eigen::VectorXd refit = nnls(prob, opts);
    if (refit.maxCoeff() <= 0.0) {
      b.restore(cp);
      break;
    }
    b.set_coeffs(refit);

    const double new_align = b.cur_align();
    if (!(new_align - old_align > delta)) {
      b.restore(cp);
      break;
    }
    cos_hist.push_back(new_align);
    cos_pre.push_back(pre_refit);
    if (pursuit) residuals.push_back(std::sqrt(std::max(0.0, b.residual_norm2())));
    evals.push_back(b.round_evals());
    ++rounds;

    // a re-selected atom or pure rescale refits to the same optimum; stop
    // instead of spinning out the remaining rounds
    bool moved = b.atom_count() != prev_atoms;
    if (!moved) {
      for (std::size_t j = 0; j < prev_coeffs.size(); ++j) {
        if (std::abs(b.coeffs()[j] - prev_coeffs[j]) >
            1e-14 * (1.0 + std::abs(prev_coeffs[j]))) {
          moved = true;
          break;
        }
      }
    }
    if (!moved) break;
  }

  if (b.atom_count() == 0) return Direction{};
  Direction d = b.finalize();
  d.rounds = rounds;
  d.round_cos = std::move(cos_hist);
  d.round_cos_pre = std::move(cos_pre);
  d.residual_norms = std::move(residuals);
  d.round_evals = std::move(evals);
  return d;
}

}  // namespace

Direction fc_gcos(IterateState& state, std::size_t k_max, double delta) {
  if (k_max < 1) throw std::invalid_argument("k_max must be >= 1");
  if (delta < 0.0) throw std::invalid_argument("greedy cos maximization needs delta >= 0");
  return fully_corrective_loop(state, k_max, delta, false);
}

Direction fc_pmp(IterateState& state, std::size_t k_max, double delta) {
  if (k_max < 1) throw std::invalid_argument("k_max must be >= 1");
  if (!(delta < 1.0)) throw std::invalid_argument("matching pursuit needs delta < 1");
  return fully_corrective_loop(state, k_max, delta, true);
}

Direction pmp(const Kernel& k, const MeanEmbedding& emb, const DiscreteMeasure& nu,
              const std::vector<Point>& candidates, std::size_t k_max, double delta) {
  IterateState st(k, emb, candidates, nu);
  return pmp(st, k_max, delta);
}

Direction gcos(const Kernel& k, const MeanEmbedding& emb, const DiscreteMeasure& nu,
               const std::vector<Point>& candidates, std::size_t k_max, double delta) {
  IterateState st(k, emb, candidates, nu);
  return gcos(st, k_max, delta);
}

Direction fc_gcos(const Kernel& k, const MeanEmbedding& emb, const DiscreteMeasure& nu,
                  const std::vector<Point>& candidates, std::size_t k_max, double delta) {
  IterateState st(k, emb, candidates, nu);
  return fc_gcos(st, k_max, delta);
}

Direction fc_pmp(const Kernel& k, const MeanEmbedding& emb, const DiscreteMeasure& nu,
                 const std::vector<Point>& candidates, std::size_t k_max, double delta) {
  IterateState st(k, emb, candidates, nu);
  return fc_pmp(st, k_max, delta);
}

}  // namespace kherd
