#include "kherd/simplexopt.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "kherd/errors.hpp"

namespace kherd {

namespace {

constexpr double kDupTol = 1e-12;
constexpr std::size_t kActiveSetLimit = 256;

double obj(const Eigen::MatrixXd& G, const Eigen::VectorXd& b, const Eigen::VectorXd& x) {
  return x.dot(G * x) - 2.0 * b.dot(x);
}

// Cholesky with a single jitter retry, then LDLT. The jitter mirrors the Gram
// conditioning policy used for interpolation weights.
Eigen::VectorXd solve_psd(Eigen::MatrixXd A, const Eigen::VectorXd& rhs) {
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() == Eigen::Success) return llt.solve(rhs);
  A.diagonal().array() += 1e-12 * A.trace() / static_cast<double>(A.rows());
  llt.compute(A);
  if (llt.info() == Eigen::Success) return llt.solve(rhs);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success) {
    throw SolverError("subproblem matrix factorization failed", 0.0, 0);
  }
  return ldlt.solve(rhs);
}

// Representative index per variable; duplicates (identical Gram column and b
// entry within 1e-12) collapse onto the first occurrence. Herding re-selects
// nodes, so exact duplicates are routine.
std::vector<std::size_t> duplicate_reps(const QuadraticProblem& p) {
  const std::size_t k = p.b.size();
  std::vector<std::size_t> rep(k);
  std::iota(rep.begin(), rep.end(), std::size_t{0});
  for (std::size_t j = 1; j < k; ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      if (rep[i] != i) continue;
      if (std::abs(p.b[i] - p.b[j]) > kDupTol) continue;
      if ((p.G.col(i) - p.G.col(j)).lpNorm<Eigen::Infinity>() <= kDupTol) {
        rep[j] = i;
        break;
      }
    }
  }
  return rep;
}

struct Reduced {
  QuadraticProblem prob;
  std::vector<std::size_t> keep;  // original index of each reduced variable
  bool reduced = false;
};

Reduced collapse(const QuadraticProblem& p, const std::vector<std::size_t>& rep) {
  Reduced r;
  const std::size_t k = p.b.size();
  for (std::size_t i = 0; i < k; ++i) {
    if (rep[i] == i) r.keep.push_back(i);
  }
  if (r.keep.size() == k) {
    r.prob = p;
    return r;
  }
  r.reduced = true;
  const std::size_t m = r.keep.size();
  r.prob.G.resize(m, m);
  r.prob.b.resize(m);
  for (std::size_t a = 0; a < m; ++a) {
    r.prob.b[a] = p.b[r.keep[a]];
    for (std::size_t c = 0; c < m; ++c) r.prob.G(a, c) = p.G(r.keep[a], r.keep[c]);
  }
  return r;
}

double nnls_violation(const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                      const Eigen::VectorXd& x, double tau) {
  const Eigen::VectorXd g = G * x - b;
  double v = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    v = std::max(v, x[i] > tau ? std::abs(g[i]) : std::max(0.0, -g[i]));
  }
  return v;
}

double simplex_violation(const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                         const Eigen::VectorXd& w, double tau) {
  const Eigen::VectorXd g = G * w - b;
  const double s = w.dot(g);  // multiplier estimate; exact at the optimum
  double v = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    v = std::max(v, s - g[i]);
    if (w[i] > tau) v = std::max(v, std::abs(g[i] - s));
  }
  return std::max(v, 0.0);
}

// ---- active set: nonnegative least squares (Lawson-Hanson on the Gram form)

Eigen::VectorXd nnls_active_set(const QuadraticProblem& p, const Eigen::VectorXd* warm,
                                int max_iter, double tau, SolveDiagnostics* diag) {
  const std::size_t k = p.b.size();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(k);
  std::vector<bool> in_set(k, false);
  std::vector<std::size_t> P;
  if (warm) {
    for (std::size_t i = 0; i < k; ++i) {
      if ((*warm)[i] > kDupTol) {
        x[i] = (*warm)[i];
        in_set[i] = true;
        P.push_back(i);
      }
    }
  }

  auto face_solve = [&]() -> Eigen::VectorXd {
    Eigen::MatrixXd Gpp(P.size(), P.size());
    Eigen::VectorXd bp(P.size());
    for (std::size_t a = 0; a < P.size(); ++a) {
      bp[a] = p.b[P[a]];
      for (std::size_t c = 0; c < P.size(); ++c) Gpp(a, c) = p.G(P[a], P[c]);
    }
    return solve_psd(std::move(Gpp), bp);
  };

  int iter = 0;
  for (; iter < max_iter; ++iter) {
    // optimize over the current face, stepping back whenever a variable would
    // cross zero
    while (!P.empty()) {
      const Eigen::VectorXd s = face_solve();
      double min_s = s.size() ? s.minCoeff() : 1.0;
      if (min_s > 0.0) {
        for (std::size_t a = 0; a < P.size(); ++a) x[P[a]] = s[a];
        break;
      }
      double theta = 1.0;
      for (std::size_t a = 0; a < P.size(); ++a) {
        if (s[a] <= 0.0) {
          const double xi = x[P[a]];
          if (xi - s[a] > 0.0) theta = std::min(theta, xi / (xi - s[a]));
        }
      }
      for (std::size_t a = 0; a < P.size(); ++a) {
        x[P[a]] += theta * (s[a] - x[P[a]]);
      }
      std::vector<std::size_t> keep;
      for (std::size_t a = 0; a < P.size(); ++a) {
        if (x[P[a]] > kDupTol && s[a] > 0.0) {
          keep.push_back(P[a]);
        } else if (x[P[a]] <= kDupTol || s[a] <= 0.0) {
          if (x[P[a]] <= kDupTol) {
            x[P[a]] = 0.0;
            in_set[P[a]] = false;
          } else {
            keep.push_back(P[a]);
          }
        }
      }
      if (keep.size() == P.size()) {
        // numerical stall: freeze the most negative direction out
        std::size_t drop = 0;
        double worst = 1.0;
        for (std::size_t a = 0; a < P.size(); ++a) {
          if (s[a] < worst) {
            worst = s[a];
            drop = P[a];
          }
        }
        x[drop] = 0.0;
        in_set[drop] = false;
        keep.clear();
        for (std::size_t q : P) {
          if (q != drop) keep.push_back(q);
        }
      }
      P = std::move(keep);
    }
    if (diag) diag->objective_per_iteration.push_back(obj(p.G, p.b, x));

    const Eigen::VectorXd w = p.b - p.G * x;
    double best = tau;
    std::size_t pick = k;
    for (std::size_t i = 0; i < k; ++i) {
      if (!in_set[i] && w[i] > best) {
        best = w[i];
        pick = i;
      }
    }
    if (pick == k) break;  // certificate holds
    in_set[pick] = true;
    P.push_back(pick);
  }
  if (diag) diag->iterations += iter;
  return x;
}

// ---- active set: QP over the probability simplex

Eigen::VectorXd simplex_active_set(const QuadraticProblem& p, const Eigen::VectorXd* warm,
                                   int max_iter, double tau, SolveDiagnostics* diag) {
  const std::size_t k = p.b.size();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
  if (warm && warm->size() == static_cast<Eigen::Index>(k) && warm->maxCoeff() > 0.0) {
    w = warm->cwiseMax(0.0);
    w /= w.sum();
  } else {
    std::size_t j = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
      const double v = p.G(i, i) - 2.0 * p.b[i];
      if (v < best) {
        best = v;
        j = i;
      }
    }
    w[j] = 1.0;
  }
  std::vector<std::size_t> F;
  std::vector<bool> in_set(k, false);
  for (std::size_t i = 0; i < k; ++i) {
    if (w[i] > 0.0) {
      F.push_back(i);
      in_set[i] = true;
    }
  }

  // equality-constrained minimizer on the face, via two PSD solves
  auto face_solve = [&]() -> Eigen::VectorXd {
    Eigen::MatrixXd Gff(F.size(), F.size());
    Eigen::VectorXd bf(F.size());
    for (std::size_t a = 0; a < F.size(); ++a) {
      bf[a] = p.b[F[a]];
      for (std::size_t c = 0; c < F.size(); ++c) Gff(a, c) = p.G(F[a], F[c]);
    }
    const Eigen::VectorXd u = solve_psd(Gff, bf);
    const Eigen::VectorXd v = solve_psd(std::move(Gff), Eigen::VectorXd::Ones(F.size()));
    const double denom = v.sum();
    if (std::abs(denom) < 1e-300) return u;  // defers to the ratio logic
    const double mu = (u.sum() - 1.0) / denom;
    return u - mu * v;
  };

  int iter = 0;
  for (; iter < max_iter; ++iter) {
    for (std::size_t inner = 0; inner <= F.size() + 1; ++inner) {
      if (F.size() == 1) {
        w.setZero();
        w[F[0]] = 1.0;
        break;
      }
      const Eigen::VectorXd s = face_solve();
      if (s.minCoeff() >= 0.0) {
        w.setZero();
        for (std::size_t a = 0; a < F.size(); ++a) w[F[a]] = s[a];
        break;
      }
      double theta = 1.0;
      for (std::size_t a = 0; a < F.size(); ++a) {
        if (s[a] < 0.0) {
          const double wi = w[F[a]];
          if (wi - s[a] > 0.0) theta = std::min(theta, wi / (wi - s[a]));
        }
      }
      std::vector<std::size_t> keep;
      for (std::size_t a = 0; a < F.size(); ++a) {
        const double nw = w[F[a]] + theta * (s[a] - w[F[a]]);
        if (nw > kDupTol) {
          w[F[a]] = nw;
          keep.push_back(F[a]);
        } else {
          w[F[a]] = 0.0;
          in_set[F[a]] = false;
        }
      }
      if (keep.size() == F.size()) {
        std::size_t drop = F[0];
        double worst = 0.0;
        for (std::size_t a = 0; a < F.size(); ++a) {
          if (s[a] < worst) {
            worst = s[a];
            drop = F[a];
          }
        }
        in_set[drop] = false;
        w[drop] = 0.0;
        keep.clear();
        for (std::size_t q : F) {
          if (q != drop) keep.push_back(q);
        }
      }
      F = std::move(keep);
      if (F.empty()) throw SolverError("simplex face emptied", 0.0, iter);
      const double total = w.sum();
      if (total > 0.0) w /= total;
    }
    if (diag) diag->objective_per_iteration.push_back(obj(p.G, p.b, w));

    const Eigen::VectorXd g = p.G * w - p.b;
    const double s_mult = w.dot(g);
    double worst = tau;
    std::size_t pick = k;
    for (std::size_t i = 0; i < k; ++i) {
      if (!in_set[i] && s_mult - g[i] > worst) {
        worst = s_mult - g[i];
        pick = i;
      }
    }
    if (pick == k) break;
    in_set[pick] = true;
    F.push_back(pick);
  }
  if (diag) diag->iterations += iter;
  return w;
}

// ---- projected gradient with Barzilai-Borwein steps, monotone via backtracking

template <typename Projector, typename Violation>
Eigen::VectorXd projected_bb(const QuadraticProblem& p, Eigen::VectorXd x,
                             Projector project, Violation violation, int max_iter,
                             double tau, SolveDiagnostics* diag) {
  const Eigen::MatrixXd& G = p.G;
  const Eigen::VectorXd& b = p.b;
  double fx = obj(G, b, x);
  Eigen::VectorXd grad = 2.0 * (G * x - b);
  double step = 1.0 / std::max(1e-12, 2.0 * G.cwiseAbs().rowwise().sum().maxCoeff());
  bool use_bb1 = true;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    if (violation(x) <= tau) break;
    Eigen::VectorXd x_new;
    double f_new = 0.0;
    double s = step;
    for (int bt = 0; bt < 80; ++bt) {
      x_new = project(x - s * grad);
      f_new = obj(G, b, x_new);
      if (f_new <= fx + 1e-12) break;
      s *= 0.5;
    }
    const Eigen::VectorXd grad_new = 2.0 * (G * x_new - b);
    const Eigen::VectorXd dx = x_new - x;
    const Eigen::VectorXd dg = grad_new - grad;
    const double sy = dx.dot(dg);
    if (sy > 1e-300) {
      step = use_bb1 ? dx.squaredNorm() / sy : sy / dg.squaredNorm();
      use_bb1 = !use_bb1;
      step = std::clamp(step, 1e-14, 1e14);
    }
    x = std::move(x_new);
    fx = f_new;
    grad = grad_new;
    if (diag) diag->objective_per_iteration.push_back(fx);
  }
  if (diag) {
    diag->iterations += iter;
    diag->used_projected_gradient = true;
  }
  return x;
}

// exact re-solve on the detected support; tightens projected-gradient output
// to the same stationarity the active-set path delivers
void polish_nnls(const QuadraticProblem& p, Eigen::VectorXd& x, double tau) {
  std::vector<std::size_t> P;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] > tau) P.push_back(i);
  }
  if (P.empty() || P.size() > 2048) return;
  Eigen::MatrixXd Gpp(P.size(), P.size());
  Eigen::VectorXd bp(P.size());
  for (std::size_t a = 0; a < P.size(); ++a) {
    bp[a] = p.b[P[a]];
    for (std::size_t c = 0; c < P.size(); ++c) Gpp(a, c) = p.G(P[a], P[c]);
  }
  const Eigen::VectorXd s = solve_psd(std::move(Gpp), bp);
  if (s.minCoeff() < 0.0) return;
  Eigen::VectorXd trial = Eigen::VectorXd::Zero(x.size());
  for (std::size_t a = 0; a < P.size(); ++a) trial[P[a]] = s[a];
  if (obj(p.G, p.b, trial) <= obj(p.G, p.b, x) + 1e-12) x = std::move(trial);
}

void polish_simplex(const QuadraticProblem& p, Eigen::VectorXd& w, double tau) {
  std::vector<std::size_t> F;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] > tau) F.push_back(i);
  }
  if (F.empty() || F.size() > 2048) return;
  Eigen::MatrixXd Gff(F.size(), F.size());
  Eigen::VectorXd bf(F.size());
  for (std::size_t a = 0; a < F.size(); ++a) {
    bf[a] = p.b[F[a]];
    for (std::size_t c = 0; c < F.size(); ++c) Gff(a, c) = p.G(F[a], F[c]);
  }
  const Eigen::VectorXd u = solve_psd(Gff, bf);
  const Eigen::VectorXd v = solve_psd(std::move(Gff), Eigen::VectorXd::Ones(F.size()));
  if (std::abs(v.sum()) < 1e-300) return;
  const double mu = (u.sum() - 1.0) / v.sum();
  const Eigen::VectorXd s = u - mu * v;
  if (s.minCoeff() < 0.0) return;
  Eigen::VectorXd trial = Eigen::VectorXd::Zero(w.size());
  for (std::size_t a = 0; a < F.size(); ++a) trial[F[a]] = s[a];
  trial /= trial.sum();
  if (obj(p.G, p.b, trial) <= obj(p.G, p.b, w) + 1e-12) w = std::move(trial);
}

void validate(const QuadraticProblem& p) {
  const Eigen::Index k = p.b.size();
  if (k == 0 || p.G.rows() != k || p.G.cols() != k) {
    throw std::invalid_argument("quadratic problem dimensions inconsistent or empty");
  }
  if ((p.G - p.G.transpose()).lpNorm<Eigen::Infinity>() > 1e-12 * (1.0 + p.G.norm())) {
    throw std::invalid_argument("gram matrix must be symmetric");
  }
}

}  // namespace

double kkt_tolerance(const QuadraticProblem& prob) {
  return 1e-8 * (1.0 + prob.b.lpNorm<Eigen::Infinity>());
}

double quadratic_objective(const QuadraticProblem& prob, const Eigen::VectorXd& x) {
  return obj(prob.G, prob.b, x);
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index k = v.size();
  std::vector<double> u(v.data(), v.data() + k);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0;
  double theta = 0.0;
  int rho = 0;
  for (int i = 0; i < k; ++i) {
    cum += u[i];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) {
      rho = i + 1;
      theta = t;
    }
  }
  (void)rho;
  return (v.array() - theta).cwiseMax(0.0);
}

Eigen::VectorXd nnls(const QuadraticProblem& prob, const SolveOptions& opts,
                     SolveDiagnostics* diag) {
  validate(prob);
  const std::size_t k = prob.b.size();
  const double tau = kkt_tolerance(prob);
  const auto rep = duplicate_reps(prob);
  const Reduced red = collapse(prob, rep);

  Eigen::VectorXd warm_red;
  const Eigen::VectorXd* warm = nullptr;
  if (opts.warm_start && opts.warm_start->size() == static_cast<Eigen::Index>(k)) {
    warm_red = Eigen::VectorXd::Zero(red.keep.size());
    for (std::size_t i = 0; i < k; ++i) {
      const auto it = std::lower_bound(red.keep.begin(), red.keep.end(), rep[i]);
      warm_red[static_cast<Eigen::Index>(it - red.keep.begin())] += (*opts.warm_start)[i];
    }
    warm = &warm_red;
  }

  const std::size_t kr = red.keep.size();
  Eigen::VectorXd xr;
  if (kr <= kActiveSetLimit && !opts.force_projected) {
    const int max_iter = opts.max_iterations > 0 ? opts.max_iterations
                                                 : static_cast<int>(10 * kr + 100);
    xr = nnls_active_set(red.prob, warm, max_iter, tau, diag);
  } else {
    const int max_iter = opts.max_iterations > 0 ? opts.max_iterations : 200000;
    Eigen::VectorXd x0 = warm ? warm->cwiseMax(0.0).eval() : Eigen::VectorXd::Zero(kr).eval();
    xr = projected_bb(
        red.prob, std::move(x0),
        [](const Eigen::VectorXd& v) { return v.cwiseMax(0.0).eval(); },
        [&](const Eigen::VectorXd& v) { return nnls_violation(red.prob.G, red.prob.b, v, tau); },
        max_iter, tau, diag);
    polish_nnls(red.prob, xr, tau);
  }

  const double viol = nnls_violation(red.prob.G, red.prob.b, xr, tau);
  if (diag) diag->kkt_violation = viol;
  if (viol > tau) {
    throw SolverError("nnls terminated without its optimality certificate", viol,
                      diag ? diag->iterations : -1);
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(k);
  for (std::size_t a = 0; a < kr; ++a) x[red.keep[a]] = xr[a];
  return x;
}

Eigen::VectorXd simplex_qp(const QuadraticProblem& prob, const SolveOptions& opts,
                           SolveDiagnostics* diag) {
  validate(prob);
  const std::size_t k = prob.b.size();
  const double tau = kkt_tolerance(prob);
  const auto rep = duplicate_reps(prob);
  const Reduced red = collapse(prob, rep);

  Eigen::VectorXd warm_red;
  const Eigen::VectorXd* warm = nullptr;
  if (opts.warm_start && opts.warm_start->size() == static_cast<Eigen::Index>(k)) {
    warm_red = Eigen::VectorXd::Zero(red.keep.size());
    for (std::size_t i = 0; i < k; ++i) {
      const auto it = std::lower_bound(red.keep.begin(), red.keep.end(), rep[i]);
      warm_red[static_cast<Eigen::Index>(it - red.keep.begin())] += (*opts.warm_start)[i];
    }
    warm = &warm_red;
  }

  const std::size_t kr = red.keep.size();
  Eigen::VectorXd wr;
  if (kr == 1) {
    wr = Eigen::VectorXd::Ones(1);
    if (diag) diag->kkt_violation = 0.0;
  } else if (kr <= kActiveSetLimit && !opts.force_projected) {
    const int max_iter = opts.max_iterations > 0 ? opts.max_iterations
                                                 : static_cast<int>(10 * kr + 100);
    wr = simplex_active_set(red.prob, warm, max_iter, tau, diag);
  } else {
    const int max_iter = opts.max_iterations > 0 ? opts.max_iterations : 200000;
    Eigen::VectorXd w0 = warm ? project_to_simplex(*warm)
                              : Eigen::VectorXd::Constant(kr, 1.0 / static_cast<double>(kr));
    wr = projected_bb(
        red.prob, std::move(w0),
        [](const Eigen::VectorXd& v) { return project_to_simplex(v); },
        [&](const Eigen::VectorXd& v) { return simplex_violation(red.prob.G, red.prob.b, v, tau); },
        max_iter, tau, diag);
    polish_simplex(red.prob, wr, tau);
  }

  const double viol = simplex_violation(red.prob.G, red.prob.b, wr, tau);
  if (diag) diag->kkt_violation = viol;
  if (viol > tau) {
    throw SolverError("simplex_qp terminated without its optimality certificate", viol,
                      diag ? diag->iterations : -1);
  }
  wr = wr.cwiseMax(0.0);
  wr /= wr.sum();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
  for (std::size_t a = 0; a < kr; ++a) w[red.keep[a]] = wr[a];
  return w;
}

}  // namespace kherd
