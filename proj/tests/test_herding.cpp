#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "kherd/herding.hpp"
#include "kherd/rng.hpp"

using namespace kherd;

namespace {

Point pt2(double a, double b) {
  Point p(2);
  p << a, b;
  return p;
}

struct Setup {
  Kernel kernel{KernelKind::gaussian, make_symmetric_box(2)};
  std::unique_ptr<MeanEmbedding> emb;
  std::vector<Point> candidates;

  explicit Setup(std::uint64_t seed, std::size_t m = 200) {
    emb = analytic_embedding(kernel, MeasureKind::trunc_gaussian);
    candidates = sample_measure(kernel.domain(), MeasureKind::trunc_gaussian, m, seed);
  }
};

void check_simplex_rows(const IterationTrace& trace) {
  for (const TraceRow& r : trace.rows) {
    CHECK(r.min_weight >= -1e-12);
    CHECK(std::abs(r.weight_sum - 1.0) <= 1e-10);
  }
}

void check_monotone_epsilon(const IterationTrace& trace) {
  for (std::size_t i = 1; i < trace.rows.size(); ++i) {
    CHECK(trace.rows[i].epsilon <= trace.rows[i - 1].epsilon + 1e-12);
  }
}

void check_node_growth(const IterationTrace& trace) {
  for (std::size_t i = 1; i < trace.rows.size(); ++i) {
    CHECK(trace.rows[i].node_count >= trace.rows[i - 1].node_count);
    CHECK(trace.rows[i].node_count - trace.rows[i - 1].node_count <=
          std::max<std::size_t>(1, trace.rows[i - 1].inner_rounds));
  }
}

}  // namespace

TEST_CASE("line search closed form") {
  CHECK(line_search_gamma(1.0, 1.0) == 1.0);  // inner equals the squared norm
  CHECK(line_search_gamma(0.5, 1.0) == 0.5);
  CHECK(line_search_gamma(-0.3, 1.0) == 0.0);  // clamped below
  CHECK(line_search_gamma(5.0, 1.0) == 1.0);   // clamped above
  CHECK_THROWS_AS(line_search_gamma(1.0, 0.0), std::invalid_argument);

  // local perturbation oracle: phi(g) = r2 - 2 g inner + g^2 norm2
  Rng rng(44);
  for (int rep = 0; rep < 25; ++rep) {
    Eigen::VectorXd R(4), g(4);
    for (int i = 0; i < 4; ++i) {
      R[i] = rng.normal();
      g[i] = rng.normal();
    }
    const double inner = R.dot(g);
    const double n2 = g.squaredNorm();
    const double best = line_search_gamma(inner, n2);
    auto phi = [&](double t) { return R.squaredNorm() - 2.0 * t * inner + t * t * n2; };
    for (const double d : {-1e-3, 1e-3}) {
      const double t = std::clamp(best + d, 0.0, 1.0);
      CHECK(phi(best) <= phi(t) + 1e-12);
    }
  }
}

TEST_CASE("vertex argmax") {
  const Setup s(17, 100);

  SUBCASE("singleton candidate set") {
    DiscreteMeasure nu;
    nu.add_atom(s.candidates[0], 1.0);
    const std::vector<Point> single{s.candidates[3]};
    CHECK(argmax_vertex(s.kernel, *s.emb, nu, single) == s.candidates[3]);
    CHECK_THROWS_AS(argmax_vertex(s.kernel, *s.emb, nu, {}), std::invalid_argument);
  }

  SUBCASE("two-sample embedding prefers the missing atom") {
    const auto emb2 = empirical_embedding(s.kernel, MeasureKind::trunc_gaussian, 2, 23);
    const auto pts = sample_measure(s.kernel.domain(), MeasureKind::trunc_gaussian, 2, 23);
    const Point a = pts[0], b = pts[1];
    DiscreteMeasure nu;
    nu.add_atom(b, 1.0);
    const std::vector<Point> cands{a, b};
    CHECK(argmax_vertex(s.kernel, *emb2, nu, cands) == a);
  }

  SUBCASE("matches an exhaustive scan") {
    DiscreteMeasure nu;
    nu.add_atom(s.candidates[0], 0.5);
    nu.add_atom(s.candidates[1], 0.5);
    const GramCache cache = GramCache::from_measure(s.kernel, *s.emb, nu);
    std::size_t best = 0;
    double best_val = -1e300;
    for (std::size_t i = 0; i < s.candidates.size(); ++i) {
      const double v = inner_residual_vs_atom(*s.emb, nu, cache, s.candidates[i]);
      if (v > best_val) {
        best_val = v;
        best = i;
      }
    }
    CHECK(argmax_vertex(s.kernel, *s.emb, nu, s.candidates) == s.candidates[best]);
  }
}

TEST_CASE("equal-weight herding yields 1/T weights") {
  const Setup s(5, 300);
  HerdingConfig cfg;
  cfg.variant = Variant::eq_weight;
  cfg.max_iterations = 6;
  const HerdingResult res = herd(cfg, s.kernel, *s.emb, s.candidates);
  REQUIRE(res.trace.rows.size() == 6);
  // with no re-selection every weight is exactly 1/6
  if (res.measure.size() == 6) {
    for (std::size_t i = 0; i < res.measure.size(); ++i) {
      CHECK(res.measure.weight(i) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
    }
  } else {
    // re-selections merge into multiples of 1/6
    for (std::size_t i = 0; i < res.measure.size(); ++i) {
      const double scaled = res.measure.weight(i) * 6.0;
      CHECK(scaled == doctest::Approx(std::round(scaled)).epsilon(1e-12));
    }
  }
  check_simplex_rows(res.trace);
  check_node_growth(res.trace);
}

TEST_CASE("a single-iteration run is the initial atom") {
  const Setup s(9, 50);
  HerdingConfig cfg;
  cfg.variant = Variant::eq_weight;
  cfg.max_iterations = 1;
  const HerdingResult res = herd(cfg, s.kernel, *s.emb, s.candidates);
  CHECK(res.trace.rows.size() == 1);
  CHECK(res.measure.size() == 1);
  CHECK(res.measure.weight(0) == 1.0);
  CHECK(res.trace.rows[0].node_count == 1);
}

TEST_CASE("line-search herding is monotone") {
  const Setup s(31);
  HerdingConfig cfg;
  cfg.variant = Variant::linesearch;
  cfg.max_iterations = 40;
  const HerdingResult res = herd(cfg, s.kernel, *s.emb, s.candidates);
  check_monotone_epsilon(res.trace);
  check_simplex_rows(res.trace);
  check_node_growth(res.trace);
  for (const TraceRow& r : res.trace.rows) {
    if (!std::isnan(r.gamma)) {
      CHECK(r.gamma >= 0.0);
      CHECK(r.gamma <= 1.0);
    }
  }
}

TEST_CASE("trace epsilons match a from-scratch recomputation") {
  const Setup s(77, 120);
  for (const char* method : {"linesearch", "fc", "gcos"}) {
    HerdingConfig cfg;
    if (std::string(method) == "linesearch") {
      cfg.variant = Variant::linesearch;
    } else if (std::string(method) == "fc") {
      cfg.variant = Variant::fully_corrective;
    } else {
      cfg.variant = Variant::accelerated;
      cfg.approximator = Approximator::gcos;
      cfg.delta = 0.0;
    }
    cfg.max_iterations = 15;
    const HerdingResult res = herd(cfg, s.kernel, *s.emb, s.candidates);
    const GramCache cache = GramCache::from_measure(s.kernel, *s.emb, res.measure);
    const double direct = mmd_squared(res.measure, *s.emb, cache);
    const double traced = 2.0 * res.trace.rows.back().epsilon;
    CHECK(traced == doctest::Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("fully corrective herding") {
  SUBCASE("reoptimized weights beat the plain line-search step") {
    const Setup s(13);
    HerdingConfig cfg;
    cfg.variant = Variant::fully_corrective;
    cfg.max_iterations = 25;
    const HerdingResult res = herd(cfg, s.kernel, *s.emb, s.candidates);
    check_monotone_epsilon(res.trace);
    check_simplex_rows(res.trace);
    const auto& rows = res.trace.rows;
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
      if (!std::isnan(rows[i].gamma) && rows[i].gamma < 1.0) {
        const double c = rows[i].cos_theta;
        const double linesearch_eps = rows[i].epsilon * (1.0 - c * c);
        CHECK(rows[i + 1].epsilon <= linesearch_eps + 1e-10);
      }
    }
  }

  SUBCASE("an exactly representable target is solved in a few iterations") {
    const Kernel k(KernelKind::gaussian, make_symmetric_box(2));
    const auto emb = empirical_embedding(k, MeasureKind::trunc_gaussian, 3, 99);
    const auto pts = sample_measure(k.domain(), MeasureKind::trunc_gaussian, 3, 99);
    HerdingConfig cfg;
    cfg.variant = Variant::fully_corrective;
    cfg.max_iterations = 5;
    const HerdingResult res = herd(cfg, k, *emb, pts);
    CHECK(res.trace.rows.back().epsilon <= 1e-14);
    CHECK(res.trace.converged);
    CHECK(res.trace.rows.back().fc_residual <= 1e-8);
    CHECK(res.trace.rows.size() <= 4);  // init + 3 corrective steps
  }

  SUBCASE("orthogonality residual stays small on every iterate") {
    const Setup s(41);
    HerdingConfig cfg;
    cfg.variant = Variant::fully_corrective;
    cfg.max_iterations = 30;
    const HerdingResult res = herd(cfg, s.kernel, *s.emb, s.candidates);
    for (const TraceRow& r : res.trace.rows) {
      CHECK(r.fc_residual <= 1e-6);
    }
    // cross-check the last iterate against the contract-level operation
    const GramCache cache = GramCache::from_measure(s.kernel, *s.emb, res.measure);
    CHECK(fc_orthogonality_residual(res.measure, *s.emb, cache) <= 1e-6);
  }
}

TEST_CASE("accelerated herding") {
  SUBCASE("K_max = 1 keeps single-atom directions") {
    const Setup s(3);
    HerdingConfig cfg;
    cfg.variant = Variant::accelerated;
    cfg.approximator = Approximator::gcos;
    cfg.inner_rounds = 1;
    cfg.delta = 0.0;
    cfg.max_iterations = 20;
    const HerdingResult res = herd(cfg, s.kernel, *s.emb, s.candidates);
    check_monotone_epsilon(res.trace);
    for (const TraceRow& r : res.trace.rows) {
      if (!std::isnan(r.cos_theta)) CHECK(r.inner_rounds == 1);
    }
    // one new node at most per iteration, like vanilla herding
    check_node_growth(res.trace);
  }

  SUBCASE("contraction identity and simplex feasibility for every approximator") {
    const Setup s(8, 400);
    for (const Approximator ap :
         {Approximator::pmp, Approximator::gcos, Approximator::fc_pmp, Approximator::fc_gcos}) {
      HerdingConfig cfg;
      cfg.variant = Variant::accelerated;
      cfg.approximator = ap;
      cfg.inner_rounds = 6;
      cfg.delta =
          (ap == Approximator::pmp || ap == Approximator::fc_pmp) ? -1e-4 : 1e-4;
      cfg.max_iterations = 30;
      const HerdingResult res = herd(cfg, s.kernel, *s.emb, s.candidates);
      check_simplex_rows(res.trace);
      check_monotone_epsilon(res.trace);
      check_node_growth(res.trace);
      const auto& rows = res.trace.rows;
      for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        if (std::isnan(rows[i].gamma) || rows[i].gamma_clamped) continue;
        const double expected = (1.0 - rows[i].cos_theta * rows[i].cos_theta) * rows[i].epsilon;
        CHECK(std::abs(rows[i + 1].epsilon - expected) <= 1e-6 * std::max(rows[i].epsilon, 1e-300));
      }
    }
  }

  SUBCASE("gcos with delta = 0 dominates the best single vertex") {
    const Setup s(25, 300);
    HerdingConfig cfg;
    cfg.variant = Variant::accelerated;
    cfg.approximator = Approximator::gcos;
    cfg.inner_rounds = 8;
    cfg.delta = 0.0;
    cfg.max_iterations = 25;
    const HerdingResult res = herd(cfg, s.kernel, *s.emb, s.candidates);
    REQUIRE(res.trace.inner_cos.size() >= 10);
    for (std::size_t t = 0; t < res.trace.inner_cos.size(); ++t) {
      const auto& rounds = res.trace.inner_cos[t];
      REQUIRE_FALSE(rounds.empty());
      // rounds[0] is the best single-vertex align; the final direction must not fall below it
      CHECK(res.trace.rows[t].cos_theta >= rounds.front() - 1e-10);
      for (std::size_t k = 1; k < rounds.size(); ++k) {
        CHECK(rounds[k] >= rounds[k - 1] - 1e-10);
      }
    }
  }

  SUBCASE("runs stop once the target is reached exactly") {
    const Kernel k(KernelKind::gaussian, make_symmetric_box(2));
    const auto emb = empirical_embedding(k, MeasureKind::trunc_gaussian, 2, 12);
    const auto pts = sample_measure(k.domain(), MeasureKind::trunc_gaussian, 2, 12);
    HerdingConfig cfg;
    cfg.variant = Variant::accelerated;
    cfg.approximator = Approximator::fc_gcos;
    cfg.inner_rounds = 4;
    cfg.max_iterations = 50;
    const HerdingResult res = herd(cfg, k, *emb, pts);
    CHECK(res.trace.converged);
    CHECK(res.trace.rows.size() < 50);
    CHECK(res.trace.rows.back().epsilon <= 1e-10);
  }
}

TEST_CASE("runs are deterministic") {
  const Setup s(66, 150);
  HerdingConfig cfg;
  cfg.variant = Variant::accelerated;
  cfg.approximator = Approximator::gcos;
  cfg.inner_rounds = 5;
  cfg.delta = 1e-4;
  cfg.max_iterations = 12;
  const HerdingResult a = herd(cfg, s.kernel, *s.emb, s.candidates);
  const HerdingResult b = herd(cfg, s.kernel, *s.emb, s.candidates);
  REQUIRE(a.trace.rows.size() == b.trace.rows.size());
  for (std::size_t i = 0; i < a.trace.rows.size(); ++i) {
    CHECK(a.trace.rows[i].epsilon == b.trace.rows[i].epsilon);
    CHECK(a.trace.rows[i].node_count == b.trace.rows[i].node_count);
  }
  REQUIRE(a.measure.size() == b.measure.size());
  for (std::size_t i = 0; i < a.measure.size(); ++i) {
    CHECK(a.measure.weight(i) == b.measure.weight(i));
  }
}

TEST_CASE("re-selection merges nodes instead of growing the rule") {
  const Kernel k(KernelKind::gaussian, make_symmetric_box(2));
  const auto emb = analytic_embedding(k, MeasureKind::trunc_gaussian);
  const std::vector<Point> two{pt2(0.3, 0.0), pt2(-0.3, 0.0)};
  HerdingConfig cfg;
  cfg.variant = Variant::eq_weight;
  cfg.max_iterations = 9;
  const HerdingResult res = herd(cfg, k, *emb, two);
  CHECK(res.measure.size() <= 2);
  CHECK(res.trace.rows.back().node_count <= 2);
  CHECK(res.measure.weight_sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("variant-specific wrappers enforce their variants") {
  const Setup s(2, 30);
  HerdingConfig cfg;
  cfg.variant = Variant::accelerated;
  CHECK_THROWS_AS(herd_vanilla(cfg, s.kernel, *s.emb, s.candidates), std::invalid_argument);
  cfg.variant = Variant::linesearch;
  CHECK_THROWS_AS(herd_fully_corrective(cfg, s.kernel, *s.emb, s.candidates),
                  std::invalid_argument);
  CHECK_THROWS_AS(herd_accelerated(cfg, s.kernel, *s.emb, s.candidates),
                  std::invalid_argument);
  cfg.variant = Variant::accelerated;
  cfg.approximator = Approximator::gcos;
  cfg.delta = -0.5;  // cos rules require delta >= 0
  CHECK_THROWS_AS(herd(cfg, s.kernel, *s.emb, s.candidates), std::invalid_argument);
}
