#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kherd/errors.hpp"
#include "kherd/measure.hpp"
#include "kherd/rng.hpp"
#include "kherd/simplexopt.hpp"

using namespace kherd;

namespace {

Point pt2(double a, double b) {
  Point p(2);
  p << a, b;
  return p;
}

Point pt3(double a, double b, double c) {
  Point p(3);
  p << a, b, c;
  return p;
}

Point random_box_point(Rng& rng) {
  return pt2(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
}

Point random_sphere_point(Rng& rng) {
  Point p = pt3(rng.normal(), rng.normal(), rng.normal());
  return p / p.norm();
}

// brute-force MMD^2 straight from the definition
double mmd2_direct(const DiscreteMeasure& m, const Kernel& k, const MeanEmbedding& emb) {
  double acc = emb.double_integral();
  for (std::size_t i = 0; i < m.size(); ++i) {
    acc -= 2.0 * m.weight(i) * emb(m.node(i));
    for (std::size_t j = 0; j < m.size(); ++j) {
      acc += m.weight(i) * m.weight(j) * k(m.node(i), m.node(j));
    }
  }
  return acc;
}

}  // namespace

TEST_CASE("duplicate atoms merge by weight") {
  DiscreteMeasure m;
  m.add_atom(pt2(0.1, 0.2), 0.4);
  m.add_atom(pt2(0.5, -0.3), 0.35);
  m.add_atom(pt2(0.1, 0.2 + 4e-13), 0.25);  // within the merge tolerance
  CHECK(m.size() == 2);
  CHECK(m.weight(0) == doctest::Approx(0.65).epsilon(1e-15));
  CHECK(m.weight_sum() == doctest::Approx(1.0).epsilon(1e-15));
  m.prune_below(0.4);
  CHECK(m.size() == 1);
}

TEST_CASE("gram cache stores exact kernel values") {
  const Kernel k(KernelKind::gaussian, make_symmetric_box(2));
  const auto emb = analytic_embedding(k, MeasureKind::trunc_gaussian);
  Rng rng(21);
  GramCache cache(k, *emb);
  std::vector<Point> pts;
  for (int i = 0; i < 8; ++i) {
    pts.push_back(random_box_point(rng));
    cache.add_node(pts.back());
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(cache.z(i) == (*emb)(pts[i]));
    for (std::size_t j = 0; j < pts.size(); ++j) {
      CHECK(cache.gram(i, j) == k(pts[i], pts[j]));
    }
  }
  std::vector<double> w(pts.size());
  double sum = 0.0;
  for (auto& x : w) {
    x = rng.uniform01();
    sum += x;
  }
  for (auto& x : w) x /= sum;
  std::vector<std::size_t> idx(pts.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  CHECK(cache.self_energy_exact(w) == doctest::Approx(cache.quad_form(idx, w)).epsilon(1e-12));
}

TEST_CASE("mmd of an exactly represented measure vanishes") {
  const Kernel k(KernelKind::gaussian, make_symmetric_box(2));
  const auto emb = empirical_embedding(k, MeasureKind::trunc_gaussian, 1, 5);
  const auto sample = sample_measure(k.domain(), MeasureKind::trunc_gaussian, 1, 5);
  DiscreteMeasure m;
  m.add_atom(sample[0], 1.0);
  const GramCache cache = GramCache::from_measure(k, *emb, m);
  CHECK(std::abs(mmd_squared(m, *emb, cache)) <= 1e-15);
}

TEST_CASE("mmd of a single sphere node is 4/3") {
  const Kernel k(KernelKind::sphere_distance, make_unit_sphere());
  const auto emb = analytic_embedding(k, MeasureKind::uniform);
  DiscreteMeasure m;
  m.add_atom(pt3(1, 0, 0), 1.0);
  const GramCache cache = GramCache::from_measure(k, *emb, m);
  CHECK(mmd_squared(m, *emb, cache) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("mmd matches a brute-force recomputation") {
  const Kernel k(KernelKind::gaussian, make_symmetric_box(2));
  const auto emb = analytic_embedding(k, MeasureKind::trunc_gaussian);
  Rng rng(87);
  DiscreteMeasure m;
  double sum = 0.0;
  std::vector<double> w;
  for (int i = 0; i < 5; ++i) {
    w.push_back(rng.uniform01());
    sum += w.back();
  }
  for (int i = 0; i < 5; ++i) m.add_atom(random_box_point(rng), w[i] / sum);
  const GramCache cache = GramCache::from_measure(k, *emb, m);
  CHECK(mmd_squared(m, *emb, cache) ==
        doctest::Approx(mmd2_direct(m, k, *emb)).epsilon(1e-12));
  CHECK(mmd_squared(m, *emb, cache) >= -1e-10);
}

TEST_CASE("mmd rejects a cache built for other nodes") {
  const Kernel k(KernelKind::gaussian, make_symmetric_box(2));
  const auto emb = analytic_embedding(k, MeasureKind::trunc_gaussian);
  DiscreteMeasure m;
  m.add_atom(pt2(0.1, 0.1), 1.0);
  DiscreteMeasure other;
  other.add_atom(pt2(-0.4, 0.2), 1.0);
  const GramCache cache = GramCache::from_measure(k, *emb, other);
  CHECK_THROWS_AS(mmd_squared(m, *emb, cache), InvariantError);
}

TEST_CASE("residual inner product against an atom") {
  const Kernel k(KernelKind::gaussian, make_symmetric_box(2));

  SUBCASE("atom equal to the measure gives zero") {
    const auto emb = analytic_embedding(k, MeasureKind::trunc_gaussian);
    const Point y = pt2(0.3, -0.1);
    DiscreteMeasure nu;
    nu.add_atom(y, 1.0);
    const GramCache cache = GramCache::from_measure(k, *emb, nu);
    CHECK(std::abs(inner_residual_vs_atom(*emb, nu, cache, y)) <= 1e-14);
  }

  SUBCASE("single-sample embedding expands to four kernel terms") {
    const auto emb = empirical_embedding(k, MeasureKind::trunc_gaussian, 1, 17);
    const Point a = sample_measure(k.domain(), MeasureKind::trunc_gaussian, 1, 17)[0];
    const Point b = pt2(-0.2, 0.6);
    DiscreteMeasure nu;
    nu.add_atom(b, 1.0);
    const GramCache cache = GramCache::from_measure(k, *emb, nu);
    const double expected = k(a, a) - k(a, b) - k(a, b) + k(b, b);
    CHECK(inner_residual_vs_atom(*emb, nu, cache, a) ==
          doctest::Approx(expected).epsilon(1e-14));
  }

  SUBCASE("random instance matches the direct expansion") {
    const auto emb = analytic_embedding(k, MeasureKind::trunc_gaussian);
    Rng rng(31);
    DiscreteMeasure nu;
    nu.add_atom(random_box_point(rng), 0.3);
    nu.add_atom(random_box_point(rng), 0.45);
    nu.add_atom(random_box_point(rng), 0.25);
    const GramCache cache = GramCache::from_measure(k, *emb, nu);
    const Point y = random_box_point(rng);
    double direct = (*emb)(y);
    for (std::size_t j = 0; j < nu.size(); ++j) {
      direct -= nu.weight(j) * k(y, nu.node(j));
      direct -= nu.weight(j) * (*emb)(nu.node(j));
    }
    for (std::size_t i = 0; i < nu.size(); ++i) {
      for (std::size_t j = 0; j < nu.size(); ++j) {
        direct += nu.weight(i) * nu.weight(j) * k(nu.node(i), nu.node(j));
      }
    }
    CHECK(inner_residual_vs_atom(*emb, nu, cache, y) ==
          doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("interpolation weights solve the gram system") {
  SUBCASE("single node") {
    const Kernel k(KernelKind::gaussian, make_symmetric_box(2));
    const auto emb = analytic_embedding(k, MeasureKind::trunc_gaussian);
    const Point x = pt2(0.4, 0.4);
    const auto res = optimal_weights({x}, k, *emb);
    CHECK(res.weights[0] == doctest::Approx((*emb)(x) / k(x, x)).epsilon(1e-14));
    CHECK_FALSE(res.jitter_applied);
  }

  SUBCASE("sphere single node has error^2 = 2/3") {
    const Kernel k(KernelKind::sphere_distance, make_unit_sphere());
    const auto emb = analytic_embedding(k, MeasureKind::uniform);
    const auto res = optimal_weights({pt3(1, 0, 0)}, k, *emb);
    // 4/3 - (4/3)^2 / (8/3)
    CHECK(res.worst_case_error2 == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  }

  SUBCASE("error identity holds on random well-conditioned instances") {
    const Kernel k(KernelKind::gaussian, make_symmetric_box(2));
    const auto emb = analytic_embedding(k, MeasureKind::trunc_gaussian);
    Rng rng(71);
    int done = 0;
    while (done < 50) {
      std::vector<Point> nodes;
      const int n = 2 + static_cast<int>(rng.next_u64() % 3);
      for (int i = 0; i < n; ++i) nodes.push_back(random_box_point(rng));
      double closest = 1e9;
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) closest = std::min(closest, (nodes[i] - nodes[j]).norm());
      }
      if (closest < 0.15) continue;  // keep the gram comfortably regular
      const auto res = optimal_weights(nodes, k, *emb);
      DiscreteMeasure m;
      for (int i = 0; i < n; ++i) m.add_atom(nodes[i], res.weights[i]);
      REQUIRE(m.size() == static_cast<std::size_t>(n));
      const GramCache cache = GramCache::from_measure(k, *emb, m);
      const double direct = mmd_squared(m, *emb, cache);
      CHECK(std::abs(res.worst_case_error2 - direct) <=
            1e-8 * std::max(1.0, std::abs(direct)));
      ++done;
    }
  }

  SUBCASE("coincident nodes raise a conditioning error naming the pair") {
    const Kernel k(KernelKind::gaussian, make_symmetric_box(2));
    const auto emb = analytic_embedding(k, MeasureKind::trunc_gaussian);
    const Point x = pt2(0.2, 0.2);
    try {
      optimal_weights({x, pt2(-0.5, 0.1), x}, k, *emb);
      FAIL("expected ConditioningError");
    } catch (const ConditioningError& e) {
      CHECK(e.node_i == 0);
      CHECK(e.node_j == 2);
    }
  }
}

TEST_CASE("orthogonality residual of simplex-optimal weights") {
  SUBCASE("single node is exactly stationary") {
    const Kernel k(KernelKind::gaussian, make_symmetric_box(2));
    const auto emb = analytic_embedding(k, MeasureKind::trunc_gaussian);
    DiscreteMeasure m;
    m.add_atom(pt2(0.1, -0.6), 1.0);
    const GramCache cache = GramCache::from_measure(k, *emb, m);
    CHECK(fc_orthogonality_residual(m, *emb, cache) <= 1e-14);
  }

  SUBCASE("exactly representable target is solved to zero residual") {
    const Kernel k(KernelKind::gaussian, make_symmetric_box(2));
    const auto emb = empirical_embedding(k, MeasureKind::trunc_gaussian, 4, 3);
    const auto nodes = sample_measure(k.domain(), MeasureKind::trunc_gaussian, 4, 3);
    Eigen::MatrixXd G(4, 4);
    Eigen::VectorXd z(4);
    for (int i = 0; i < 4; ++i) {
      z[i] = (*emb)(nodes[i]);
      for (int j = 0; j < 4; ++j) G(i, j) = k(nodes[i], nodes[j]);
    }
    const Eigen::VectorXd w = simplex_qp({G, z});
    DiscreteMeasure m;
    for (int i = 0; i < 4; ++i) m.add_atom(nodes[i], w[i]);
    const GramCache cache = GramCache::from_measure(k, *emb, m);
    CHECK(mmd_squared(m, *emb, cache) <= 1e-10);
    CHECK(fc_orthogonality_residual(m, *emb, cache) <= 1e-7);
  }

  SUBCASE("random sphere instance solved by the QP stays below 1e-6") {
    const Kernel k(KernelKind::sphere_distance, make_unit_sphere());
    const auto emb = analytic_embedding(k, MeasureKind::uniform);
    Rng rng(13);
    std::vector<Point> nodes;
    for (int i = 0; i < 6; ++i) nodes.push_back(random_sphere_point(rng));
    Eigen::MatrixXd G(6, 6);
    Eigen::VectorXd z(6);
    for (int i = 0; i < 6; ++i) {
      z[i] = (*emb)(nodes[i]);
      for (int j = 0; j < 6; ++j) G(i, j) = k(nodes[i], nodes[j]);
    }
    const Eigen::VectorXd w = simplex_qp({G, z});
    DiscreteMeasure m;
    for (int i = 0; i < 6; ++i) m.add_atom(nodes[i], w[i]);
    const GramCache cache = GramCache::from_measure(k, *emb, m);
    CHECK(fc_orthogonality_residual(m, *emb, cache) <= 1e-6);
  }

  SUBCASE("weights off the simplex are rejected") {
    const Kernel k(KernelKind::gaussian, make_symmetric_box(2));
    const auto emb = analytic_embedding(k, MeasureKind::trunc_gaussian);
    DiscreteMeasure m;
    m.add_atom(pt2(0.1, 0.2), 0.7);  // sums to 0.7
    const GramCache cache = GramCache::from_measure(k, *emb, m);
    CHECK_THROWS_AS(fc_orthogonality_residual(m, *emb, cache), std::invalid_argument);
  }
}

TEST_CASE("simplex-optimal weights beat equal weights") {
  const Kernel k(KernelKind::gaussian, make_symmetric_box(2));
  const auto emb = analytic_embedding(k, MeasureKind::trunc_gaussian);
  Rng rng(101);
  std::vector<Point> nodes;
  for (int i = 0; i < 7; ++i) nodes.push_back(random_box_point(rng));
  Eigen::MatrixXd G(7, 7);
  Eigen::VectorXd z(7);
  for (int i = 0; i < 7; ++i) {
    z[i] = (*emb)(nodes[i]);
    for (int j = 0; j < 7; ++j) G(i, j) = k(nodes[i], nodes[j]);
  }
  const Eigen::VectorXd w = simplex_qp({G, z});
  DiscreteMeasure opt, eq;
  for (int i = 0; i < 7; ++i) {
    opt.add_atom(nodes[i], w[i]);
    eq.add_atom(nodes[i], 1.0 / 7.0);
  }
  const GramCache c1 = GramCache::from_measure(k, *emb, opt);
  const GramCache c2 = GramCache::from_measure(k, *emb, eq);
  CHECK(mmd_squared(opt, *emb, c1) <= mmd_squared(eq, *emb, c2) + 1e-12);
}
