#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <Eigen/Eigenvalues>
#include <functional>

#include "kherd/kernels.hpp"
#include "kherd/rng.hpp"

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

// independent oracle for the 1-D embedding integrals
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double eps, int depth) {
  const double c = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fc = f(c);
  std::function<double(double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fhi, double fmid, double whole,
          int d) -> double {
    const double mid = 0.5 * (lo + hi);
    const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
    const double flm = f(lm), frm = f(rm);
    const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
    const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
    if (d <= 0 || std::abs(left + right - whole) < 15.0 * eps) {
      return left + right + (left + right - whole) / 15.0;
    }
    return rec(lo, mid, flo, fmid, flm, left, d - 1) +
           rec(mid, hi, fmid, fhi, frm, right, d - 1);
  };
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
  return rec(a, b, fa, fb, fc, whole, depth);
}

Point random_box_point(Rng& rng, int d) {
  Point p(d);
  for (int i = 0; i < d; ++i) p[i] = rng.uniform(-1.0, 1.0);
  return p;
}

Point random_sphere_point(Rng& rng) {
  Point p = pt3(rng.normal(), rng.normal(), rng.normal());
  return p / p.norm();
}

}  // namespace

TEST_CASE("kernel point evaluations") {
  const Kernel gauss(KernelKind::gaussian, make_symmetric_box(2));
  CHECK(gauss(pt2(0.3, -0.2), pt2(0.3, -0.2)) == 1.0);

  const Kernel matern(KernelKind::matern32, make_symmetric_box(2));
  CHECK(matern(pt2(0.1, 0.4), pt2(0.1, 0.4)) == 1.0);
  // with rho = sqrt(3) the kernel reduces to (1 + r) exp(-r)
  const double r = (pt2(0.1, 0.4) - pt2(-0.3, 0.2)).norm();
  CHECK(matern(pt2(0.1, 0.4), pt2(-0.3, 0.2)) ==
        doctest::Approx((1.0 + r) * std::exp(-r)).epsilon(1e-15));

  const Kernel sphere(KernelKind::sphere_distance, make_unit_sphere());
  CHECK(sphere(pt3(1, 0, 0), pt3(-1, 0, 0)) == doctest::Approx(8.0 / 3.0 - 2.0));
  CHECK(sphere(pt3(0, 1, 0), pt3(0, 1, 0)) == doctest::Approx(8.0 / 3.0));
}

TEST_CASE("kernel domain checks") {
  const Kernel sphere(KernelKind::sphere_distance, make_unit_sphere());
  CHECK_THROWS_AS(sphere(pt3(1.5, 0, 0), pt3(1, 0, 0)), std::domain_error);
  const Kernel gauss(KernelKind::gaussian, make_symmetric_box(2));
  CHECK_THROWS_AS(gauss(pt2(1.5, 0), pt2(0, 0)), std::domain_error);
  CHECK_THROWS_AS(Kernel(KernelKind::matern32, make_symmetric_box(2), -1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_box(Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 1)),
                  std::invalid_argument);
}

TEST_CASE("kernel symmetry is exact") {
  Rng rng(11);
  const Kernel gauss(KernelKind::gaussian, make_symmetric_box(2));
  const Kernel matern(KernelKind::matern32, make_symmetric_box(2));
  const Kernel sphere(KernelKind::sphere_distance, make_unit_sphere());
  for (int i = 0; i < 100; ++i) {
    const Point a = random_box_point(rng, 2), b = random_box_point(rng, 2);
    CHECK(gauss(a, b) == gauss(b, a));
    CHECK(matern(a, b) == matern(b, a));
    const Point u = random_sphere_point(rng), v = random_sphere_point(rng);
    CHECK(sphere(u, v) == sphere(v, u));
  }
}

TEST_CASE("gram matrices are positive definite up to roundoff") {
  Rng rng(5);
  for (const auto kind : {KernelKind::gaussian, KernelKind::matern32}) {
    const Kernel k(kind, make_symmetric_box(2));
    const int n = 20;
    Eigen::MatrixXd G(n, n);
    std::vector<Point> pts;
    for (int i = 0; i < n; ++i) pts.push_back(random_box_point(rng, 2));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) G(i, j) = k(pts[i], pts[j]);
    }
    G = 0.5 * (G + G.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8);
  }
}

TEST_CASE("sphere embedding is the constant 4/3") {
  const Kernel k(KernelKind::sphere_distance, make_unit_sphere());
  const auto emb = analytic_embedding(k, MeasureKind::uniform);
  CHECK(emb->double_integral() == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  Rng rng(3);
  const double first = (*emb)(pt3(1, 0, 0));
  for (int i = 0; i < 50; ++i) {
    CHECK((*emb)(random_sphere_point(rng)) == first);
  }
  CHECK(first == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("gaussian embedding closed form matches the quadrature oracle") {
  const Kernel k1(KernelKind::gaussian, make_symmetric_box(1));
  const auto emb1 = analytic_embedding(k1, MeasureKind::trunc_gaussian);

  const double mass = adaptive_simpson([](double x) { return std::exp(-x * x); }, -1, 1,
                                       1e-13, 40);
  for (const double y : {0.0, 0.35, -0.8, 1.0}) {
    Point py(1);
    py << y;
    const double oracle = adaptive_simpson(
                              [y](double x) { return std::exp(-(x - y) * (x - y) - x * x); },
                              -1, 1, 1e-13, 40) /
                          mass;
    CHECK((*emb1)(py) == doctest::Approx(oracle).epsilon(1e-10));
  }
  Point zero1(1);
  zero1 << 0.0;
  CHECK((*emb1)(zero1) == doctest::Approx(0.8009168161301699).epsilon(1e-12));

  // product structure over axes
  const Kernel k2(KernelKind::gaussian, make_symmetric_box(2));
  const auto emb2 = analytic_embedding(k2, MeasureKind::trunc_gaussian);
  const double m1 = (*emb1)(zero1);
  CHECK((*emb2)(pt2(0, 0)) == doctest::Approx(m1 * m1).epsilon(1e-14));

  // iint K dmu dmu against a nested adaptive quadrature oracle
  const double inner_mass = mass;
  const double i2 = adaptive_simpson(
                        [&](double y) {
                          return std::exp(-y * y) *
                                 adaptive_simpson(
                                     [y](double x) {
                                       return std::exp(-(x - y) * (x - y) - x * x);
                                     },
                                     -1, 1, 1e-13, 40);
                        },
                        -1, 1, 1e-12, 40) /
                    (inner_mass * inner_mass);
  CHECK(emb1->double_integral() == doctest::Approx(i2).epsilon(1e-10));
  CHECK(emb2->double_integral() == doctest::Approx(i2 * i2).epsilon(1e-10));
  CHECK(emb1->double_integral() >= 0.0);
}

TEST_CASE("analytic embedding rejects unsupported pairs") {
  const Kernel matern(KernelKind::matern32, make_symmetric_box(2));
  CHECK_THROWS_WITH_AS(analytic_embedding(matern, MeasureKind::uniform),
                       doctest::Contains("empirical_embedding"), std::invalid_argument);
  const Kernel gauss(KernelKind::gaussian, make_symmetric_box(2));
  CHECK_THROWS_AS(analytic_embedding(gauss, MeasureKind::uniform), std::invalid_argument);
}

TEST_CASE("empirical embedding single atom and exactness") {
  const Kernel k(KernelKind::gaussian, make_symmetric_box(2));
  const auto emb = empirical_embedding(k, MeasureKind::trunc_gaussian, 1, 42);
  const auto sample = sample_measure(k.domain(), MeasureKind::trunc_gaussian, 1, 42);
  const Point y = pt2(0.2, -0.5);
  CHECK((*emb)(y) == k(sample[0], y));
  CHECK(emb->double_integral() == k(sample[0], sample[0]));

  CHECK_THROWS_AS(empirical_embedding(k, MeasureKind::trunc_gaussian, 0, 1),
                  std::invalid_argument);

  // evaluator equals a direct sum over the (regenerated) sample
  const auto emb64 = empirical_embedding(k, MeasureKind::trunc_gaussian, 64, 7);
  const auto s64 = sample_measure(k.domain(), MeasureKind::trunc_gaussian, 64, 7);
  double direct = 0.0;
  for (const Point& x : s64) direct += k(x, y);
  direct /= 64.0;
  CHECK((*emb64)(y) == doctest::Approx(direct).epsilon(1e-14));
}

TEST_CASE("empirical sphere embedding approaches 4/3") {
  const Kernel k(KernelKind::sphere_distance, make_unit_sphere());
  const auto emb = empirical_embedding(k, MeasureKind::uniform, 100000, 2024);
  CHECK(std::abs((*emb)(pt3(1, 0, 0)) - 4.0 / 3.0) <= 0.01);
}

TEST_CASE("empirical matern embedding is self-consistent across sample sizes") {
  const Kernel k(KernelKind::matern32, make_symmetric_box(2));
  const Point y = pt2(0.3, 0.1);
  const std::size_t m1 = 10000, m2 = 40000;
  const auto e1 = empirical_embedding(k, MeasureKind::uniform, m1, 555);
  const auto e2 = empirical_embedding(k, MeasureKind::uniform, m2, 777);

  auto sd_of = [&](std::uint64_t seed, std::size_t m) {
    const auto s = sample_measure(k.domain(), MeasureKind::uniform, m, seed);
    double mean = 0.0;
    for (const Point& x : s) mean += k(x, y);
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (const Point& x : s) {
      const double d = k(x, y) - mean;
      var += d * d;
    }
    return std::sqrt(var / static_cast<double>(m - 1));
  };
  const double se1 = sd_of(555, m1) / std::sqrt(static_cast<double>(m1));
  const double se2 = sd_of(777, m2) / std::sqrt(static_cast<double>(m2));
  const double pooled = std::sqrt(se1 * se1 + se2 * se2);
  CHECK(std::abs((*e1)(y) - (*e2)(y)) <= 3.0 * pooled);
}

TEST_CASE("measure samplers respect their supports and seeds") {
  const Domain box = make_symmetric_box(3);
  const auto pts = sample_measure(box, MeasureKind::trunc_gaussian, 2000, 9);
  for (const Point& p : pts) CHECK(box.contains(p));

  const auto sph = sample_measure(make_unit_sphere(), MeasureKind::uniform, 2000, 9);
  for (const Point& p : sph) CHECK(std::abs(p.norm() - 1.0) <= 1e-12);

  const auto a = sample_measure(box, MeasureKind::uniform, 500, 31);
  const auto b = sample_measure(box, MeasureKind::uniform, 500, 31);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

  // componentwise mean of a uniform sample stays near zero
  const std::size_t m = 10000;
  const auto u = sample_measure(make_symmetric_box(2), MeasureKind::uniform, m, 12);
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const Point& p : u) mean += p;
  mean /= static_cast<double>(m);
  const double bound = 4.0 / std::sqrt(12.0 * static_cast<double>(m));
  CHECK(std::abs(mean[0]) <= bound);
  CHECK(std::abs(mean[1]) <= bound);
}
