#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <vector>

namespace kherd {

using Point = Eigen::VectorXd;

enum class KernelKind { gaussian, matern32, sphere_distance };
enum class MeasureKind { uniform, trunc_gaussian };

// Integration domain: an axis-aligned box in R^d or the unit sphere in R^3.
struct Domain {
  enum class Kind { box, sphere };
  Kind kind = Kind::box;
  Eigen::VectorXd lower, upper;  // box only

  int dim() const {
    return kind == Kind::box ? static_cast<int>(lower.size()) : 3;
  }
  bool contains(const Point& x) const;
};

Domain make_box(Eigen::VectorXd lower, Eigen::VectorXd upper);
Domain make_symmetric_box(int dim, double half_width = 1.0);
Domain make_unit_sphere();

// Positive definite kernel together with its domain.
//
//   gaussian:        K(x, y) = exp(-|x - y|^2)
//   matern32:        K(x, y) = (1 + sqrt(3) r / rho) exp(-sqrt(3) r / rho),  r = |x - y|
//   sphere_distance: K(x, y) = 8/3 - |x - y|  on the unit sphere in R^3
class Kernel {
 public:
  Kernel(KernelKind kind, Domain domain, double rho = 1.7320508075688772);

  // checked evaluation: both points must lie in the domain
  double operator()(const Point& x, const Point& y) const;

  // hot path for points already validated against the domain
  double eval_unchecked(const Point& x, const Point& y) const;

  // K(x, x); constant for all three kernel families
  double diag() const { return kind_ == KernelKind::sphere_distance ? 8.0 / 3.0 : 1.0; }

  KernelKind kind() const { return kind_; }
  const Domain& domain() const { return domain_; }
  double rho() const { return rho_; }

  void check_in_domain(const Point& x) const;

 private:
  KernelKind kind_;
  Domain domain_;
  double rho_;
};

// i.i.d. draws from the base measure; uniform on box/sphere, or the density
// proportional to exp(-|x|^2) restricted to a box (per-axis rejection).
std::vector<Point> sample_measure(const Domain& domain, MeasureKind measure,
                                  std::size_t n, std::uint64_t seed);

// Embedding of the base measure: mu_K(y) = int K(x, y) dmu(x), plus the
// scalar <mu_K, mu_K> = iint K dmu dmu.
class MeanEmbedding {
 public:
  enum class Kind { analytic, empirical };
  virtual ~MeanEmbedding() = default;
  virtual double operator()(const Point& y) const = 0;
  virtual double double_integral() const = 0;
  virtual Kind kind() const = 0;
};

// Closed forms exist for (gaussian, trunc_gaussian on a box) via the error
// function and for (sphere_distance, uniform) where mu_K is the constant 4/3.
// Any other pairing throws std::invalid_argument pointing at
// empirical_embedding.
std::unique_ptr<MeanEmbedding> analytic_embedding(const Kernel& kernel,
                                                  MeasureKind measure);

// Plug-in embedding over m i.i.d. draws:
//   mu_K(y) = (1/m) sum_i K(x_i, y),
//   <mu_K, mu_K> = (1/m^2) sum_ij K(x_i, x_j)  (computed on first use).
std::unique_ptr<MeanEmbedding> empirical_embedding(const Kernel& kernel,
                                                   MeasureKind measure,
                                                   std::size_t m,
                                                   std::uint64_t seed);

}  // namespace kherd
