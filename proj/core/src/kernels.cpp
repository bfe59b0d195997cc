#include "kherd/kernels.hpp"

#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

#include "kherd/rng.hpp"

namespace kherd {

namespace {

constexpr double kSphereNormTol = 1e-12;
constexpr double kBoxTol = 1e-12;
constexpr double kSqrt3 = 1.7320508075688772;

// 64-point Gauss-Legendre rule on [-1, 1]; positive half, mirrored on use.
// Nodes/weights from the standard tables, 16 significant digits.
constexpr int kGlHalf = 32;
constexpr double kGlNode[kGlHalf] = {
    0.0243502926634244, 0.0729931217877990, 0.1214628192961206, 0.1696444204239928,
    0.2174236437400071, 0.2646871622087674, 0.3113228719902110, 0.3572201583376681,
    0.4022701579639916, 0.4463660172534641, 0.4894031457070530, 0.5312794640198946,
    0.5718956462026340, 0.6111553551723933, 0.6489654712546573, 0.6852363130542333,
    0.7198818501716109, 0.7528199072605319, 0.7839723589433414, 0.8132653151227975,
    0.8406292962525803, 0.8659993981540928, 0.8893154459951141, 0.9105221370785028,
    0.9295691721319396, 0.9464113748584028, 0.9610087996520538, 0.9733268277899110,
    0.9833362538846260, 0.9910133714767443, 0.9963401167719553, 0.9993050417357722};
constexpr double kGlWeight[kGlHalf] = {
    0.0486909570091397, 0.0485754674415034, 0.0483447622348030, 0.0479993885964583,
    0.0475401657148303, 0.0469681828162100, 0.0462847965813144, 0.0454916279274181,
    0.0445905581637566, 0.0435837245293235, 0.0424735151236536, 0.0412625632426235,
    0.0399537411327203, 0.0385501531786156, 0.0370551285402400, 0.0354722132568824,
    0.0338051618371416, 0.0320579283548516, 0.0302346570724025, 0.0283396726142595,
    0.0263774697150547, 0.0243527025687109, 0.0222701738083833, 0.0201348231535302,
    0.0179517157756973, 0.0157260304760247, 0.0134630478967186, 0.0111681394601311,
    0.0088467598263639, 0.0065044579689784, 0.0041470332605625, 0.0017832807216964};

// integral of f over [a, b] with the fixed 64-point rule
template <typename F>
double gauss_legendre(F f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double acc = 0.0;
  for (int i = 0; i < kGlHalf; ++i) {
    acc += kGlWeight[i] * (f(c - h * kGlNode[i]) + f(c + h * kGlNode[i]));
  }
  return acc * h;
}

// int_a^b exp(-(x - y)^2) exp(-x^2) dx, unnormalized
double gaussian_axis_integral(double y, double a, double b) {
  const double s2 = std::numbers::sqrt2;
  const double scale = std::exp(-0.5 * y * y) * std::sqrt(std::numbers::pi / 8.0);
  return scale * (std::erf(s2 * (b - 0.5 * y)) - std::erf(s2 * (a - 0.5 * y)));
}

// int_a^b exp(-x^2) dx
double gaussian_mass(double a, double b) {
  return 0.5 * std::sqrt(std::numbers::pi) * (std::erf(b) - std::erf(a));
}

}  // namespace

bool Domain::contains(const Point& x) const {
  if (kind == Kind::sphere) {
    return x.size() == 3 && std::abs(x.norm() - 1.0) <= kSphereNormTol;
  }
  if (x.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] < lower[i] - kBoxTol || x[i] > upper[i] + kBoxTol) return false;
  }
  return true;
}

Domain make_box(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  if (lower.size() != upper.size() || lower.size() == 0) {
    throw std::invalid_argument("box bounds must be nonempty and of equal dimension");
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < upper[i])) {
      throw std::invalid_argument("box requires lower < upper on every axis");
    }
  }
  Domain d;
  d.kind = Domain::Kind::box;
  d.lower = std::move(lower);
  d.upper = std::move(upper);
  return d;
}

Domain make_symmetric_box(int dim, double half_width) {
  if (dim < 1) throw std::invalid_argument("box dimension must be positive");
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(dim, -half_width);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(dim, half_width);
  return make_box(std::move(lo), std::move(hi));
}

Domain make_unit_sphere() {
  Domain d;
  d.kind = Domain::Kind::sphere;
  return d;
}

Kernel::Kernel(KernelKind kind, Domain domain, double rho)
    : kind_(kind), domain_(std::move(domain)), rho_(rho) {
  if (kind_ == KernelKind::sphere_distance && domain_.kind != Domain::Kind::sphere) {
    throw std::invalid_argument("sphere_distance kernel requires the sphere domain");
  }
  if (kind_ != KernelKind::sphere_distance && domain_.kind != Domain::Kind::box) {
    throw std::invalid_argument("gaussian/matern32 kernels require a box domain");
  }
  if (kind_ == KernelKind::matern32 && !(rho_ > 0.0)) {
    throw std::invalid_argument("matern32 requires rho > 0");
  }
}

void Kernel::check_in_domain(const Point& x) const {
  if (!domain_.contains(x)) {
    throw std::domain_error("point outside the kernel domain");
  }
}

double Kernel::eval_unchecked(const Point& x, const Point& y) const {
  switch (kind_) {
    case KernelKind::gaussian:
      return std::exp(-(x - y).squaredNorm());
    case KernelKind::matern32: {
      const double s = kSqrt3 * (x - y).norm() / rho_;
      return (1.0 + s) * std::exp(-s);
    }
    case KernelKind::sphere_distance:
      return 8.0 / 3.0 - (x - y).norm();
  }
  return 0.0;  // unreachable
}

double Kernel::operator()(const Point& x, const Point& y) const {
  check_in_domain(x);
  check_in_domain(y);
  return eval_unchecked(x, y);
}

std::vector<Point> sample_measure(const Domain& domain, MeasureKind measure,
                                  std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point> out;
  out.reserve(n);
  if (domain.kind == Domain::Kind::sphere) {
    if (measure != MeasureKind::uniform) {
      throw std::invalid_argument("only the uniform measure is supported on the sphere");
    }
    while (out.size() < n) {
      Point x(3);
      x[0] = rng.normal();
      x[1] = rng.normal();
      x[2] = rng.normal();
      const double r = x.norm();
      if (r < 1e-12) continue;
      out.push_back(x / r);
    }
    return out;
  }
  const int d = domain.dim();
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  for (std::size_t i = 0; i < n; ++i) {
    Point x(d);
    for (int j = 0; j < d; ++j) {
      if (measure == MeasureKind::uniform) {
        x[j] = rng.uniform(domain.lower[j], domain.upper[j]);
      } else {
        // density on each axis proportional to exp(-t^2): N(0, 1/2) restricted
        // to [lower_j, upper_j] by rejection
        double t = 0.0;
        do {
          t = rng.normal() * inv_sqrt2;
        } while (t < domain.lower[j] || t > domain.upper[j]);
        x[j] = t;
      }
    }
    out.push_back(std::move(x));
  }
  return out;
}

namespace {

class SphereUniformEmbedding final : public MeanEmbedding {
 public:
  explicit SphereUniformEmbedding(const Kernel& k) : kernel_(k) {}
  double operator()(const Point& y) const override {
    kernel_.check_in_domain(y);
    // E|x - y| over the uniform sphere is 4/3 for any unit y
    return 4.0 / 3.0;
  }
  double double_integral() const override { return 4.0 / 3.0; }
  Kind kind() const override { return Kind::analytic; }

 private:
  Kernel kernel_;
};

class GaussianBoxEmbedding final : public MeanEmbedding {
 public:
  explicit GaussianBoxEmbedding(const Kernel& k) : kernel_(k) {
    const Domain& dom = kernel_.domain();
    const int d = dom.dim();
    axis_mass_.resize(d);
    double z = 1.0;
    for (int j = 0; j < d; ++j) {
      const double a = dom.lower[j];
      const double b = dom.upper[j];
      axis_mass_[j] = gaussian_mass(a, b);
      // per-axis iint exp(-(x-y)^2) dmu dmu; the inner integral is the erf
      // closed form, the outer one is smooth so the fixed rule is exact to
      // machine precision
      const double i2 = gauss_legendre(
          [a, b](double y) {
            return std::exp(-y * y) * gaussian_axis_integral(y, a, b);
          },
          a, b);
      z *= i2 / (axis_mass_[j] * axis_mass_[j]);
    }
    double_integral_ = z;
  }

  double operator()(const Point& y) const override {
    kernel_.check_in_domain(y);
    const Domain& dom = kernel_.domain();
    double v = 1.0;
    for (int j = 0; j < dom.dim(); ++j) {
      v *= gaussian_axis_integral(y[j], dom.lower[j], dom.upper[j]) / axis_mass_[j];
    }
    return v;
  }
  double double_integral() const override { return double_integral_; }
  Kind kind() const override { return Kind::analytic; }

 private:
  Kernel kernel_;
  std::vector<double> axis_mass_;
  double double_integral_ = 0.0;
};

class EmpiricalEmbedding final : public MeanEmbedding {
 public:
  EmpiricalEmbedding(const Kernel& k, std::vector<Point> sample)
      : kernel_(k), sample_(std::move(sample)) {}

  double operator()(const Point& y) const override {
    kernel_.check_in_domain(y);
    double acc = 0.0;
    for (const Point& x : sample_) acc += kernel_.eval_unchecked(x, y);
    return acc / static_cast<double>(sample_.size());
  }

  double double_integral() const override {
    // O(m^2); computed on first use so that huge validation samples that only
    // ever evaluate mu_K stay cheap
    std::call_once(z_once_, [this] {
      const std::size_t m = sample_.size();
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        acc += kernel_.diag();
        for (std::size_t j = i + 1; j < m; ++j) {
          acc += 2.0 * kernel_.eval_unchecked(sample_[i], sample_[j]);
        }
      }
      z_ = acc / (static_cast<double>(m) * static_cast<double>(m));
    });
    return z_;
  }
  Kind kind() const override { return Kind::empirical; }

  const std::vector<Point>& sample() const { return sample_; }

 private:
  Kernel kernel_;
  std::vector<Point> sample_;
  mutable std::once_flag z_once_;
  mutable double z_ = 0.0;
};

}  // namespace

std::unique_ptr<MeanEmbedding> analytic_embedding(const Kernel& kernel,
                                                  MeasureKind measure) {
  if (kernel.kind() == KernelKind::sphere_distance && measure == MeasureKind::uniform) {
    return std::make_unique<SphereUniformEmbedding>(kernel);
  }
  if (kernel.kind() == KernelKind::gaussian && measure == MeasureKind::trunc_gaussian) {
    return std::make_unique<GaussianBoxEmbedding>(kernel);
  }
  throw std::invalid_argument(
      "no analytic mean embedding for this kernel/measure pair; use empirical_embedding");
}

std::unique_ptr<MeanEmbedding> empirical_embedding(const Kernel& kernel,
                                                   MeasureKind measure,
                                                   std::size_t m,
                                                   std::uint64_t seed) {
  if (m == 0) throw std::invalid_argument("empirical embedding needs m >= 1 samples");
  return std::make_unique<EmpiricalEmbedding>(
      kernel, sample_measure(kernel.domain(), measure, m, seed));
}

}  // namespace kherd
