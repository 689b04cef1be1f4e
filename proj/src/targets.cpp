#include "dft/targets.hpp"

#include <cmath>

#include "dft/errors.hpp"

namespace dft {

void TargetDistribution::check_point(const Vec& x) const {
  if (x.size() != dim())
    throw ShapeError(name() + ": point has dim " + std::to_string(x.size()) + ", expected " +
                     std::to_string(dim()));
  if (!x.allFinite()) throw NumericError(name() + ": non-finite input point");
}

Vec TargetDistribution::score_vjp(const Vec& x, const Vec& v) const {
  check_point(x);
  if (v.size() != dim()) throw ShapeError(name() + ": cotangent dim mismatch");
  if (!v.allFinite()) throw NumericError(name() + ": non-finite cotangent");
  return score_vjp_impl(x, v);
}

Vec TargetDistribution::score_vjp_impl(const Vec& x, const Vec& v) const {
  // central difference of the score along v; H is symmetric so this is v^T H
  double h = 1e-5 * (1.0 + x.norm());
  return (score(x + h * v) - score(x - h * v)) / (2.0 * h);
}

Mat TargetDistribution::score_batch(const Mat& x) const {
  Mat out(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i) out.row(i) = score(x.row(i).transpose()).transpose();
  return out;
}

Mat TargetDistribution::score_vjp_batch(const Mat& x, const Mat& v) const {
  Mat out(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i)
    out.row(i) = score_vjp(x.row(i).transpose(), v.row(i).transpose()).transpose();
  return out;
}

namespace {

class Gaussian final : public TargetDistribution {
 public:
  int dim() const override { return 2; }
  std::string name() const override { return "gaussian"; }
  double log_density(const Vec& x) const override {
    check_point(x);
    return -0.5 * x.squaredNorm();
  }
  Vec score(const Vec& x) const override {
    check_point(x);
    return -x;
  }
  Vec score_vjp_impl(const Vec& x, const Vec& v) const override {
    return -v;
  }
};

// symmetric two-component mixture with modes at +/- mu, mu = (2, 0)
class Mog2 final : public TargetDistribution {
 public:
  Mog2() : mu_(2) { mu_ << 2.0, 0.0; }
  int dim() const override { return 2; }
  std::string name() const override { return "mog2"; }
  double log_density(const Vec& x) const override {
    check_point(x);
    double a = -0.5 * (x - mu_).squaredNorm();
    double b = -0.5 * (x + mu_).squaredNorm();
    double hi = std::max(a, b);
    return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
  }
  Vec score(const Vec& x) const override {
    check_point(x);
    // responsibilities collapse to tanh(x . mu) for equal weights
    return -x + mu_ * std::tanh(x.dot(mu_));
  }
  Vec score_vjp_impl(const Vec& x, const Vec& v) const override {
    double t = std::tanh(x.dot(mu_));
    return -v + mu_ * (mu_.dot(v) * (1.0 - t * t));
  }

 private:
  Vec mu_;
};

// banana-shaped ridge along x2 = x1^2 - 2
class Rosenbrock final : public TargetDistribution {
 public:
  int dim() const override { return 2; }
  std::string name() const override { return "rosenbrock"; }
  double log_density(const Vec& x) const override {
    check_point(x);
    double u = x[1] - x[0] * x[0] + 2.0;
    return -0.5 * (x[0] * x[0] / 10.0 + u * u);
  }
  Vec score(const Vec& x) const override {
    check_point(x);
    double u = x[1] - x[0] * x[0] + 2.0;
    Vec s(2);
    s[0] = -x[0] / 10.0 + 2.0 * x[0] * u;
    s[1] = -u;
    return s;
  }
  Vec score_vjp_impl(const Vec& x, const Vec& v) const override {
    double u = x[1] - x[0] * x[0] + 2.0;
    double h11 = -0.1 + 2.0 * u - 4.0 * x[0] * x[0];
    double h12 = 2.0 * x[0];
    Vec out(2);
    out[0] = h11 * v[0] + h12 * v[1];
    out[1] = h12 * v[0] - v[1];
    return out;
  }
};

// ring of radius 2.6 with radial variance 0.033
class Donut final : public TargetDistribution {
 public:
  int dim() const override { return 2; }
  std::string name() const override { return "donut"; }
  double log_density(const Vec& x) const override {
    check_point(x);
    double d = x.norm() - kRadius;
    return -d * d / (2.0 * kVar);
  }
  Vec score(const Vec& x) const override {
    check_point(x);
    double r = x.norm();
    if (r < 1e-12) return Vec::Zero(2);  // gradient undefined at the center
    return x * (-(r - kRadius) / (kVar * r));
  }
  Vec score_vjp_impl(const Vec& x, const Vec& v) const override {
    double r = x.norm();
    if (r < 1e-12) return Vec::Zero(2);
    double xv = x.dot(v);
    // H = -(1/var) [ x x^T / r^2 + (r - R)(I/r - x x^T / r^3) ]
    return (-1.0 / kVar) *
           (x * (xv / (r * r)) + (r - kRadius) * (v / r - x * (xv / (r * r * r))));
  }

 private:
  static constexpr double kRadius = 2.6;
  static constexpr double kVar = 0.033;
};

// funnel: x1 sets the log-scale of x2; the -x1/2 term makes the x1
// marginal exactly N(0, 9)
class Funnel final : public TargetDistribution {
 public:
  int dim() const override { return 2; }
  std::string name() const override { return "funnel"; }
  double log_density(const Vec& x) const override {
    check_point(x);
    return -x[0] * x[0] / 18.0 - x[1] * x[1] / (2.0 * std::exp(x[0])) - 0.5 * x[0];
  }
  Vec score(const Vec& x) const override {
    check_point(x);
    double e = std::exp(-x[0]);
    Vec s(2);
    s[0] = -x[0] / 9.0 + 0.5 * x[1] * x[1] * e - 0.5;
    s[1] = -x[1] * e;
    return s;
  }
  Vec score_vjp_impl(const Vec& x, const Vec& v) const override {
    double e = std::exp(-x[0]);
    double h11 = -1.0 / 9.0 - 0.5 * x[1] * x[1] * e;
    double h12 = x[1] * e;
    Vec out(2);
    out[0] = h11 * v[0] + h12 * v[1];
    out[1] = h12 * v[0] - e * v[1];
    return out;
  }
};

// narrow sine-wave ridge x2 = sin(2 x1)
class Squiggle final : public TargetDistribution {
 public:
  int dim() const override { return 2; }
  std::string name() const override { return "squiggle"; }
  double log_density(const Vec& x) const override {
    check_point(x);
    double u = x[1] - std::sin(2.0 * x[0]);
    return -x[0] * x[0] / 4.0 - u * u / (2.0 * kVar);
  }
  Vec score(const Vec& x) const override {
    check_point(x);
    double u = x[1] - std::sin(2.0 * x[0]);
    double c = std::cos(2.0 * x[0]);
    Vec s(2);
    s[0] = -0.5 * x[0] + 2.0 * u * c / kVar;
    s[1] = -u / kVar;
    return s;
  }
  Vec score_vjp_impl(const Vec& x, const Vec& v) const override {
    double u = x[1] - std::sin(2.0 * x[0]);
    double c = std::cos(2.0 * x[0]);
    double sn = std::sin(2.0 * x[0]);
    double h11 = -0.5 + (2.0 / kVar) * (-2.0 * c * c - 2.0 * u * sn);
    double h12 = 2.0 * c / kVar;
    Vec out(2);
    out[0] = h11 * v[0] + h12 * v[1];
    out[1] = h12 * v[0] - v[1] / kVar;
    return out;
  }

 private:
  static constexpr double kVar = 0.09;
};

}  // namespace

std::unique_ptr<TargetDistribution> make_target(const std::string& name) {
  if (name == "gaussian") return std::make_unique<Gaussian>();
  if (name == "mog2") return std::make_unique<Mog2>();
  if (name == "rosenbrock") return std::make_unique<Rosenbrock>();
  if (name == "donut") return std::make_unique<Donut>();
  if (name == "funnel") return std::make_unique<Funnel>();
  if (name == "squiggle") return std::make_unique<Squiggle>();
  throw ConfigError("unknown target '" + name + "'");
}

}  // namespace dft
