#pragma once
#include <memory>
#include <string>

#include "dft/types.hpp"

namespace dft {

// Un-normalized density with analytic gradient. score_vjp(x, v) returns
// v^T H(x) with H the Hessian of log_density; the base implementation
// differentiates score() centrally, concrete targets override it with the
// closed form where one is coded.
class TargetDistribution {
 public:
  virtual ~TargetDistribution() = default;

  virtual int dim() const = 0;
  virtual std::string name() const = 0;
  virtual double log_density(const Vec& x) const = 0;
  virtual Vec score(const Vec& x) const = 0;

  // validates inputs, then dispatches to score_vjp_impl
  Vec score_vjp(const Vec& x, const Vec& v) const;

  // row-wise convenience wrappers; virtual so targets with a stochastic
  // likelihood can pin one subsample per batch call
  virtual Mat score_batch(const Mat& x) const;
  virtual Mat score_vjp_batch(const Mat& x, const Mat& v) const;

 protected:
  virtual Vec score_vjp_impl(const Vec& x, const Vec& v) const;
  void check_point(const Vec& x) const;
};

// one of: gaussian, mog2, rosenbrock, donut, funnel, squiggle
std::unique_ptr<TargetDistribution> make_target(const std::string& name);

}  // namespace dft
