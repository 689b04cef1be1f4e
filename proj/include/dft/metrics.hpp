#pragma once
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "dft/prng.hpp"
#include "dft/targets.hpp"
#include "dft/types.hpp"

namespace dft {

// Stein discrepancy with the inverse multiquadric kernel
// k(x, y) = (c^2 + ||x - y||^2)^beta.
struct KsdEstimator {
  enum class Stat { u_statistic, v_statistic };
  double c = 1.0;
  double beta = -0.5;
  Stat statistic = Stat::u_statistic;
};

KsdEstimator::Stat ksd_stat_from_string(const std::string& name);
std::string to_string(KsdEstimator::Stat s);

struct KsdReport {
  double mean = 0.0;
  double std = 0.0;
  int n_repeats = 0;
  int n_samples_per_repeat = 0;
  bool single_repeat = false;  // std = 0 is a convention, not an estimate
  KsdEstimator estimator;
};

void to_json(nlohmann::ordered_json& j, const KsdReport& report);

// Stein-operator kernel u_p(x, y); symmetric in its arguments
double stein_kernel(const KsdEstimator& est, const TargetDistribution& target, const Vec& x,
                    const Vec& y);

// sqrt of the (clipped at 0) quadratic form, the convention used for all
// reported values; ksd_quadratic exposes the raw form
double ksd(const KsdEstimator& est, const TargetDistribution& target, const Mat& samples);
double ksd_quadratic(const KsdEstimator& est, const TargetDistribution& target,
                     const Mat& samples);

// Anything that can produce sample batches on demand. draw() must throw
// DataError when it cannot supply the requested count.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual Mat draw(int n, Prng& prng) = 0;
};

// hands out consecutive slices of a fixed pool until it runs dry
class FixedPoolSource final : public SampleSource {
 public:
  explicit FixedPoolSource(Mat pool) : pool_(std::move(pool)) {}
  Mat draw(int n, Prng& prng) override;

 private:
  Mat pool_;
  int cursor_ = 0;
};

// adapts a lambda, e.g. a fresh MCMC run per repeat
class CallbackSource final : public SampleSource {
 public:
  explicit CallbackSource(std::function<Mat(int, Prng&)> fn) : fn_(std::move(fn)) {}
  Mat draw(int n, Prng& prng) override { return fn_(n, prng); }

 private:
  std::function<Mat(int, Prng&)> fn_;
};

// n_repeats independent KSD evaluations on fresh batches; each repeat gets
// its own child prng stream
KsdReport eval_protocol(const KsdEstimator& est, const TargetDistribution& target,
                        SampleSource& source, int n_samples, int n_repeats, Prng& prng);

}  // namespace dft
