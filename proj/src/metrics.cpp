#include "dft/metrics.hpp"

#include <cmath>

#include "dft/errors.hpp"

namespace dft {

KsdEstimator::Stat ksd_stat_from_string(const std::string& name) {
  if (name == "u" || name == "u_statistic") return KsdEstimator::Stat::u_statistic;
  if (name == "v" || name == "v_statistic") return KsdEstimator::Stat::v_statistic;
  throw ConfigError("unknown ksd statistic '" + name + "'");
}

std::string to_string(KsdEstimator::Stat s) {
  return s == KsdEstimator::Stat::u_statistic ? "u_statistic" : "v_statistic";
}

void to_json(nlohmann::ordered_json& j, const KsdReport& report) {
  j = nlohmann::ordered_json{{"metric", "ksd"},
                             {"mean", report.mean},
                             {"std", report.std},
                             {"n_samples", report.n_samples_per_repeat},
                             {"n_repeats", report.n_repeats},
                             {"kernel", {{"c", report.estimator.c}, {"beta", report.estimator.beta}}},
                             {"statistic", to_string(report.estimator.statistic)}};
  if (report.single_repeat) j["std_note"] = "single repeat, std 0 by convention";
}

namespace {

void check_estimator(const KsdEstimator& est) {
  if (est.c <= 0) throw ConfigError("ksd: kernel offset c must be positive");
  if (est.beta <= -1 || est.beta >= 0) throw ConfigError("ksd: beta must lie in (-1, 0)");
}

// u_p(x, y) given precomputed scores, shared by stein_kernel and the
// double-loop estimators
inline double stein_term(const KsdEstimator& est, const Vec& x, const Vec& y, const Vec& sx,
                         const Vec& sy) {
  int d = int(x.size());
  Vec diff = x - y;
  double r2 = diff.squaredNorm();
  double base = est.c * est.c + r2;
  double k = std::pow(base, est.beta);
  double kp = est.beta * std::pow(base, est.beta - 1.0);   // d k / d r2
  double kpp = est.beta * (est.beta - 1.0) * std::pow(base, est.beta - 2.0);
  // grad_x k = 2 kp diff, grad_y k = -2 kp diff,
  // trace(grad_x grad_y k) = -2 kp d - 4 kpp r2
  // the two score-gradient terms are folded into one dot so the float
  // rounding is identical under (x, y) swap; every factor then only flips
  // sign, which IEEE arithmetic preserves exactly
  double out = sx.dot(sy) * k;
  out += (sy - sx).dot(diff) * (2.0 * kp);
  out += -2.0 * kp * d - 4.0 * kpp * r2;
  return out;
}

}  // namespace

double stein_kernel(const KsdEstimator& est, const TargetDistribution& target, const Vec& x,
                    const Vec& y) {
  check_estimator(est);
  if (!x.allFinite() || !y.allFinite()) throw NumericError("stein_kernel: non-finite input");
  return stein_term(est, x, y, target.score(x), target.score(y));
}

double ksd_quadratic(const KsdEstimator& est, const TargetDistribution& target,
                     const Mat& samples) {
  check_estimator(est);
  int n = int(samples.rows());
  bool u_mode = est.statistic == KsdEstimator::Stat::u_statistic;
  if (n < 2 && u_mode) throw ConfigError("ksd: u-statistic needs at least 2 samples");
  if (n < 1) throw ConfigError("ksd: empty sample set");

  Mat scores = target.score_batch(samples);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    Vec xi = samples.row(i).transpose();
    Vec si = scores.row(i).transpose();
    for (int j = 0; j < n; ++j) {
      if (u_mode && j == i) continue;
      total += stein_term(est, xi, samples.row(j).transpose(), si, scores.row(j).transpose());
    }
  }
  double denom = u_mode ? double(n) * (n - 1) : double(n) * n;
  return total / denom;
}

double ksd(const KsdEstimator& est, const TargetDistribution& target, const Mat& samples) {
  return std::sqrt(std::max(0.0, ksd_quadratic(est, target, samples)));
}

Mat FixedPoolSource::draw(int n, Prng&) {
  if (cursor_ + n > pool_.rows())
    throw DataError("sample pool exhausted: requested " + std::to_string(n) + ", only " +
                    std::to_string(pool_.rows() - cursor_) + " of " +
                    std::to_string(pool_.rows()) + " left");
  Mat out = pool_.middleRows(cursor_, n);
  cursor_ += n;
  return out;
}

KsdReport eval_protocol(const KsdEstimator& est, const TargetDistribution& target,
                        SampleSource& source, int n_samples, int n_repeats, Prng& prng) {
  check_estimator(est);
  if (n_repeats < 1) throw ConfigError("eval_protocol: n_repeats must be positive");
  if (n_samples < 2) throw ConfigError("eval_protocol: need at least 2 samples per repeat");

  Vec values(n_repeats);
  for (int r = 0; r < n_repeats; ++r) {
    Prng repeat_rng = prng.child(r);
    Mat batch = source.draw(n_samples, repeat_rng);
    if (batch.rows() != n_samples)
      throw DataError("eval_protocol: source produced " + std::to_string(batch.rows()) +
                      " samples, wanted " + std::to_string(n_samples));
    values[r] = ksd(est, target, batch);
  }

  KsdReport report;
  report.estimator = est;
  report.n_repeats = n_repeats;
  report.n_samples_per_repeat = n_samples;
  report.mean = values.mean();
  if (n_repeats > 1) {
    report.std = std::sqrt((values.array() - report.mean).square().sum() / (n_repeats - 1));
  } else {
    report.std = 0.0;
    report.single_repeat = true;
  }
  return report;
}

}  // namespace dft
