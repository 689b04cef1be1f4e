#include "dft/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dft/errors.hpp"

namespace dft {

namespace {

void check_chain_config(const TargetDistribution& target, const ChainConfig& config) {
  if (config.n_steps < 0) throw ConfigError("n_steps must be >= 0");
  if (!(config.step_size > 0.0) || !std::isfinite(config.step_size))
    throw ConfigError("step_size must be positive and finite");
  if (config.init == ChainConfig::Init::provided) {
    if (config.init_points.rows() < 1) throw ConfigError("provided init has no particles");
    if (config.init_points.cols() != target.dim())
      throw ShapeError("init points have dim " + std::to_string(config.init_points.cols()) +
                       ", target has dim " + std::to_string(target.dim()));
    if (!config.init_points.allFinite()) throw NumericError("provided init has non-finite entries");
  } else if (config.n_particles < 1) {
    throw ConfigError("n_particles must be >= 1");
  }
}

Mat init_particles(const TargetDistribution& target, const ChainConfig& config, Prng& prng) {
  if (config.init == ChainConfig::Init::provided) return config.init_points;
  return prng.normal_mat(config.n_particles, target.dim());
}

bool row_finite(const Mat& m, int i) {
  return m.row(i).allFinite();
}

}  // namespace

SampleBatch langevin_run(const TargetDistribution& target, const ChainConfig& config, Prng& prng,
                         ChainDiagnostics* diag) {
  check_chain_config(target, config);
  const Mat init = init_particles(target, config, prng);
  Mat x = init;
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  const double eps = config.step_size;
  const double noise_scale = std::sqrt(2.0 * eps);
  for (int step = 0; step < config.n_steps; ++step) {
    const Mat scores = target.score_batch(x);
    const Mat xi = prng.normal_mat(n, d);
    x += eps * scores + noise_scale * xi;
    for (int i = 0; i < n; ++i) {
      if (row_finite(x, i)) continue;
      // diverged particle, restart it rather than poisoning the whole batch
      if (config.init == ChainConfig::Init::provided)
        x.row(i) = init.row(i);
      else
        x.row(i) = prng.normal_vec(d).transpose();
      if (diag) ++diag->reinitialized;
    }
  }
  return SampleBatch{std::move(x), "langevin"};
}

SampleBatch hmc_run(const TargetDistribution& target, const ChainConfig& config, Prng& prng,
                    ChainDiagnostics* diag) {
  check_chain_config(target, config);
  if (config.hmc_leapfrog_steps < 1) throw ConfigError("hmc_leapfrog_steps must be >= 1");
  Mat x = init_particles(target, config, prng);
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  const double eps = config.step_size;
  const int leap = config.hmc_leapfrog_steps;
  for (int step = 0; step < config.n_steps; ++step) {
    for (int i = 0; i < n; ++i) {
      const Vec p0 = prng.normal_vec(d);
      const double u = prng.uniform();  // drawn up front so rejects cost the same stream length
      const Vec x0 = x.row(i).transpose();
      const double h0 = -target.log_density(x0) + 0.5 * p0.squaredNorm();

      Vec q = x0;
      Vec p = p0 + 0.5 * eps * target.score(q);
      bool blew_up = !p.allFinite();
      for (int l = 0; l < leap && !blew_up; ++l) {
        q += eps * p;
        if (!q.allFinite()) {
          blew_up = true;
          break;
        }
        const Vec s = target.score(q);
        if (!s.allFinite()) {
          blew_up = true;
          break;
        }
        p += (l + 1 < leap ? eps : 0.5 * eps) * s;
      }

      bool accept = false;
      if (!blew_up) {
        const double h1 = -target.log_density(q) + 0.5 * p.squaredNorm();
        const double dh = h1 - h0;
        if (std::isfinite(dh))
          accept = dh <= 0.0 || u < std::exp(-dh);
        else
          blew_up = true;
      }
      if (accept) {
        x.row(i) = q.transpose();
        if (diag) ++diag->accepted;
      } else if (diag) {
        ++diag->rejected;
        if (blew_up) ++diag->nonfinite_rejects;
      }
    }
  }
  return SampleBatch{std::move(x), "hmc"};
}

double median_bandwidth(const Mat& points) {
  const int n = static_cast<int>(points.rows());
  if (n < 2) throw ConfigError("median bandwidth needs at least two points");
  std::vector<double> sq;
  sq.reserve(static_cast<size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) sq.push_back((points.row(i) - points.row(j)).squaredNorm());
  const size_t mid = (sq.size() - 1) / 2;  // lower median for even counts
  std::nth_element(sq.begin(), sq.begin() + static_cast<long>(mid), sq.end());
  return sq[mid] / std::log(static_cast<double>(n) + 1.0);
}

SampleBatch svgd_run(const TargetDistribution& target, const ChainConfig& config, Prng& prng,
                     ChainDiagnostics* diag) {
  check_chain_config(target, config);
  Mat x = init_particles(target, config, prng);
  const int n = static_cast<int>(x.rows());
  const double eps = config.step_size;
  constexpr double kBandwidthFloor = 1e-6;
  Mat grad_hist;
  for (int step = 0; step < config.n_steps; ++step) {
    double h = n >= 2 ? median_bandwidth(x) : 0.0;
    if (h < kBandwidthFloor) {
      h = kBandwidthFloor;
      if (diag) ++diag->bandwidth_floored;
    }
    const Mat scores = target.score_batch(x);
    Mat update = Mat::Zero(x.rows(), x.cols());
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const auto diff = x.row(j) - x.row(i);
        const double k = std::exp(-diff.squaredNorm() / h);
        // kernel-smoothed score plus the repulsive grad_{x_j} k term
        update.row(i) += k * scores.row(j) - (2.0 / h) * k * diff;
      }
      if (!row_finite(update, i))
        throw NumericError("svgd update is non-finite at particle " + std::to_string(i));
    }
    if (config.svgd_adagrad) {
      const Mat sq = (update / n).array().square();
      grad_hist = step == 0 ? sq : Mat(0.9 * grad_hist + 0.1 * sq);
      x.array() += eps * (update / n).array() / (1e-6 + grad_hist.array().sqrt());
    } else {
      x += (eps / n) * update;
    }
  }
  return SampleBatch{std::move(x), "svgd"};
}

}  // namespace dft
