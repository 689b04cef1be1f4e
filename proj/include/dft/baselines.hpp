#pragma once
#include <string>

#include "dft/prng.hpp"
#include "dft/targets.hpp"
#include "dft/types.hpp"

namespace dft {

struct SampleBatch {
  Mat points;
  std::string sampler_id;
};

struct ChainConfig {
  enum class Init { standard_normal, provided };
  int n_particles = 500;
  int n_steps = 500;
  double step_size = 0.01;
  int hmc_leapfrog_steps = 5;
  Init init = Init::standard_normal;
  Mat init_points;  // read when init == provided; its row count wins
  // svgd only: normalize each coordinate's step by an adagrad accumulator
  // (momentum 0.9, fudge 1e-6), step_size acting as the master rate. This is
  // what the widely used particle-flow implementations do; the plain update
  // needs several times more steps to converge from a standard-normal init.
  bool svgd_adagrad = false;
};

struct ChainDiagnostics {
  long reinitialized = 0;      // langevin particles reset after going non-finite
  long accepted = 0;           // hmc
  long rejected = 0;           // hmc, includes nonfinite_rejects
  long nonfinite_rejects = 0;  // hmc proposals that left the finite domain
  long bandwidth_floored = 0;  // svgd steps where the median trick collapsed
};

// unadjusted Langevin: x' = x + eps * s(x) + sqrt(2 eps) * xi
SampleBatch langevin_run(const TargetDistribution& target, const ChainConfig& config, Prng& prng,
                         ChainDiagnostics* diag = nullptr);

// leapfrog + Metropolis correction, identity mass
SampleBatch hmc_run(const TargetDistribution& target, const ChainConfig& config, Prng& prng,
                    ChainDiagnostics* diag = nullptr);

// Stein variational gradient descent, RBF kernel exp(-||x-y||^2 / h) with the
// median-trick bandwidth recomputed every step, synchronous particle sweep
SampleBatch svgd_run(const TargetDistribution& target, const ChainConfig& config, Prng& prng,
                     ChainDiagnostics* diag = nullptr);

// lower median of the pairwise squared distances, divided by log(n + 1)
double median_bandwidth(const Mat& points);

}  // namespace dft
