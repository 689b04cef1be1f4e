#pragma once
#include "dft/nn.hpp"
#include "dft/prng.hpp"
#include "dft/types.hpp"

namespace dft {

// isotropic Gaussian perturbation x_sigma = x0 + sigma * eps
struct NoiseModel {
  double sigma = 0.1;
};

struct PerturbedBatch {
  Mat x0;
  Mat eps;
  Mat x_sigma;
  double sigma = 0.0;

  int rows() const { return int(x0.rows()); }
  int dim() const { return int(x0.cols()); }
};

PerturbedBatch perturb(const Mat& x0, const NoiseModel& noise, Prng& prng);

// score of N(x_sigma; x0, sigma^2 I) in x_sigma, i.e. -eps/sigma per row
Mat conditional_score(const PerturbedBatch& batch);

// mean over rows of ||s_phi(x_sigma) - conditional_score||^2
double dsm_loss(const FeedForwardNet& score_net, const PerturbedBatch& batch);

// loss plus its parameter gradient, the quantity dsm_step feeds to Adam
double dsm_loss_with_grads(const FeedForwardNet& score_net, const PerturbedBatch& batch,
                           NetGrads& grads);

// perturbs internally, takes one Adam step on the DSM loss, returns the
// pre-step loss
double dsm_step(FeedForwardNet& score_net, const Mat& x0, const NoiseModel& noise,
                AdamState& adam, Prng& prng);

// mean over rows of ||s_phi(x)||^2 + 2 div s_phi(x), exact divergence.
// Guarded to dim <= 8: the divergence costs dim VJP sweeps per evaluation.
double sm_loss(const FeedForwardNet& score_net, const Mat& x);

// loss plus parameter gradient (forward-over-reverse for the trace term)
double sm_loss_with_grads(const FeedForwardNet& score_net, const Mat& x, NetGrads& grads);

// one Adam step on sm_loss; same dim guard
double sm_step(FeedForwardNet& score_net, const Mat& x, AdamState& adam);

}  // namespace dft
