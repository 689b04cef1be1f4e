#pragma once
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dft/metrics.hpp"
#include "dft/nn.hpp"
#include "dft/prng.hpp"
#include "dft/score_matching.hpp"
#include "dft/targets.hpp"
#include "dft/types.hpp"

namespace dft {

enum class GradMode { full, partial };
GradMode grad_mode_from_string(const std::string& name);
std::string to_string(GradMode m);

enum class ScoreLoss { dsm, sm };
ScoreLoss score_loss_from_string(const std::string& name);
std::string to_string(ScoreLoss s);

struct DftConfig {
  double sigma = 0.1;
  GradMode grad_mode = GradMode::full;
  double lambda1 = 1.0;  // ignored (treated as 0) in partial mode
  double lambda2 = 1.0;
  int score_steps_per_sampler_step = 2;
  int batch_size = 1000;
  long max_iter = 20000;
  double sampler_lr = 2e-4;
  double score_lr = 1e-3;
  long eval_every = 1000;
  int eval_n_samples = 500;
  int eval_repeats = 20;
  ScoreLoss score_loss = ScoreLoss::dsm;
  KsdEstimator ksd;
};

void validate_dft_config(const DftConfig& config);
double effective_lambda1(const DftConfig& config);

// x-space cotangent of lambda1 * ||s_q - s_phi||^2
//                    + lambda2 * 2 (s_q - s_phi)^T (s_phi - c)
// at x_sigma, with c = -eps/sigma and the score net's parameters frozen.
// l1 and l2 are the batch means of the two summands, kept for the trace.
struct SurrogateGradient {
  Mat g_x;
  double l1 = 0.0;
  double l2 = 0.0;
};

SurrogateGradient surrogate_gradient(const TargetDistribution& target,
                                     const FeedForwardNet& score_net, const PerturbedBatch& batch,
                                     const DftConfig& config);

// pathwise parameter gradient: backward of g_x through x0 = net(z), divided
// by the batch size (the sigma * eps shift has no parameter dependence)
NetGrads sampler_grad(const FeedForwardNet& sampler_net, const Mat& z_batch, const Mat& g_x);

struct TraceRow {
  long iteration = 0;
  double l1 = 0.0;
  double l2 = 0.0;
  double dsm_loss = 0.0;  // whichever score loss ran; NaN when skipped
  bool skipped = false;   // non-finite batch dropped without an update
};

struct KsdCheckpoint {
  long iteration = 0;
  double mean = 0.0;
  double std = 0.0;
};

struct TrainTrace {
  std::vector<TraceRow> rows;
  std::vector<KsdCheckpoint> checkpoints;
  std::string status = "ok";  // "ok" or "aborted"
  long best_iteration = -1;
  double best_ksd = std::numeric_limits<double>::infinity();
  double wall_time_sec = 0.0;  // never serialized; reruns must match byte for byte
};

// JSON-lines rendering: one record per iteration, KSD checkpoints interleaved
// at their iteration, one closing status record
std::string trace_to_jsonl(const TrainTrace& trace);

struct DftResult {
  FeedForwardNet sampler_final;
  FeedForwardNet sampler_best;  // lowest mean-KSD checkpoint (final if none)
  FeedForwardNet score_final;
  TrainTrace trace;
};

// Alternating loop: per iteration fit the score net to the frozen sampler's
// perturbed output (score_steps_per_sampler_step steps), then push the
// surrogate gradient through a fresh latent batch and Adam-update the
// sampler. A KSD checkpoint is appended every eval_every iterations. Two
// consecutive non-finite batches abort the run.
DftResult train_dft(const TargetDistribution& target, const FeedForwardNet& sampler_init,
                    const FeedForwardNet& score_init, const DftConfig& config, Prng& prng);

// Checks the score-derivative identity on the one family where both sides
// are in closed form: sampler x = Az + b, so the perturbed density is
// N(b, AA^T + sigma^2 I). lhs is the Monte-Carlo estimate of
// E[-2 (s_q - s_p)^T ds_p/dtheta_k], rhs the central finite difference of
// the frozen-score objective under common random numbers. Coordinates run
// over A row-major, then b.
struct Grad2Report {
  Vec lhs;
  Vec rhs;
  Vec rel_error;  // |lhs - rhs| / max(max|lhs|, max|rhs|, 1e-12)
  Vec se_diff;    // per-coordinate standard error of the paired difference
  double max_rel_error = 0.0;
  bool conclusive = false;  // 3 * se_diff resolves the tolerance everywhere
  long n_samples = 0;
};

Grad2Report verify_grad2_identity(const TargetDistribution& target, const Mat& A, const Vec& b,
                                  double sigma, long n_samples, double fd_step, double tolerance,
                                  Prng& prng);

// Monte-Carlo check of E[u(x_sigma)^T (s_p(x_sigma) - c)] = 0 on the same
// linear-Gaussian family, any vector field u
struct Lemma1Report {
  double estimate = 0.0;
  double std_error = 0.0;
  long n_samples = 0;
};

Lemma1Report verify_lemma1(const Mat& A, const Vec& b, const std::function<Vec(const Vec&)>& u,
                           double sigma, long n_samples, Prng& prng);

}  // namespace dft
