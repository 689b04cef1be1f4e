#include "dft/dft_training.hpp"

#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

#include "dft/errors.hpp"

namespace dft {

using ordered_json = nlohmann::ordered_json;

GradMode grad_mode_from_string(const std::string& name) {
  if (name == "full") return GradMode::full;
  if (name == "partial") return GradMode::partial;
  throw ConfigError("unknown grad_mode '" + name + "', expected full or partial");
}

std::string to_string(GradMode m) {
  return m == GradMode::full ? "full" : "partial";
}

ScoreLoss score_loss_from_string(const std::string& name) {
  if (name == "dsm") return ScoreLoss::dsm;
  if (name == "sm") return ScoreLoss::sm;
  throw ConfigError("unknown score_loss '" + name + "', expected dsm or sm");
}

std::string to_string(ScoreLoss s) {
  return s == ScoreLoss::dsm ? "dsm" : "sm";
}

void validate_dft_config(const DftConfig& c) {
  if (!(c.sigma > 0.0) || !std::isfinite(c.sigma)) throw ConfigError("sigma must be positive");
  if (!(c.lambda1 >= 0.0) || !(c.lambda2 >= 0.0) || !std::isfinite(c.lambda1) ||
      !std::isfinite(c.lambda2))
    throw ConfigError("lambda weights must be finite and >= 0");
  if (c.score_steps_per_sampler_step < 1)
    throw ConfigError("score_steps_per_sampler_step must be >= 1");
  if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (c.max_iter < 0) throw ConfigError("max_iter must be >= 0");
  if (!(c.sampler_lr > 0.0) || !(c.score_lr > 0.0))
    throw ConfigError("learning rates must be positive");
  if (c.eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (c.eval_n_samples < 2) throw ConfigError("eval_n_samples must be >= 2");
  if (c.eval_repeats < 1) throw ConfigError("eval_repeats must be >= 1");
}

double effective_lambda1(const DftConfig& c) {
  return c.grad_mode == GradMode::partial ? 0.0 : c.lambda1;
}

SurrogateGradient surrogate_gradient(const TargetDistribution& target,
                                     const FeedForwardNet& score_net, const PerturbedBatch& batch,
                                     const DftConfig& config) {
  if (batch.rows() < 1) throw ConfigError("surrogate_gradient: empty batch");
  if (batch.dim() != target.dim() || score_net.input_dim() != target.dim() ||
      score_net.output_dim() != target.dim())
    throw ShapeError("surrogate_gradient: dim mismatch between batch, target and score net");
  const double lam1 = effective_lambda1(config);
  const double lam2 = config.lambda2;
  const int n = batch.rows();

  ForwardTape tape;
  const Mat s_phi = forward(score_net, batch.x_sigma, &tape);
  const Mat s_q = target.score_batch(batch.x_sigma);
  const Mat c = conditional_score(batch);
  const Mat r1 = s_q - s_phi;
  const Mat r2 = s_phi - c;

  // both terms route through one target VJP and one net VJP:
  //   d/dx ||r1||^2            = 2 H_q r1 - 2 J_phi^T r1
  //   d/dx 2 r1^T r2 (c fixed) = 2 H_q r2 - 2 J_phi^T r2 + 2 J_phi^T r1
  const Mat cot_q = 2.0 * (lam1 * r1 + lam2 * r2);
  const Mat cot_phi = 2.0 * (lam2 * (r1 - r2) - lam1 * r1);

  SurrogateGradient out;
  out.g_x = target.score_vjp_batch(batch.x_sigma, cot_q) + vjp_input(score_net, tape, cot_phi);
  for (int i = 0; i < n; ++i)
    if (!out.g_x.row(i).allFinite())
      throw NumericError("surrogate gradient is non-finite at batch row " + std::to_string(i));
  out.l1 = r1.squaredNorm() / n;
  out.l2 = 2.0 * (r1.array() * r2.array()).sum() / n;
  return out;
}

NetGrads sampler_grad(const FeedForwardNet& sampler_net, const Mat& z_batch, const Mat& g_x) {
  if (z_batch.rows() != g_x.rows() || g_x.cols() != sampler_net.output_dim())
    throw ShapeError("sampler_grad: g_x shape does not match the latent batch");
  ForwardTape tape;
  forward(sampler_net, z_batch, &tape);
  NetGrads grads = backward_params(sampler_net, tape, g_x);
  const double inv_n = 1.0 / double(z_batch.rows());
  for (auto& w : grads.weights) w *= inv_n;
  for (auto& b : grads.biases) b *= inv_n;
  return grads;
}

std::string trace_to_jsonl(const TrainTrace& trace) {
  std::string out;
  size_t ci = 0;
  for (const auto& row : trace.rows) {
    ordered_json j;
    j["type"] = "iter";
    j["iteration"] = row.iteration;
    j["l1"] = row.l1;
    j["l2"] = row.l2;
    j["dsm_loss"] = row.dsm_loss;
    j["skipped"] = row.skipped;
    out += j.dump();
    out += '\n';
    while (ci < trace.checkpoints.size() &&
           trace.checkpoints[ci].iteration == row.iteration + 1) {
      const auto& ck = trace.checkpoints[ci++];
      ordered_json k;
      k["type"] = "ksd";
      k["iteration"] = ck.iteration;
      k["mean"] = ck.mean;
      k["std"] = ck.std;
      out += k.dump();
      out += '\n';
    }
  }
  ordered_json s;
  s["type"] = "status";
  s["status"] = trace.status;
  s["best_iteration"] = trace.best_iteration;
  s["best_ksd"] = trace.best_ksd;  // inf renders as null when no checkpoint ran
  out += s.dump();
  out += '\n';
  return out;
}

DftResult train_dft(const TargetDistribution& target, const FeedForwardNet& sampler_init,
                    const FeedForwardNet& score_init, const DftConfig& config, Prng& prng) {
  validate_dft_config(config);
  if (sampler_init.output_dim() != target.dim())
    throw ConfigError("sampler output dim " + std::to_string(sampler_init.output_dim()) +
                      " does not match target dim " + std::to_string(target.dim()));
  if (score_init.input_dim() != target.dim() || score_init.output_dim() != target.dim())
    throw ConfigError("score net must map target dim to target dim");

  DftResult res{sampler_init, sampler_init, score_init, {}};
  FeedForwardNet& sampler = res.sampler_final;
  FeedForwardNet& score = res.score_final;
  TrainTrace& trace = res.trace;

  AdamState sampler_adam = make_adam(sampler, config.sampler_lr);
  AdamState score_adam = make_adam(score, config.score_lr);
  const NoiseModel noise{config.sigma};
  Prng z_rng = prng.child(0);
  Prng noise_rng = prng.child(1);
  Prng eval_rng = prng.child(2);
  const int zdim = sampler.input_dim();

  bool has_best = false;
  int consecutive_bad = 0;
  const auto t_start = std::chrono::steady_clock::now();

  for (long t = 0; t < config.max_iter; ++t) {
    TraceRow row;
    row.iteration = t;
    try {
      // (a) refresh the score net on a detached sampler batch
      const Mat x0 = forward(sampler, z_rng.normal_mat(config.batch_size, zdim));
      double score_loss = 0.0;
      for (int k = 0; k < config.score_steps_per_sampler_step; ++k) {
        if (config.score_loss == ScoreLoss::dsm) {
          score_loss = dsm_step(score, x0, noise, score_adam, noise_rng);
        } else {
          score_loss = sm_step(score, perturb(x0, noise, noise_rng).x_sigma, score_adam);
        }
      }

      // (b) push the surrogate gradient through a fresh latent batch
      const Mat z = z_rng.normal_mat(config.batch_size, zdim);
      const Mat x1 = forward(sampler, z);
      const PerturbedBatch pb = perturb(x1, noise, noise_rng);
      const SurrogateGradient sg = surrogate_gradient(target, score, pb, config);
      if (!std::isfinite(score_loss) || !std::isfinite(sg.l1) || !std::isfinite(sg.l2))
        throw NumericError("non-finite batch loss");
      adam_step(sampler, sampler_grad(sampler, z, sg.g_x), sampler_adam);

      row.l1 = sg.l1;
      row.l2 = sg.l2;
      row.dsm_loss = score_loss;
      consecutive_bad = 0;
    } catch (const NumericError&) {
      row.skipped = true;
      row.l1 = row.l2 = row.dsm_loss = std::numeric_limits<double>::quiet_NaN();
      ++consecutive_bad;
    }
    trace.rows.push_back(row);
    if (consecutive_bad >= 2) {
      trace.status = "aborted";
      break;
    }
    if (row.skipped || (t + 1) % config.eval_every != 0) continue;

    // (c) KSD checkpoint on the sampler's clean output
    CallbackSource source(
        [&](int n, Prng& p) { return forward(sampler, p.normal_mat(n, zdim)); });
    Prng ck_rng = eval_rng.child(uint64_t(trace.checkpoints.size()));
    const KsdReport rep = eval_protocol(config.ksd, target, source, config.eval_n_samples,
                                        config.eval_repeats, ck_rng);
    trace.checkpoints.push_back({t + 1, rep.mean, rep.std});
    if (!has_best || rep.mean < trace.best_ksd) {
      has_best = true;
      trace.best_ksd = rep.mean;
      trace.best_iteration = t + 1;
      res.sampler_best = sampler;
    }
  }

  if (!has_best) res.sampler_best = sampler;
  trace.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

namespace {

// closed-form pieces of the linear-Gaussian sampler x = Az + b + sigma * eps
struct LinearGaussian {
  Mat A;
  Vec b;
  double sigma;
  Mat sigma_inv;  // (AA^T + sigma^2 I)^-1

  LinearGaussian(const Mat& A_, const Vec& b_, double sig) : A(A_), b(b_), sigma(sig) {
    const int d = int(b.size());
    if (A.rows() != d || A.cols() != d) throw ShapeError("sampler matrix must be d x d");
    if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
    Mat cov = A * A.transpose() + sigma * sigma * Mat::Identity(d, d);
    sigma_inv = cov.llt().solve(Mat::Identity(d, d));
  }

  Vec score(const Vec& x) const { return -(sigma_inv * (x - b)); }
};

}  // namespace

Grad2Report verify_grad2_identity(const TargetDistribution& target, const Mat& A, const Vec& b,
                                  double sigma, long n_samples, double fd_step, double tolerance,
                                  Prng& prng) {
  if (!(fd_step > 0.0)) throw ConfigError("finite-difference step must be positive");
  if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  if (n_samples < 2) throw ConfigError("need at least 2 samples");
  const int d = int(b.size());
  if (target.dim() != d) throw ShapeError("target dim does not match the sampler");
  const LinearGaussian lg(A, b, sigma);
  const int n_coords = d * d + d;  // A row-major, then b

  // frozen-score objective evaluated at y with this sample's conditional score
  auto objective = [&](const Vec& y, const Vec& eps) {
    const Vec s0 = lg.score(y);
    const Vec diff = target.score(y) - s0;
    return 2.0 * diff.dot(s0 + eps / sigma);
  };

  Vec sum_lhs = Vec::Zero(n_coords), sum_rhs = Vec::Zero(n_coords);
  Vec sum_d = Vec::Zero(n_coords), sum_d2 = Vec::Zero(n_coords);

  const long chunk = 8192;
  for (long done = 0; done < n_samples;) {
    const long m = std::min(chunk, n_samples - done);
    const Mat Z = prng.normal_mat(int(m), d);
    const Mat E = prng.normal_mat(int(m), d);
    for (long s = 0; s < m; ++s) {
      const Vec z = Z.row(int(s)).transpose();
      const Vec eps = E.row(int(s)).transpose();
      const Vec x = A * z + b + sigma * eps;
      const Vec v = lg.sigma_inv * (x - b);
      const Vec r = target.score(x) + v;  // s_q - s_p with s_p = -v
      const Vec w = lg.sigma_inv * r;
      for (int k = 0; k < n_coords; ++k) {
        double lhs_i, step;
        Vec shift = Vec::Zero(d);
        if (k < d * d) {
          const int i = k / d, j = k % d;
          const Vec aj = A.col(j);
          // ds_p/dA_ij = sigma_inv (e_i a_j^T + a_j e_i^T) v
          lhs_i = -2.0 * (w[i] * aj.dot(v) + w.dot(aj) * v[i]);
          shift[i] = 1.0;
          step = fd_step * z[j];  // (A + h E_ij) z = Az + h z_j e_i
        } else {
          const int i = k - d * d;
          lhs_i = -2.0 * w[i];
          shift[i] = 1.0;
          step = fd_step;
        }
        const double f_plus = objective(x + step * shift, eps);
        const double f_minus = objective(x - step * shift, eps);
        const double rhs_i = (f_plus - f_minus) / (2.0 * fd_step);
        if (!std::isfinite(lhs_i) || !std::isfinite(rhs_i))
          throw NumericError("verify_grad2_identity: non-finite integrand");
        const double diff = lhs_i - rhs_i;
        sum_lhs[k] += lhs_i;
        sum_rhs[k] += rhs_i;
        sum_d[k] += diff;
        sum_d2[k] += diff * diff;
      }
    }
    done += m;
  }

  Grad2Report rep;
  rep.n_samples = n_samples;
  rep.lhs = sum_lhs / double(n_samples);
  rep.rhs = sum_rhs / double(n_samples);
  rep.rel_error.resize(n_coords);
  rep.se_diff.resize(n_coords);
  const double scale =
      std::max({rep.lhs.cwiseAbs().maxCoeff(), rep.rhs.cwiseAbs().maxCoeff(), 1e-12});
  rep.conclusive = true;
  for (int k = 0; k < n_coords; ++k) {
    rep.rel_error[k] = std::abs(rep.lhs[k] - rep.rhs[k]) / scale;
    const double mean_d = sum_d[k] / double(n_samples);
    const double var_d =
        std::max(0.0, (sum_d2[k] / double(n_samples) - mean_d * mean_d)) * double(n_samples) /
        double(n_samples - 1);
    rep.se_diff[k] = std::sqrt(var_d / double(n_samples));
    if (3.0 * rep.se_diff[k] > tolerance * scale) rep.conclusive = false;
  }
  rep.max_rel_error = rep.rel_error.maxCoeff();
  return rep;
}

Lemma1Report verify_lemma1(const Mat& A, const Vec& b, const std::function<Vec(const Vec&)>& u,
                           double sigma, long n_samples, Prng& prng) {
  if (n_samples < 2) throw ConfigError("need at least 2 samples");
  const int d = int(b.size());
  const LinearGaussian lg(A, b, sigma);

  double sum = 0.0, sum2 = 0.0;
  const long chunk = 8192;
  for (long done = 0; done < n_samples;) {
    const long m = std::min(chunk, n_samples - done);
    const Mat Z = prng.normal_mat(int(m), d);
    const Mat E = prng.normal_mat(int(m), d);
    for (long s = 0; s < m; ++s) {
      const Vec z = Z.row(int(s)).transpose();
      const Vec eps = E.row(int(s)).transpose();
      const Vec x = A * z + b + sigma * eps;
      const Vec ux = u(x);
      if (ux.size() != d) throw ShapeError("u(x) has the wrong dimension");
      const double g = ux.dot(lg.score(x) + eps / sigma);  // s_p - c, c = -eps/sigma
      if (!std::isfinite(g)) throw NumericError("verify_lemma1: non-finite integrand");
      sum += g;
      sum2 += g * g;
    }
    done += m;
  }

  Lemma1Report rep;
  rep.n_samples = n_samples;
  rep.estimate = sum / double(n_samples);
  const double var = std::max(0.0, sum2 / double(n_samples) - rep.estimate * rep.estimate) *
                     double(n_samples) / double(n_samples - 1);
  rep.std_error = std::sqrt(var / double(n_samples));
  return rep;
}

}  // namespace dft
