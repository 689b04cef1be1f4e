// Release gate: every shipped claim checked end to end, one verdict line per
// criterion. Run time on one core is dominated by the three full training
// runs of criterion 5; --only N runs a single criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dft/baselines.hpp"
#include "dft/blr.hpp"
#include "dft/dft_training.hpp"
#include "dft/errors.hpp"
#include "dft/metrics.hpp"
#include "dft/nn.hpp"
#include "dft/prng.hpp"
#include "dft/runner.hpp"
#include "dft/score_matching.hpp"
#include "dft/targets.hpp"

using namespace dft;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  bool pass = true;
  std::vector<std::string> notes;

  void note(const std::string& s) { notes.push_back(s); }
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("FAILED: " + what);
    }
  }
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// relative error with a floor tied to the gradient's own scale, so exact
// zeros compared against finite-difference noise don't blow up the ratio
double rel_err(double a, double b, double scale) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3 * scale, 1e-12});
}

double grads_scale(const NetGrads& g) {
  double s = 0.0;
  for (const auto& w : g.weights) s = std::max(s, w.cwiseAbs().maxCoeff());
  for (const auto& b : g.biases) s = std::max(s, b.cwiseAbs().maxCoeff());
  return s;
}

// ---- criterion 1: every analytic gradient against central differences ----

double weighted_output(const FeedForwardNet& net, const Mat& x, const Mat& w) {
  return (forward(net, x).array() * w.array()).sum();
}

void criterion_gradients(Criterion& c) {
  Prng prng(101, stream::verify);
  FeedForwardNet net = init_net({3, 5, 4}, Activation::elu, prng);  // 44 params
  Mat x = prng.normal_mat(6, 3);
  Mat cot = prng.normal_mat(6, 4);
  const double h = 1e-5;

  ForwardTape tape;
  forward(net, x, &tape);
  NetGrads grads = backward_params(net, tape, cot);
  double scale = grads_scale(grads);
  double worst = 0.0;
  for (int l = 0; l < net.n_layers(); ++l) {
    for (int r = 0; r < net.weights[l].rows(); ++r)
      for (int cc = 0; cc < net.weights[l].cols(); ++cc) {
        FeedForwardNet p = net, m = net;
        p.weights[l](r, cc) += h;
        m.weights[l](r, cc) -= h;
        double fd = (weighted_output(p, x, cot) - weighted_output(m, x, cot)) / (2 * h);
        worst = std::max(worst, rel_err(grads.weights[l](r, cc), fd, scale));
      }
    for (int r = 0; r < net.biases[l].size(); ++r) {
      FeedForwardNet p = net, m = net;
      p.biases[l][r] += h;
      m.biases[l][r] -= h;
      double fd = (weighted_output(p, x, cot) - weighted_output(m, x, cot)) / (2 * h);
      worst = std::max(worst, rel_err(grads.biases[l][r], fd, scale));
    }
  }
  c.note("parameter gradients: max rel err " + num(worst));
  c.require(worst < 1e-4, "parameter gradients off by " + num(worst));

  Mat jvp = vjp_input(net, tape, cot);
  double in_scale = jvp.cwiseAbs().maxCoeff();
  worst = 0.0;
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) {
      Mat p = x, m = x;
      p(i, j) += h;
      m(i, j) -= h;
      double fd = (weighted_output(net, p, cot) - weighted_output(net, m, cot)) / (2 * h);
      worst = std::max(worst, rel_err(jvp(i, j), fd, in_scale));
    }
  c.note("input vjp: max rel err " + num(worst));
  c.require(worst < 1e-4, "input vjp off by " + num(worst));

  // denoising score loss, frozen perturbation
  FeedForwardNet score_net = init_net({2, 8, 2}, Activation::gelu, prng);  // 42 params
  PerturbedBatch batch;
  batch.x0 = prng.normal_mat(10, 2);
  batch.eps = prng.normal_mat(10, 2);
  batch.sigma = 0.1;
  batch.x_sigma = batch.x0 + batch.sigma * batch.eps;
  NetGrads dsm_grads = zero_grads(score_net);
  dsm_loss_with_grads(score_net, batch, dsm_grads);
  scale = grads_scale(dsm_grads);
  worst = 0.0;
  for (int l = 0; l < score_net.n_layers(); ++l)
    for (int r = 0; r < score_net.weights[l].rows(); ++r)
      for (int cc = 0; cc < score_net.weights[l].cols(); ++cc) {
        FeedForwardNet p = score_net, m = score_net;
        p.weights[l](r, cc) += h;
        m.weights[l](r, cc) -= h;
        double fd = (dsm_loss(p, batch) - dsm_loss(m, batch)) / (2 * h);
        worst = std::max(worst, rel_err(dsm_grads.weights[l](r, cc), fd, scale));
      }
  c.note("denoising score-loss gradients: max rel err " + num(worst));
  c.require(worst < 1e-4, "denoising score-loss gradients off by " + num(worst));

  // full sampler gradient: analytic surrogate pushed through the net vs the
  // finite difference of the frozen-noise objective
  auto target = make_target("mog2");
  FeedForwardNet sampler = init_net({2, 6, 2}, Activation::elu, prng);  // 32 params
  Mat z = prng.normal_mat(8, 2);
  Mat eps = prng.normal_mat(8, 2);
  DftConfig cfg;
  auto objective = [&](const FeedForwardNet& s) {
    Mat xs = forward(s, z) + cfg.sigma * eps;
    Mat cvals = (-1.0 / cfg.sigma) * eps;
    double total = 0.0;
    for (int i = 0; i < z.rows(); ++i) {
      Vec xi = xs.row(i).transpose();
      Vec sq = target->score(xi);
      Vec sp = forward(score_net, xi.transpose()).row(0).transpose();
      Vec r1 = sq - sp;
      Vec r2 = sp - cvals.row(i).transpose();
      total += cfg.lambda1 * r1.squaredNorm() + cfg.lambda2 * 2.0 * r1.dot(r2);
    }
    return total / z.rows();
  };
  PerturbedBatch pb;
  pb.x0 = forward(sampler, z);
  pb.eps = eps;
  pb.sigma = cfg.sigma;
  pb.x_sigma = pb.x0 + pb.sigma * pb.eps;
  NetGrads sg = sampler_grad(sampler, z, surrogate_gradient(*target, score_net, pb, cfg).g_x);
  scale = grads_scale(sg);
  worst = 0.0;
  for (int l = 0; l < sampler.n_layers(); ++l)
    for (int r = 0; r < sampler.weights[l].rows(); ++r)
      for (int cc = 0; cc < sampler.weights[l].cols(); ++cc) {
        FeedForwardNet p = sampler, m = sampler;
        p.weights[l](r, cc) += h;
        m.weights[l](r, cc) -= h;
        double fd = (objective(p) - objective(m)) / (2 * h);
        worst = std::max(worst, rel_err(sg.weights[l](r, cc), fd, scale));
      }
  c.note("end-to-end sampler gradient: max rel err " + num(worst));
  c.require(worst < 1e-3, "end-to-end sampler gradient off by " + num(worst));
}

// ---- criterion 2: score-gradient identity on the linear-Gaussian family ----

void criterion_identity(Criterion& c) {
  auto target = make_target("gaussian");
  const double sigma = 0.1;
  const long n = 1000000;

  {
    Prng prng(7, stream::verify);
    Grad2Report rep = verify_grad2_identity(*target, Mat::Identity(2, 2), Vec::Zero(2), sigma,
                                            n, 1e-3, 0.05, prng);
    c.note("identity map: max rel err " + num(rep.max_rel_error) +
           (rep.conclusive ? " (conclusive)" : " (INCONCLUSIVE)"));
    c.require(rep.conclusive, "identity-map certification inconclusive at n=1e6");
    c.require(rep.max_rel_error < 0.05, "identity-map rel err " + num(rep.max_rel_error));
  }
  {
    Prng prng(8, stream::verify);
    Mat A(2, 2);
    A << 1.3, 0.4, -0.2, 0.8;
    Vec b(2);
    b << 0.5, -0.7;
    Grad2Report rep = verify_grad2_identity(*target, A, b, sigma, n, 1e-3, 0.05, prng);
    c.note("random affine map: max rel err " + num(rep.max_rel_error) +
           (rep.conclusive ? " (conclusive)" : " (INCONCLUSIVE)"));
    c.require(rep.conclusive, "affine-map certification inconclusive at n=1e6");
    c.require(rep.max_rel_error < 0.05, "affine-map rel err " + num(rep.max_rel_error));
  }

  Mat A(2, 2);
  A << 0.9, 0.2, 0.1, 1.1;
  Vec b(2);
  b << 0.3, -0.1;
  Prng net_rng(9, stream::verify);
  FeedForwardNet u_net = init_net({2, 6, 2}, Activation::gelu, net_rng);
  struct Field {
    const char* label;
    std::function<Vec(const Vec&)> u;
  };
  const Field fields[] = {
      {"constant", [](const Vec& x) { return Vec::Constant(x.size(), 1.5); }},
      {"linear", [](const Vec& x) { return Vec(x); }},
      {"random net",
       [&u_net](const Vec& x) { return Vec(forward(u_net, x.transpose()).row(0)); }},
  };
  for (const auto& f : fields) {
    Prng prng(10, stream::verify);
    Lemma1Report rep = verify_lemma1(A, b, f.u, sigma, 400000, prng);
    double z = std::abs(rep.estimate) / std::max(rep.std_error, 1e-300);
    c.note(std::string("orthogonality, u = ") + f.label + ": estimate " + num(rep.estimate) +
           " (" + num(z) + " standard errors)");
    c.require(z <= 3.0, std::string("u = ") + f.label + " drifts " + num(z) + " ses from 0");
  }
}

// ---- criterion 3: ksd against a from-scratch double loop ----

// written from the kernel algebra directly, sharing nothing with the library
double brute_ksd(const TargetDistribution& target, const Mat& x, double ck, double beta,
                 bool u_stat) {
  const long n = x.rows();
  const long d = x.cols();
  Mat scores(n, d);
  for (long i = 0; i < n; ++i) scores.row(i) = target.score(x.row(i).transpose()).transpose();
  double total = 0.0;
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) {
      if (u_stat && i == j) continue;
      Vec diff = (x.row(i) - x.row(j)).transpose();
      double s = ck * ck + diff.squaredNorm();
      double k = std::pow(s, beta);
      Vec gx = 2.0 * beta * std::pow(s, beta - 1.0) * diff;   // d k / d x_i
      Vec gy = -gx;                                           // d k / d y_j
      double tr = -4.0 * beta * (beta - 1.0) * std::pow(s, beta - 2.0) * diff.squaredNorm() -
                  2.0 * beta * double(d) * std::pow(s, beta - 1.0);
      Vec si = scores.row(i).transpose(), sj = scores.row(j).transpose();
      total += k * si.dot(sj) + si.dot(gy) + sj.dot(gx) + tr;
    }
  double denom = u_stat ? double(n) * double(n - 1) : double(n) * double(n);
  return std::sqrt(std::max(0.0, total / denom));
}

class ShiftedTarget final : public TargetDistribution {
 public:
  explicit ShiftedTarget(const TargetDistribution& base) : base_(base) {}
  int dim() const override { return base_.dim(); }
  std::string name() const override { return base_.name() + "+const"; }
  double log_density(const Vec& x) const override { return base_.log_density(x) + 7.0; }
  Vec score(const Vec& x) const override { return base_.score(x); }

 private:
  const TargetDistribution& base_;
};

void criterion_ksd_oracle(Criterion& c) {
  const char* names[] = {"gaussian", "mog2", "rosenbrock", "donut", "funnel", "squiggle"};
  double worst = 0.0;
  for (const char* name : names) {
    auto target = make_target(name);
    Prng prng(31, stream::eval);
    Mat x = prng.normal_mat(16, 2) * 1.5;
    for (bool u_stat : {true, false}) {
      KsdEstimator est;
      est.statistic =
          u_stat ? KsdEstimator::Stat::u_statistic : KsdEstimator::Stat::v_statistic;
      double lib = ksd(est, *target, x);
      double ref = brute_ksd(*target, x, est.c, est.beta, u_stat);
      worst = std::max(worst, std::abs(lib - ref));
    }
  }
  c.note("max |library - double loop| over 6 targets, both statistics: " + num(worst));
  c.require(worst < 1e-10, "ksd deviates from the brute-force value by " + num(worst));

  auto target = make_target("donut");
  Prng prng(32, stream::eval);
  KsdEstimator est;
  bool symmetric = true;
  for (int t = 0; t < 20; ++t) {
    Vec a = prng.normal_vec(2), b = prng.normal_vec(2);
    if (stein_kernel(est, *target, a, b) != stein_kernel(est, *target, b, a))
      symmetric = false;
  }
  c.note(symmetric ? "kernel symmetric on 20 random pairs"
                   : "kernel asymmetry detected");
  c.require(symmetric, "stein kernel is not symmetric");

  ShiftedTarget shifted(*target);
  Mat x = prng.normal_mat(16, 2);
  bool invariant = ksd(est, *target, x) == ksd(est, shifted, x);
  c.note(invariant ? "invariant under constant log-density shift"
                   : "shift invariance broken");
  c.require(invariant, "adding a constant to log density changed the ksd");
}

// ---- criterion 4: chain baseline ordering at the published settings ----

// svgd runs in the reference adagrad variant (the plain update needs far
// more than 500 steps to converge from a standard-normal init); scored with
// the v-statistic, whose iid floor matches the published chain values and
// which cannot tie at a clipped zero
void criterion_chain_ordering(Criterion& c) {
  const char* names[] = {"gaussian", "mog2", "rosenbrock", "donut", "funnel", "squiggle"};
  KsdEstimator est;
  est.statistic = KsdEstimator::Stat::v_statistic;
  int targets_passing = 0;
  for (const char* name : names) {
    auto target = make_target(name);
    int seed_wins = 0;
    for (uint64_t seed = 1; seed <= 5; ++seed) {
      ChainConfig cc;
      cc.n_particles = 500;
      cc.step_size = 0.01;
      cc.svgd_adagrad = true;
      auto run_ksd = [&](int steps, bool svgd, uint64_t k) {
        ChainConfig one = cc;
        one.n_steps = steps;
        Prng prng = Prng(seed, stream::chain).child(k);
        SampleBatch batch =
            svgd ? svgd_run(*target, one, prng) : langevin_run(*target, one, prng);
        return ksd(est, *target, batch.points);
      };
      double svgd500 = run_ksd(500, true, 0);
      double ld100 = run_ksd(100, false, 1);
      double svgd50 = run_ksd(50, true, 2);
      if (svgd500 < ld100 && svgd500 < svgd50) ++seed_wins;
    }
    bool ok = seed_wins >= 3;
    targets_passing += ok;
    c.note(std::string(name) + ": long svgd beats both on " + std::to_string(seed_wins) +
           "/5 seeds" + (ok ? "" : " (below majority)"));
  }
  c.require(targets_passing >= 4, "ordering holds on only " +
                                      std::to_string(targets_passing) + "/6 targets");
}

// ---- criterion 5: full training runs reach the shipped error bounds ----

TrainTrace desk_train(const std::string& target_name, uint64_t seed, const DftConfig& cfg,
                      GradMode mode = GradMode::full) {
  auto target = make_target(target_name);
  int dim = target->dim();
  Prng sampler_rng(seed, stream::sampler_init);
  Prng score_rng(seed, stream::score_init);
  auto sampler = init_net({2 * dim, 64, 64, dim}, Activation::elu, sampler_rng);
  auto score = init_net({dim, 64, 64, dim}, Activation::gelu, score_rng);
  DftConfig run_cfg = cfg;
  run_cfg.grad_mode = mode;
  Prng train_rng(seed, stream::latent);
  return train_dft(*target, sampler, score, run_cfg, train_rng).trace;
}

void criterion_training(Criterion& c) {
  struct Case {
    const char* target;
    double bound;
  };
  const Case cases[] = {{"gaussian", 0.15}, {"donut", 0.25}, {"funnel", 0.25}};
  for (const auto& cs : cases) {
    TrainTrace trace = desk_train(cs.target, 1, DftConfig{});
    c.require(trace.status == "ok", std::string(cs.target) + " run ended " + trace.status);
    if (trace.checkpoints.empty()) {
      c.require(false, std::string(cs.target) + " produced no checkpoints");
      continue;
    }
    double first = trace.checkpoints.front().mean;
    c.note(std::string(cs.target) + ": best ksd " + num(trace.best_ksd) + " (bound " +
           num(cs.bound) + "), first checkpoint " + num(first));
    c.require(trace.best_ksd <= cs.bound,
              std::string(cs.target) + " best ksd " + num(trace.best_ksd) + " > " +
                  num(cs.bound));
    c.require(trace.best_ksd < first,
              std::string(cs.target) + " running minimum never improved on checkpoint 0");
  }
}

// ---- criterion 6: both gradient modes train; the full mode wins a majority ----

void criterion_gradient_modes(Criterion& c) {
  DftConfig cfg;
  cfg.max_iter = 2500;
  cfg.eval_every = 500;
  cfg.batch_size = 500;
  int full_wins = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    TrainTrace full = desk_train("funnel", seed, cfg, GradMode::full);
    TrainTrace partial = desk_train("funnel", seed, cfg, GradMode::partial);
    c.require(full.status == "ok", "full mode aborted on seed " + std::to_string(seed));
    c.require(partial.status == "ok", "partial mode aborted on seed " + std::to_string(seed));
    bool win = full.best_ksd <= partial.best_ksd;
    full_wins += win;
    c.note("seed " + std::to_string(seed) + ": full " + num(full.best_ksd) + " vs partial " +
           num(partial.best_ksd) + (win ? "" : " (partial won)"));
  }
  c.require(full_wins >= 3,
            "full mode won only " + std::to_string(full_wins) + "/5 seeds");
}

// ---- criterion 7: posterior sampling matches a long chain on accuracy ----

void criterion_blr(Criterion& c) {
  FlatConfig flat{{"experiment", "blr"},
                  {"seed", "0"},
                  {"blr_synthetic_n", "2000"},
                  {"blr_synthetic_d", "10"},
                  {"blr_minibatch", "500"},
                  {"batch_size", "100"},
                  {"max_iter", "10000"},
                  {"eval_every", "2000"},
                  {"eval_samples", "100"},
                  {"eval_repeats", "1"},
                  {"score_lr", "0.0002"},
                  {"blr_eval_samples", "100"},
                  {"blr_baseline_steps", "1000"},
                  {"output_dir", "acceptance_tmp/blr"}};
  fs::remove_all("acceptance_tmp/blr");
  std::ostringstream log;
  RunOutcome out = run_experiment(resolve_config(flat), log);
  c.require(out.exit_code == 0, "run failed: " + out.error);
  if (out.exit_code != 0) return;

  std::ifstream f(out.output_dir / "metrics.json");
  nlohmann::json metrics = nlohmann::json::parse(f);
  double acc_dft = metrics["accuracy_dft"].get<double>();
  double acc_ld = metrics["accuracy_langevin"].get<double>();
  c.note("accuracy: trained sampler " + num(acc_dft) + ", 1000-step chain " + num(acc_ld));
  c.require(std::abs(acc_dft - acc_ld) <= 0.02,
            "accuracy gap " + num(std::abs(acc_dft - acc_ld)) + " > 0.02");

  const char* covertype = std::getenv("DFTSAMPLER_COVERTYPE_CSV");
  if (covertype && *covertype) {
    FlatConfig cov = flat;
    cov["blr_csv"] = covertype;
    cov["blr_label_column"] = "label";
    cov["output_dir"] = "acceptance_tmp/blr_covertype";
    fs::remove_all("acceptance_tmp/blr_covertype");
    std::ostringstream cov_log;
    RunOutcome cov_out = run_experiment(resolve_config(cov), cov_log);
    c.require(cov_out.exit_code == 0, "covertype run failed: " + cov_out.error);
    if (cov_out.exit_code == 0) {
      std::ifstream cf(cov_out.output_dir / "metrics.json");
      nlohmann::json cm = nlohmann::json::parse(cf);
      double acc = cm["accuracy_dft"].get<double>();
      c.note("covertype accuracy " + num(acc));
      c.require(acc >= 0.75, "covertype accuracy " + num(acc) + " < 0.75");
    }
  } else {
    c.note("covertype check skipped (DFTSAMPLER_COVERTYPE_CSV unset)");
  }
}

// ---- criterion 8: byte-identical artifacts on re-run ----

std::string file_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void criterion_determinism(Criterion& c) {
  struct Case {
    const char* label;
    FlatConfig flat;
  };
  const Case cases[] = {
      {"train_dft",
       {{"experiment", "train_dft"}, {"target", "donut"}, {"sampler_hidden", "16,16"},
        {"score_hidden", "16,16"}, {"max_iter", "120"}, {"batch_size", "128"},
        {"eval_every", "60"}, {"eval_samples", "64"}, {"eval_repeats", "2"},
        {"n_output_samples", "50"}, {"seed", "17"}}},
      {"run_mcmc",
       {{"experiment", "run_mcmc"}, {"target", "funnel"}, {"mcmc_sampler", "hmc"},
        {"n_particles", "60"}, {"n_steps", "40"}, {"seed", "17"}}},
      {"blr",
       {{"experiment", "blr"}, {"blr_synthetic_n", "150"}, {"blr_synthetic_d", "3"},
        {"blr_minibatch", "32"}, {"sampler_hidden", "16"}, {"score_hidden", "16"},
        {"max_iter", "80"}, {"batch_size", "32"}, {"eval_every", "40"},
        {"eval_samples", "32"}, {"eval_repeats", "1"}, {"blr_eval_samples", "20"},
        {"blr_baseline_steps", "40"}, {"seed", "17"}}},
  };
  for (const auto& cs : cases) {
    bool identical = true;
    fs::path dirs[2];
    for (int rep = 0; rep < 2; ++rep) {
      FlatConfig flat = cs.flat;
      dirs[rep] = fs::path("acceptance_tmp") /
                  (std::string(cs.label) + (rep ? "_again" : "_first"));
      fs::remove_all(dirs[rep]);
      flat["output_dir"] = dirs[rep].string();
      std::ostringstream log;
      RunOutcome out = run_experiment(resolve_config(flat), log);
      c.require(out.exit_code == 0,
                std::string(cs.label) + " run " + std::to_string(rep) + " failed");
    }
    for (const char* name : {"samples.csv", "metrics.json", "trace.jsonl"}) {
      if (file_bytes(dirs[0] / name) != file_bytes(dirs[1] / name)) {
        identical = false;
        c.require(false, std::string(cs.label) + ": " + name + " differs between runs");
      }
    }
    if (identical) c.note(std::string(cs.label) + ": all three artifacts byte-identical");
  }
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);

  struct Entry {
    int id;
    const char* label;
    void (*fn)(Criterion&);
  };
  const Entry entries[] = {
      {1, "gradient suite vs central finite differences", criterion_gradients},
      {2, "score-gradient identity certification", criterion_identity},
      {3, "ksd equals an independent double-loop oracle", criterion_ksd_oracle},
      {4, "chain baseline ordering (500 particles, step 0.01)", criterion_chain_ordering},
      {5, "full training runs reach the error bounds", criterion_training},
      {6, "full gradient mode beats the partial mode", criterion_gradient_modes},
      {7, "posterior accuracy within 2 points of a long chain", criterion_blr},
      {8, "byte-identical artifacts on re-run", criterion_determinism},
  };

  int failures = 0;
  for (const auto& e : entries) {
    if (only && e.id != only) continue;
    auto start = std::chrono::steady_clock::now();
    Criterion c;
    try {
      e.fn(c);
    } catch (const std::exception& ex) {
      c.pass = false;
      c.note(std::string("exception: ") + ex.what());
    }
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const auto& n : c.notes) std::cout << "    . " << n << "\n";
    std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << e.id << ". " << e.label << " ("
              << num(secs) << "s)\n"
              << std::flush;
    failures += !c.pass;
  }
  if (!only)
    std::cout << (failures ? "ACCEPTANCE: FAIL (" + std::to_string(failures) + " criteria)"
                           : "ACCEPTANCE: PASS (8/8)")
              << "\n";
  return failures;
}
