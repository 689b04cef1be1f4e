#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <sstream>

#include "dft/baselines.hpp"
#include "dft/blr.hpp"
#include "dft/dft_training.hpp"
#include "dft/errors.hpp"
#include "dft/metrics.hpp"
#include "dft/nn.hpp"
#include "dft/prng.hpp"
#include "dft/runner.hpp"
#include "dft/targets.hpp"

namespace py = pybind11;
using namespace dft;

namespace {

py::dict trace_dict(const TrainTrace& t) {
  py::list checkpoints;
  for (const auto& ck : t.checkpoints)
    checkpoints.append(
        py::dict(py::arg("iteration") = ck.iteration, py::arg("mean") = ck.mean,
                 py::arg("std") = ck.std));
  py::list l1, l2, score_loss;
  for (const auto& row : t.rows) {
    l1.append(row.l1);
    l2.append(row.l2);
    score_loss.append(row.dsm_loss);
  }
  return py::dict(py::arg("status") = t.status, py::arg("best_iteration") = t.best_iteration,
                  py::arg("best_ksd") = t.best_ksd, py::arg("checkpoints") = checkpoints,
                  py::arg("l1") = l1, py::arg("l2") = l2, py::arg("score_loss") = score_loss);
}

py::dict diag_dict(const ChainDiagnostics& d) {
  return py::dict(py::arg("reinitialized") = d.reinitialized, py::arg("accepted") = d.accepted,
                  py::arg("rejected") = d.rejected,
                  py::arg("nonfinite_rejects") = d.nonfinite_rejects,
                  py::arg("bandwidth_floored") = d.bandwidth_floored);
}

FeedForwardNet build_net(int in, const std::vector<int>& hidden, int out,
                         const std::string& activation, double leaky_slope, uint64_t seed,
                         uint64_t stream_id) {
  std::vector<int> dims;
  dims.push_back(in);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  Prng prng(seed, stream_id);
  return init_net(dims, activation_from_string(activation), prng, leaky_slope);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "one-step implicit samplers: training, chain baselines, evaluation";
  m.attr("__version__") = "0.1.0";

  py::register_exception<Error>(m, "Error");

  py::class_<TargetDistribution>(m, "Target")
      .def_property_readonly("dim", &TargetDistribution::dim)
      .def_property_readonly("name", &TargetDistribution::name)
      .def("log_density", &TargetDistribution::log_density, py::arg("x"))
      .def("score", &TargetDistribution::score, py::arg("x"))
      .def("score_batch", &TargetDistribution::score_batch, py::arg("x"),
           "score at each row of x")
      .def("__repr__", [](const TargetDistribution& t) {
        return "Target(" + t.name() + ", dim=" + std::to_string(t.dim()) + ")";
      });

  m.def("make_target", &make_target, py::arg("name"),
        "gaussian, mog2, rosenbrock, donut, funnel or squiggle");

  py::class_<BlrDataset>(m, "BlrDataset")
      .def(py::init<>())
      .def_readwrite("features", &BlrDataset::features)
      .def_readwrite("labels", &BlrDataset::labels)
      .def_readwrite("train_idx", &BlrDataset::train_idx)
      .def_readwrite("test_idx", &BlrDataset::test_idx)
      .def_readwrite("feature_names", &BlrDataset::feature_names)
      .def_readonly("warnings", &BlrDataset::warnings);

  m.def(
      "load_blr_csv",
      [](const std::string& path, const std::string& label_column, double test_fraction,
         uint64_t seed) {
        Prng prng(seed, stream::data_split);
        return load_blr_csv(path, label_column, test_fraction, prng);
      },
      py::arg("path"), py::arg("label_column") = "label", py::arg("test_fraction") = 0.2,
      py::arg("seed") = 0);

  py::class_<BlrPosterior, TargetDistribution>(m, "BlrPosterior")
      .def(py::init<BlrDataset, int>(), py::arg("dataset"), py::arg("minibatch_size") = 1)
      .def_property_readonly("feature_dim", &BlrPosterior::feature_dim)
      .def("minibatch_score", &BlrPosterior::minibatch_score, py::arg("xi"),
           py::arg("indices"), "posterior score with the likelihood term subsampled");

  m.def("blr_accuracy", &blr_accuracy, py::arg("posterior"), py::arg("xi_samples"),
        "test accuracy of the posterior-averaged predictive rule");

  py::class_<FeedForwardNet>(m, "Net")
      .def_property_readonly("layer_dims",
                             [](const FeedForwardNet& n) { return n.layer_dims; })
      .def_property_readonly("input_dim", &FeedForwardNet::input_dim)
      .def_property_readonly("output_dim", &FeedForwardNet::output_dim)
      .def_property_readonly("n_params", &FeedForwardNet::n_params)
      .def("__call__",
           [](const FeedForwardNet& n, const Mat& x) { return forward(n, x, nullptr); },
           py::arg("x"), "forward pass; one sample per row")
      .def("__repr__", [](const FeedForwardNet& n) {
        std::string s = "Net(";
        for (size_t i = 0; i < n.layer_dims.size(); ++i)
          s += (i ? "-" : "") + std::to_string(n.layer_dims[i]);
        return s + ", " + to_string(n.activation) + ")";
      });

  m.def(
      "make_net",
      [](const std::vector<int>& layer_dims, const std::string& activation, uint64_t seed,
         double leaky_slope) {
        Prng prng(seed, stream::sampler_init);
        return init_net(layer_dims, activation_from_string(activation), prng, leaky_slope);
      },
      py::arg("layer_dims"), py::arg("activation") = "elu", py::arg("seed") = 0,
      py::arg("leaky_slope") = 0.2);
  m.def("save_net", &save_net, py::arg("net"), py::arg("path"));
  m.def("load_net", &load_net, py::arg("path"));

  m.def(
      "sample",
      [](const FeedForwardNet& net, int n, uint64_t seed) {
        if (n < 0) throw ConfigError("sample: n must be >= 0");
        Prng prng(seed, stream::eval);
        return forward(net, prng.normal_mat(n, net.input_dim()), nullptr);
      },
      py::arg("net"), py::arg("n"), py::arg("seed") = 0,
      "push n fresh standard-normal latents through the net; matches the "
      "samples.csv draws of a run with the same seed");

  m.def(
      "ksd",
      [](const TargetDistribution& target, const Mat& samples, double c, double beta,
         const std::string& statistic) {
        KsdEstimator est{c, beta, ksd_stat_from_string(statistic)};
        return ksd(est, target, samples);
      },
      py::arg("target"), py::arg("samples"), py::arg("c") = 1.0, py::arg("beta") = -0.5,
      py::arg("statistic") = "u");

  py::class_<DftConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("sigma", &DftConfig::sigma)
      .def_property(
          "grad_mode", [](const DftConfig& c) { return to_string(c.grad_mode); },
          [](DftConfig& c, const std::string& s) { c.grad_mode = grad_mode_from_string(s); })
      .def_readwrite("lambda1", &DftConfig::lambda1)
      .def_readwrite("lambda2", &DftConfig::lambda2)
      .def_property(
          "score_loss", [](const DftConfig& c) { return to_string(c.score_loss); },
          [](DftConfig& c, const std::string& s) { c.score_loss = score_loss_from_string(s); })
      .def_readwrite("score_steps", &DftConfig::score_steps_per_sampler_step)
      .def_readwrite("batch_size", &DftConfig::batch_size)
      .def_readwrite("max_iter", &DftConfig::max_iter)
      .def_readwrite("sampler_lr", &DftConfig::sampler_lr)
      .def_readwrite("score_lr", &DftConfig::score_lr)
      .def_readwrite("eval_every", &DftConfig::eval_every)
      .def_readwrite("eval_samples", &DftConfig::eval_n_samples)
      .def_readwrite("eval_repeats", &DftConfig::eval_repeats);

  m.def(
      "train",
      [](const TargetDistribution& target, const DftConfig& config,
         const std::vector<int>& sampler_hidden, const std::vector<int>& score_hidden,
         int latent_dim, const std::string& sampler_activation,
         const std::string& score_activation, double leaky_slope, uint64_t seed) {
        int dim = target.dim();
        int zdim = latent_dim > 0 ? latent_dim : 2 * dim;
        auto sampler = build_net(zdim, sampler_hidden, dim, sampler_activation, leaky_slope,
                                 seed, stream::sampler_init);
        auto score = build_net(dim, score_hidden, dim, score_activation, leaky_slope, seed,
                               stream::score_init);
        Prng prng(seed, stream::latent);
        DftResult res = train_dft(target, sampler, score, config, prng);
        return py::dict(py::arg("sampler") = res.sampler_best,
                        py::arg("sampler_final") = res.sampler_final,
                        py::arg("score") = res.score_final,
                        py::arg("trace") = trace_dict(res.trace));
      },
      py::arg("target"), py::arg("config") = DftConfig(),
      py::arg("sampler_hidden") = std::vector<int>{64, 64},
      py::arg("score_hidden") = std::vector<int>{64, 64}, py::arg("latent_dim") = 0,
      py::arg("sampler_activation") = "elu", py::arg("score_activation") = "gelu",
      py::arg("leaky_slope") = 0.2, py::arg("seed") = 0,
      "alternating score-net / sampler updates; returns the best-checkpoint "
      "sampler, the final nets and the training trace");

  m.def(
      "run_chain",
      [](const TargetDistribution& target, const std::string& sampler, int n_particles,
         int n_steps, std::optional<double> step_size, int leapfrog_steps, uint64_t seed,
         std::optional<Mat> init_points, bool adagrad) {
        ChainConfig cc;
        cc.n_particles = n_particles;
        cc.n_steps = n_steps;
        cc.step_size = step_size ? *step_size : (sampler == "hmc" ? 0.05 : 0.01);
        cc.hmc_leapfrog_steps = leapfrog_steps;
        cc.svgd_adagrad = adagrad;
        if (init_points) {
          cc.init = ChainConfig::Init::provided;
          cc.init_points = *init_points;
        }
        ChainDiagnostics diag;
        Prng prng(seed, stream::chain);
        SampleBatch batch;
        if (sampler == "langevin")
          batch = langevin_run(target, cc, prng, &diag);
        else if (sampler == "hmc")
          batch = hmc_run(target, cc, prng, &diag);
        else if (sampler == "svgd")
          batch = svgd_run(target, cc, prng, &diag);
        else
          throw ConfigError("unknown chain sampler '" + sampler +
                            "' (langevin, hmc, svgd)");
        return py::make_tuple(batch.points, diag_dict(diag));
      },
      py::arg("target"), py::arg("sampler") = "langevin", py::arg("n_particles") = 500,
      py::arg("n_steps") = 500, py::arg("step_size") = std::nullopt,
      py::arg("leapfrog_steps") = 5, py::arg("seed") = 0,
      py::arg("init_points") = std::nullopt, py::arg("adagrad") = false,
      "returns (points, diagnostics); step_size defaults to 0.01 (0.05 for hmc); "
      "adagrad switches svgd to adagrad-normalized steps");

  m.def(
      "check_gradient_identity",
      [](const Mat& A, const Vec& b, double sigma, long n_samples, double fd_step,
         double tolerance, uint64_t seed) {
        auto target = make_target("gaussian");
        Prng prng(seed, stream::verify);
        Grad2Report rep =
            verify_grad2_identity(*target, A, b, sigma, n_samples, fd_step, tolerance, prng);
        return py::dict(py::arg("lhs") = rep.lhs, py::arg("rhs") = rep.rhs,
                        py::arg("rel_error") = rep.rel_error,
                        py::arg("max_rel_error") = rep.max_rel_error,
                        py::arg("conclusive") = rep.conclusive,
                        py::arg("n_samples") = rep.n_samples);
      },
      py::arg("A"), py::arg("b"), py::arg("sigma") = 0.1, py::arg("n_samples") = 200000,
      py::arg("fd_step") = 1e-3, py::arg("tolerance") = 0.05, py::arg("seed") = 0,
      "Monte-Carlo vs finite-difference check of the score-gradient identity "
      "on the linear-Gaussian sampler x = Az + b");

  m.def("config_schema", [] {
    py::list out;
    for (const auto& e : config_schema())
      out.append(py::dict(py::arg("key") = e.key, py::arg("type") = e.type,
                          py::arg("default") = e.default_value, py::arg("help") = e.help));
    return out;
  });

  m.def(
      "run_experiment",
      [](const std::map<std::string, std::string>& config) {
        RunConfig cfg = resolve_config(config);
        std::ostringstream log;
        RunOutcome out = run_experiment(cfg, log);
        return py::dict(py::arg("status") = out.status, py::arg("exit_code") = out.exit_code,
                        py::arg("error") = out.error,
                        py::arg("output_dir") = out.output_dir.string(),
                        py::arg("log") = log.str());
      },
      py::arg("config"),
      "full artifact-writing run from a flat {key: value} config, same keys "
      "as the CLI");
}
