#include "dft/runner.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <memory>
#include <sstream>

#include "dft/blr.hpp"
#include "dft/errors.hpp"
#include "dft/metrics.hpp"
#include "dft/prng.hpp"

namespace dft {

namespace {

constexpr const char* kVersion = "dftsampler 0.1.0";

std::string trimmed(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, size_t(p - buf));
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

std::string utc_stamp() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// ---- schema ----

const std::vector<SchemaEntry>& schema_table() {
  static const std::vector<SchemaEntry> table = {
      {"experiment", "enum{train_dft,run_mcmc,eval_ksd,blr}", "train_dft",
       "which experiment to run"},
      {"target", "enum{gaussian,mog2,rosenbrock,donut,funnel,squiggle}", "gaussian",
       "2-d target for train_dft / run_mcmc / eval_ksd"},
      {"seed", "int", "0", "master seed; every consumer derives its own stream"},
      {"output_dir", "string", "", "artifact directory; empty = $DFTSAMPLER_OUTPUT_ROOT (or "
                                   "./runs) plus an auto name"},
      {"latent_dim", "int", "0", "sampler input dim; 0 = twice the sample dim"},
      {"sampler_hidden", "int-list", "64,64", "hidden layer widths of the sampler net"},
      {"sampler_activation", "enum{elu,leaky_relu,gelu,identity}", "elu",
       "hidden activation of the sampler net"},
      {"score_hidden", "int-list", "64,64", "hidden layer widths of the score net"},
      {"score_activation", "enum{elu,leaky_relu,gelu,identity}", "gelu",
       "hidden activation of the score net"},
      {"leaky_slope", "real", "0.2", "negative-side slope for leaky_relu"},
      {"sigma", "real", "0.1", "perturbation noise std"},
      {"grad_mode", "enum{full,partial}", "full", "use both gradient terms or only the second"},
      {"lambda1", "real", "1", "weight of the pathwise term (ignored in partial mode)"},
      {"lambda2", "real", "1", "weight of the score-parameter term"},
      {"score_loss", "enum{dsm,sm}", "dsm", "score-net objective: denoising or standard"},
      {"score_steps", "int", "2", "score-net updates per sampler update"},
      {"batch_size", "int", "1000", "training batch size"},
      {"max_iter", "int", "20000", "sampler updates"},
      {"sampler_lr", "real", "0.0002", "Adam learning rate of the sampler"},
      {"score_lr", "real", "0.001", "Adam learning rate of the score net"},
      {"eval_every", "int", "1000", "iterations between KSD checkpoints"},
      {"eval_samples", "int", "500", "samples per KSD evaluation"},
      {"eval_repeats", "int", "20", "repeats per KSD evaluation"},
      {"ksd_c", "real", "1", "inverse multiquadric kernel offset"},
      {"ksd_beta", "real", "-0.5", "inverse multiquadric kernel exponent, in (-1,0)"},
      {"ksd_statistic", "enum{u,v}", "u", "U- or V-statistic estimator"},
      {"mcmc_sampler", "enum{langevin,hmc,svgd}", "langevin", "baseline chain for run_mcmc"},
      {"n_particles", "int", "500", "particles (chains) for run_mcmc"},
      {"n_steps", "int", "500", "chain steps for run_mcmc"},
      {"step_size", "real", "", "chain step size; empty = 0.01 (0.05 for hmc)"},
      {"hmc_leapfrog_steps", "int", "5", "leapfrog steps per hmc proposal"},
      {"svgd_adagrad", "bool", "false", "svgd: adagrad-normalized steps (reference variant)"},
      {"samples_csv", "string", "", "input samples for eval_ksd"},
      {"blr_csv", "string", "", "dataset for blr; empty = seeded synthetic data"},
      {"blr_label_column", "string", "label", "label column name in blr_csv"},
      {"blr_test_fraction", "real", "0.2", "held-out fraction of the blr dataset"},
      {"blr_synthetic_n", "int", "2000", "rows of the synthetic blr dataset"},
      {"blr_synthetic_d", "int", "10", "feature count of the synthetic blr dataset"},
      {"blr_minibatch", "int", "0", "likelihood subsample size; 0 = full batch"},
      {"blr_baseline_steps", "int", "1000", "Langevin steps for the blr baseline"},
      {"blr_baseline_step_size", "real", "0.001", "Langevin step size for the blr baseline"},
      {"blr_eval_samples", "int", "100", "posterior samples used for test accuracy"},
      {"n_output_samples", "int", "500", "rows of samples.csv"},
      {"emit_svg", "bool", "true", "write scatter.svg for 2-d targets"},
  };
  return table;
}

const SchemaEntry* find_entry(const std::string& key) {
  for (const auto& e : schema_table())
    if (e.key == key) return &e;
  return nullptr;
}

// ---- typed readers over the flat map, collecting violations ----

struct Reader {
  const FlatConfig& flat;
  std::vector<std::string> violations;

  std::string raw(const std::string& key) const {
    auto it = flat.find(key);
    if (it != flat.end()) return it->second;
    return find_entry(key)->default_value;
  }

  void fail(const std::string& key, const std::string& what) {
    violations.push_back(key + ": " + what + " (got '" + raw(key) + "')");
  }

  long get_int(const std::string& key, long lo, long hi) {
    std::string s = raw(key);
    long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      fail(key, "expected an integer");
      return lo;
    }
    if (v < lo || v > hi) {
      fail(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      return lo;
    }
    return v;
  }

  uint64_t get_seed(const std::string& key) {
    std::string s = raw(key);
    uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      fail(key, "expected a non-negative integer");
      return 0;
    }
    return v;
  }

  double get_real(const std::string& key) {
    std::string s = raw(key);
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
      fail(key, "expected a finite real number");
      return 0.0;
    }
    return v;
  }

  bool get_bool(const std::string& key) {
    std::string s = raw(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    fail(key, "expected true/false");
    return false;
  }

  std::string get_enum(const std::string& key, std::initializer_list<const char*> allowed) {
    std::string s = raw(key);
    for (const char* a : allowed)
      if (s == a) return s;
    std::string opts;
    for (const char* a : allowed) opts += (opts.empty() ? "" : ", ") + std::string(a);
    fail(key, "must be one of {" + opts + "}");
    return *allowed.begin();
  }

  std::vector<int> get_int_list(const std::string& key) {
    std::string s = raw(key);
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trimmed(item);
      if (item.empty()) continue;
      int v = 0;
      auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || p != item.data() + item.size() || v < 1) {
        fail(key, "expected comma-separated positive integers");
        return {};
      }
      out.push_back(v);
    }
    return out;
  }
};

}  // namespace

const std::vector<SchemaEntry>& config_schema() { return schema_table(); }

std::string schema_text() {
  size_t kw = 0, tw = 0, dw = 0;
  for (const auto& e : schema_table()) {
    kw = std::max(kw, e.key.size());
    tw = std::max(tw, e.type.size());
    dw = std::max(dw, e.default_value.size());
  }
  std::string out = "configuration keys (key = value per line, '#' starts a comment)\n\n";
  for (const auto& e : schema_table()) {
    std::string dflt = e.default_value.empty() ? "(empty)" : e.default_value;
    out += "  " + e.key + std::string(kw - e.key.size() + 2, ' ') + e.type +
           std::string(tw - e.type.size() + 2, ' ') + "default " + dflt +
           std::string(dw + 1 - std::min(dw, dflt.size()), ' ') + e.help + "\n";
  }
  return out;
}

FlatConfig parse_config_text(const std::string& text, const std::string& origin) {
  FlatConfig out;
  std::stringstream ss(text);
  std::string line;
  long line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trimmed(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + " line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    std::string key = trimmed(line.substr(0, eq));
    std::string value = trimmed(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + " line " + std::to_string(line_no) + ": empty key");
    if (out.count(key))
      throw ConfigError(origin + " line " + std::to_string(line_no) + ": duplicate key '" +
                        key + "'");
    out[key] = value;
  }
  return out;
}

FlatConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str(), path);
}

void apply_override(FlatConfig& config, const std::string& key_equals_value) {
  size_t eq = key_equals_value.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + key_equals_value + "' is not of the form key=value");
  std::string key = trimmed(key_equals_value.substr(0, eq));
  if (key.empty()) throw ConfigError("override '" + key_equals_value + "' has an empty key");
  config[key] = trimmed(key_equals_value.substr(eq + 1));
}

FlatConfig preset_pairs(const std::string& name) {
  if (name == "desk") return {};  // the documented defaults are the desk profile
  if (name == "paper")
    return {{"sampler_hidden", "400,400,400"}, {"score_hidden", "400,400,400"},
            {"sampler_activation", "elu"},     {"score_activation", "gelu"},
            {"batch_size", "5000"},            {"sampler_lr", "2e-5"},
            {"score_lr", "2e-5"},              {"eval_every", "1000"},
            {"eval_samples", "500"},           {"eval_repeats", "20"}};
  throw ConfigError("unknown preset '" + name + "' (expected desk or paper)");
}

RunConfig resolve_config(const FlatConfig& flat) {
  Reader r{flat, {}};
  for (const auto& [key, value] : flat) {
    (void)value;
    if (!find_entry(key)) r.violations.push_back("unknown key '" + key + "'");
  }

  RunConfig cfg;
  cfg.experiment = r.get_enum("experiment", {"train_dft", "run_mcmc", "eval_ksd", "blr"});
  cfg.target =
      r.get_enum("target", {"gaussian", "mog2", "rosenbrock", "donut", "funnel", "squiggle"});
  cfg.seed = r.get_seed("seed");
  cfg.output_dir = r.raw("output_dir");

  cfg.latent_dim = int(r.get_int("latent_dim", 0, 1 << 20));
  cfg.sampler_hidden = r.get_int_list("sampler_hidden");
  cfg.score_hidden = r.get_int_list("score_hidden");
  cfg.sampler_activation = activation_from_string(
      r.get_enum("sampler_activation", {"elu", "leaky_relu", "gelu", "identity"}));
  cfg.score_activation = activation_from_string(
      r.get_enum("score_activation", {"elu", "leaky_relu", "gelu", "identity"}));
  cfg.leaky_slope = r.get_real("leaky_slope");

  cfg.dft.sigma = r.get_real("sigma");
  cfg.dft.grad_mode = grad_mode_from_string(r.get_enum("grad_mode", {"full", "partial"}));
  cfg.dft.lambda1 = r.get_real("lambda1");
  cfg.dft.lambda2 = r.get_real("lambda2");
  cfg.dft.score_loss = score_loss_from_string(r.get_enum("score_loss", {"dsm", "sm"}));
  cfg.dft.score_steps_per_sampler_step = int(r.get_int("score_steps", 1, 1000));
  cfg.dft.batch_size = int(r.get_int("batch_size", 1, 1 << 24));
  cfg.dft.max_iter = r.get_int("max_iter", 0, 1L << 40);
  cfg.dft.sampler_lr = r.get_real("sampler_lr");
  cfg.dft.score_lr = r.get_real("score_lr");
  cfg.dft.eval_every = r.get_int("eval_every", 1, 1L << 40);
  cfg.dft.eval_n_samples = int(r.get_int("eval_samples", 2, 1 << 24));
  cfg.dft.eval_repeats = int(r.get_int("eval_repeats", 1, 1 << 20));
  cfg.dft.ksd.c = r.get_real("ksd_c");
  cfg.dft.ksd.beta = r.get_real("ksd_beta");
  cfg.dft.ksd.statistic = ksd_stat_from_string(r.get_enum("ksd_statistic", {"u", "v"}));

  cfg.mcmc_sampler = r.get_enum("mcmc_sampler", {"langevin", "hmc", "svgd"});
  cfg.chain.n_particles = int(r.get_int("n_particles", 1, 1 << 24));
  cfg.chain.n_steps = int(r.get_int("n_steps", 0, 1 << 30));
  std::string step = r.raw("step_size");
  if (step.empty()) {
    cfg.chain.step_size = cfg.mcmc_sampler == "hmc" ? 0.05 : 0.01;
  } else {
    cfg.chain.step_size = r.get_real("step_size");
  }
  cfg.chain.hmc_leapfrog_steps = int(r.get_int("hmc_leapfrog_steps", 1, 1 << 20));
  cfg.chain.svgd_adagrad = r.get_bool("svgd_adagrad");

  cfg.samples_csv = r.raw("samples_csv");

  cfg.blr_csv = r.raw("blr_csv");
  cfg.blr_label_column = r.raw("blr_label_column");
  cfg.blr_test_fraction = r.get_real("blr_test_fraction");
  cfg.blr_synthetic_n = int(r.get_int("blr_synthetic_n", 5, 1 << 30));
  cfg.blr_synthetic_d = int(r.get_int("blr_synthetic_d", 1, 1 << 20));
  cfg.blr_minibatch = int(r.get_int("blr_minibatch", 0, 1 << 30));
  cfg.blr_baseline_steps = int(r.get_int("blr_baseline_steps", 1, 1 << 30));
  cfg.blr_baseline_step_size = r.get_real("blr_baseline_step_size");
  cfg.blr_eval_samples = int(r.get_int("blr_eval_samples", 1, 1 << 24));

  cfg.n_output_samples = int(r.get_int("n_output_samples", 0, 1 << 24));
  cfg.emit_svg = r.get_bool("emit_svg");

  // cross-field checks
  if (cfg.chain.step_size <= 0.0 || !std::isfinite(cfg.chain.step_size))
    r.violations.push_back("step_size: must be positive");
  if (cfg.leaky_slope < 0.0 || !std::isfinite(cfg.leaky_slope))
    r.violations.push_back("leaky_slope: must be non-negative");
  if (cfg.experiment == "eval_ksd" && cfg.samples_csv.empty())
    r.violations.push_back("samples_csv: required for the eval_ksd experiment");
  if (cfg.experiment == "blr" &&
      !(cfg.blr_test_fraction > 0.0 && cfg.blr_test_fraction < 1.0))
    r.violations.push_back("blr_test_fraction: must lie in (0, 1) for the blr experiment");
  if (cfg.blr_baseline_step_size <= 0.0)
    r.violations.push_back("blr_baseline_step_size: must be positive");
  if (cfg.dft.ksd.beta <= -1.0 || cfg.dft.ksd.beta >= 0.0)
    r.violations.push_back("ksd_beta: must lie in (-1, 0)");
  if (cfg.dft.ksd.c <= 0.0) r.violations.push_back("ksd_c: must be positive");
  try {
    validate_dft_config(cfg.dft);
  } catch (const Error& e) {
    r.violations.push_back(e.what());
  }

  if (!r.violations.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& v : r.violations) msg += "\n  - " + v;
    throw ConfigError(msg);
  }

  for (const auto& e : schema_table()) cfg.snapshot[e.key] = r.raw(e.key);
  return cfg;
}

// ---- artifacts ----

std::string samples_csv_text(const Mat& samples) {
  std::string out;
  long d = samples.cols();
  for (long j = 0; j < d; ++j) {
    out += (j ? ",x" : "x") + std::to_string(j);
  }
  out += "\n";
  for (long i = 0; i < samples.rows(); ++i) {
    for (long j = 0; j < d; ++j) {
      if (j) out += ',';
      out += fmt_double(samples(i, j));
    }
    out += '\n';
  }
  return out;
}

void write_samples_csv(const std::string& path, const Mat& samples) {
  write_text_file(path, samples_csv_text(samples));
}

Mat read_samples_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open samples file " + path);
  std::string line;
  if (!std::getline(f, line)) throw DataError(path + " is empty");
  long d = 1 + long(std::count(line.begin(), line.end(), ','));
  std::vector<double> vals;
  long line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() && f.peek() == EOF) break;
    std::stringstream ss(line);
    std::string cell;
    long got = 0;
    while (std::getline(ss, cell, ',')) {
      cell = trimmed(cell);
      double v = 0.0;
      auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || p != cell.data() + cell.size())
        throw DataError(path + " line " + std::to_string(line_no) + ": cannot parse '" + cell +
                        "'");
      vals.push_back(v);
      ++got;
    }
    if (got != d)
      throw DataError(path + " line " + std::to_string(line_no) + ": expected " +
                      std::to_string(d) + " fields, got " + std::to_string(got));
  }
  long n = long(vals.size()) / d;
  Mat out(n, d);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < d; ++j) out(i, j) = vals[size_t(i * d + j)];
  return out;
}

namespace {

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string scatter_svg(const TargetDistribution& target, const Mat& samples) {
  if (target.dim() != 2)
    throw ConfigError("scatter_svg: target '" + target.name() + "' is " +
                      std::to_string(target.dim()) + "-d, plotting needs 2");
  if (samples.rows() > 0 && samples.cols() != 2)
    throw ShapeError("scatter_svg: samples must have 2 columns");
  if (samples.rows() > 0 && !samples.allFinite())
    throw NumericError("scatter_svg: non-finite samples");

  // data box: at least [-4,4]^2, grown to cover the samples, then padded
  double lo[2] = {-4.0, -4.0}, hi[2] = {4.0, 4.0};
  for (long i = 0; i < samples.rows(); ++i)
    for (int j = 0; j < 2; ++j) {
      lo[j] = std::min(lo[j], samples(i, j));
      hi[j] = std::max(hi[j], samples(i, j));
    }
  for (int j = 0; j < 2; ++j) {
    double pad = 0.05 * (hi[j] - lo[j]);
    lo[j] -= pad;
    hi[j] += pad;
  }

  constexpr int kGrid = 200;
  Mat gv(kGrid, kGrid);
  Vec xs(kGrid), ys(kGrid);
  for (int i = 0; i < kGrid; ++i) {
    xs[i] = lo[0] + (hi[0] - lo[0]) * i / (kGrid - 1);
    ys[i] = lo[1] + (hi[1] - lo[1]) * i / (kGrid - 1);
  }
  Vec point(2);
  for (int ix = 0; ix < kGrid; ++ix)
    for (int iy = 0; iy < kGrid; ++iy) {
      point[0] = xs[ix];
      point[1] = ys[iy];
      double v = target.log_density(point);
      gv(ix, iy) = std::isfinite(v) ? v : -1e300;
    }
  double vmax = gv.maxCoeff();
  const double drops[] = {0.5, 1.0, 2.0, 3.0, 4.5, 6.5, 9.0, 12.0};

  const double kW = 640.0, kH = 640.0, kM = 30.0;
  auto to_px = [&](double x) { return kM + (x - lo[0]) / (hi[0] - lo[0]) * (kW - 2 * kM); };
  auto to_py = [&](double y) { return kH - kM - (y - lo[1]) / (hi[1] - lo[1]) * (kH - 2 * kM); };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" "
         "viewBox=\"0 0 640 640\">\n";
  svg += "<rect width=\"640\" height=\"640\" fill=\"#ffffff\"/>\n";
  svg += "<text x=\"320\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\" fill=\"#444444\">" +
         target.name() + " (" + std::to_string(samples.rows()) + " samples)</text>\n";

  // marching squares per level; corner order BL, BR, TR, TL
  for (double drop : drops) {
    double level = vmax - drop;
    std::string d;
    for (int ix = 0; ix + 1 < kGrid; ++ix) {
      for (int iy = 0; iy + 1 < kGrid; ++iy) {
        double a = gv(ix, iy), b = gv(ix + 1, iy), c = gv(ix + 1, iy + 1), e = gv(ix, iy + 1);
        int mask = (a > level) | ((b > level) << 1) | ((c > level) << 2) | ((e > level) << 3);
        if (mask == 0 || mask == 15) continue;
        auto lerp = [level](double t0, double t1, double v0, double v1) {
          return t0 + (level - v0) / (v1 - v0) * (t1 - t0);
        };
        // edge crossing points in data coordinates
        auto bottom = [&] { return std::pair(lerp(xs[ix], xs[ix + 1], a, b), ys[iy]); };
        auto right = [&] { return std::pair(xs[ix + 1], lerp(ys[iy], ys[iy + 1], b, c)); };
        auto top = [&] { return std::pair(lerp(xs[ix], xs[ix + 1], e, c), ys[iy + 1]); };
        auto left = [&] { return std::pair(xs[ix], lerp(ys[iy], ys[iy + 1], a, e)); };
        std::vector<std::pair<std::pair<double, double>, std::pair<double, double>>> segs;
        switch (mask) {
          case 1: case 14: segs = {{left(), bottom()}}; break;
          case 2: case 13: segs = {{bottom(), right()}}; break;
          case 3: case 12: segs = {{left(), right()}}; break;
          case 4: case 11: segs = {{right(), top()}}; break;
          case 6: case 9: segs = {{bottom(), top()}}; break;
          case 7: case 8: segs = {{left(), top()}}; break;
          case 5:
            segs = (a + b + c + e) / 4.0 > level
                       ? decltype(segs){{bottom(), right()}, {top(), left()}}
                       : decltype(segs){{left(), bottom()}, {right(), top()}};
            break;
          case 10:
            segs = (a + b + c + e) / 4.0 > level
                       ? decltype(segs){{bottom(), left()}, {top(), right()}}
                       : decltype(segs){{bottom(), right()}, {top(), left()}};
            break;
        }
        for (const auto& s : segs)
          d += "M" + px(to_px(s.first.first)) + " " + px(to_py(s.first.second)) + "L" +
               px(to_px(s.second.first)) + " " + px(to_py(s.second.second));
      }
    }
    if (!d.empty())
      svg += "<path d=\"" + d + "\" fill=\"none\" stroke=\"#9aa5b1\" stroke-width=\"1\"/>\n";
  }

  for (long i = 0; i < samples.rows(); ++i)
    svg += "<circle cx=\"" + px(to_px(samples(i, 0))) + "\" cy=\"" + px(to_py(samples(i, 1))) +
           "\" r=\"2.5\" fill=\"#2a6fb0\" fill-opacity=\"0.55\"/>\n";
  svg += "</svg>\n";
  return svg;
}

std::string sha256_hex_of_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for hashing");
  std::stringstream buf;
  buf << f.rdbuf();
  std::string bytes = buf.str();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
    throw IoError("sha256 failed for " + path);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

// ---- experiments ----

namespace {

using nlohmann::ordered_json;

struct Emitter {
  std::filesystem::path dir;
  std::vector<std::string> files;

  void text(const std::string& name, const std::string& content) {
    write_text_file(dir / name, content);
    files.push_back(name);
  }
  void net(const std::string& name, const FeedForwardNet& n) {
    save_net(n, (dir / name).string());
    files.push_back(name);
  }
};

std::vector<int> net_dims(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> dims;
  dims.push_back(in);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

std::string status_line_jsonl(const std::string& status) {
  ordered_json j{{"type", "status"}, {"status", status}};
  return j.dump() + "\n";
}

ordered_json diagnostics_json(const ChainDiagnostics& d) {
  return ordered_json{{"reinitialized", d.reinitialized},
                      {"accepted", d.accepted},
                      {"rejected", d.rejected},
                      {"nonfinite_rejects", d.nonfinite_rejects},
                      {"bandwidth_floored", d.bandwidth_floored}};
}

std::string run_train_dft(const RunConfig& cfg, Emitter& em, std::ostream& log) {
  auto target = make_target(cfg.target);
  int dim = target->dim();
  int zdim = cfg.latent_dim > 0 ? cfg.latent_dim : 2 * dim;

  Prng sampler_rng(cfg.seed, stream::sampler_init);
  Prng score_rng(cfg.seed, stream::score_init);
  auto sampler = init_net(net_dims(zdim, cfg.sampler_hidden, dim), cfg.sampler_activation,
                          sampler_rng, cfg.leaky_slope);
  auto score = init_net(net_dims(dim, cfg.score_hidden, dim), cfg.score_activation, score_rng,
                        cfg.leaky_slope);
  log << "train_dft: target=" << cfg.target << " sampler " << sampler.n_params()
      << " params, score " << score.n_params() << " params, " << cfg.dft.max_iter
      << " iterations\n";

  Prng train_rng(cfg.seed, stream::latent);
  DftResult res = train_dft(*target, sampler, score, cfg.dft, train_rng);
  log << "train_dft: status=" << res.trace.status << " best_iteration="
      << res.trace.best_iteration << " best_ksd=" << res.trace.best_ksd << " ("
      << fmt_double(res.trace.wall_time_sec) << "s)\n";

  Prng out_rng(cfg.seed, stream::eval);
  Mat samples = forward(res.sampler_best, out_rng.normal_mat(cfg.n_output_samples, zdim));

  em.text("samples.csv", samples_csv_text(samples));
  em.text("trace.jsonl", trace_to_jsonl(res.trace));

  double best_std = 0.0;
  bool has_best = false;
  for (const auto& ck : res.trace.checkpoints)
    if (ck.iteration == res.trace.best_iteration) {
      best_std = ck.std;
      has_best = true;
    }
  ordered_json j{{"experiment", "train_dft"}, {"target", cfg.target}, {"metric", "ksd"}};
  j["mean"] = has_best ? ordered_json(res.trace.best_ksd) : ordered_json(nullptr);
  j["std"] = has_best ? ordered_json(best_std) : ordered_json(nullptr);
  j["n_samples"] = cfg.dft.eval_n_samples;
  j["n_repeats"] = cfg.dft.eval_repeats;
  j["kernel"] = {{"c", cfg.dft.ksd.c}, {"beta", cfg.dft.ksd.beta}};
  j["statistic"] = to_string(cfg.dft.ksd.statistic);
  j["best_iteration"] = res.trace.best_iteration;
  j["iterations"] = cfg.dft.max_iter;
  j["status"] = res.trace.status;
  em.text("metrics.json", j.dump(2) + "\n");

  if (cfg.emit_svg && dim == 2) em.text("scatter.svg", scatter_svg(*target, samples));
  em.net("sampler_best.ckpt", res.sampler_best);
  em.net("sampler_final.ckpt", res.sampler_final);
  em.net("score_final.ckpt", res.score_final);
  return res.trace.status;
}

std::string run_mcmc(const RunConfig& cfg, Emitter& em, std::ostream& log) {
  auto target = make_target(cfg.target);
  ChainDiagnostics diag;
  Prng chain_rng(cfg.seed, stream::chain);
  SampleBatch batch;
  if (cfg.mcmc_sampler == "langevin")
    batch = langevin_run(*target, cfg.chain, chain_rng, &diag);
  else if (cfg.mcmc_sampler == "hmc")
    batch = hmc_run(*target, cfg.chain, chain_rng, &diag);
  else
    batch = svgd_run(*target, cfg.chain, chain_rng, &diag);

  double value = ksd(cfg.dft.ksd, *target, batch.points);
  log << "run_mcmc: " << batch.sampler_id << " on " << cfg.target << ", " << cfg.chain.n_steps
      << " steps, ksd=" << fmt_double(value) << "\n";

  KsdReport report;
  report.mean = value;
  report.std = 0.0;
  report.n_repeats = 1;
  report.n_samples_per_repeat = int(batch.points.rows());
  report.single_repeat = true;
  report.estimator = cfg.dft.ksd;
  ordered_json jr;
  to_json(jr, report);

  ordered_json j{{"experiment", "run_mcmc"}, {"target", cfg.target},
                 {"sampler", batch.sampler_id}};
  for (auto& [k, v] : jr.items()) j[k] = v;
  j["n_steps"] = cfg.chain.n_steps;
  j["step_size"] = cfg.chain.step_size;
  j["diagnostics"] = diagnostics_json(diag);
  j["status"] = "ok";

  em.text("samples.csv", samples_csv_text(batch.points));
  em.text("metrics.json", j.dump(2) + "\n");
  em.text("trace.jsonl", status_line_jsonl("ok"));
  if (cfg.emit_svg && target->dim() == 2)
    em.text("scatter.svg", scatter_svg(*target, batch.points));
  return "ok";
}

std::string run_eval_ksd(const RunConfig& cfg, Emitter& em, std::ostream& log) {
  auto target = make_target(cfg.target);
  Mat samples = read_samples_csv(cfg.samples_csv);
  if (samples.cols() != target->dim())
    throw ShapeError("eval_ksd: samples have " + std::to_string(samples.cols()) +
                     " columns, target dim is " + std::to_string(target->dim()));
  if (samples.rows() < 2) throw ConfigError("eval_ksd: need at least 2 samples");

  double value = ksd(cfg.dft.ksd, *target, samples);
  log << "eval_ksd: " << samples.rows() << " samples on " << cfg.target
      << ", ksd=" << fmt_double(value) << "\n";

  KsdReport report;
  report.mean = value;
  report.std = 0.0;
  report.n_repeats = 1;
  report.n_samples_per_repeat = int(samples.rows());
  report.single_repeat = true;
  report.estimator = cfg.dft.ksd;
  ordered_json jr;
  to_json(jr, report);
  ordered_json j{{"experiment", "eval_ksd"}, {"target", cfg.target},
                 {"input", cfg.samples_csv}};
  for (auto& [k, v] : jr.items()) j[k] = v;
  j["status"] = "ok";

  em.text("samples.csv", samples_csv_text(samples));
  em.text("metrics.json", j.dump(2) + "\n");
  em.text("trace.jsonl", status_line_jsonl("ok"));
  if (cfg.emit_svg && target->dim() == 2)
    em.text("scatter.svg", scatter_svg(*target, samples));
  return "ok";
}

BlrDataset synthetic_logistic(int n, int d, double test_fraction, Prng& prng) {
  BlrDataset ds;
  ds.features = prng.normal_mat(n, d);
  Vec w = prng.normal_vec(d) * (2.0 / std::sqrt(double(d)));
  double bias = 0.5 * prng.normal();
  ds.labels = Vec(n);
  for (int i = 0; i < n; ++i) {
    double p = sigmoid(ds.features.row(i).dot(w) + bias);
    ds.labels[i] = prng.uniform() < p ? 1.0 : 0.0;
  }
  for (int j = 0; j < d; ++j) ds.feature_names.push_back("x" + std::to_string(j));

  std::vector<int> perm(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) perm[size_t(i)] = i;
  for (int i = n - 1; i > 0; --i)
    std::swap(perm[size_t(i)], perm[size_t(prng.uniform_u64(uint64_t(i + 1)))]);
  long n_test = std::lround(test_fraction * double(n));
  ds.test_idx.assign(perm.begin(), perm.begin() + n_test);
  ds.train_idx.assign(perm.begin() + n_test, perm.end());
  std::sort(ds.test_idx.begin(), ds.test_idx.end());
  std::sort(ds.train_idx.begin(), ds.train_idx.end());
  return ds;
}

std::string run_blr(const RunConfig& cfg, Emitter& em, std::ostream& log) {
  BlrDataset ds;
  std::string dataset_desc;
  Prng split_rng(cfg.seed, stream::data_split);
  if (cfg.blr_csv.empty()) {
    ds = synthetic_logistic(cfg.blr_synthetic_n, cfg.blr_synthetic_d, cfg.blr_test_fraction,
                            split_rng);
    dataset_desc = "synthetic(n=" + std::to_string(cfg.blr_synthetic_n) +
                   ",d=" + std::to_string(cfg.blr_synthetic_d) + ")";
  } else {
    ds = load_blr_csv(cfg.blr_csv, cfg.blr_label_column, cfg.blr_test_fraction, split_rng);
    dataset_desc = cfg.blr_csv;
  }
  for (const auto& w : ds.warnings) log << "blr: warning: " << w << "\n";

  long n_train = long(ds.train_idx.size()), n_test = long(ds.test_idx.size());
  int minibatch = cfg.blr_minibatch > 0 ? cfg.blr_minibatch : int(n_train);
  auto posterior = std::make_shared<const BlrPosterior>(std::move(ds), minibatch);
  int dim = posterior->dim();
  int zdim = cfg.latent_dim > 0 ? cfg.latent_dim : 2 * dim;
  log << "blr: " << dataset_desc << ", " << n_train << " train / " << n_test
      << " test rows, posterior dim " << dim << "\n";

  // subsampled likelihood for training when asked; the posterior itself for
  // everything exact
  Prng batch_rng(cfg.seed, stream::minibatch);
  std::unique_ptr<StochasticBlrTarget> stochastic_train, stochastic_baseline;
  const TargetDistribution* train_target = posterior.get();
  const TargetDistribution* baseline_target = posterior.get();
  if (cfg.blr_minibatch > 0) {
    stochastic_train = std::make_unique<StochasticBlrTarget>(posterior, batch_rng.child(0));
    stochastic_baseline = std::make_unique<StochasticBlrTarget>(posterior, batch_rng.child(1));
    train_target = stochastic_train.get();
    baseline_target = stochastic_baseline.get();
  }

  Prng sampler_rng(cfg.seed, stream::sampler_init);
  Prng score_rng(cfg.seed, stream::score_init);
  auto sampler = init_net(net_dims(zdim, cfg.sampler_hidden, dim), cfg.sampler_activation,
                          sampler_rng, cfg.leaky_slope);
  auto score = init_net(net_dims(dim, cfg.score_hidden, dim), cfg.score_activation, score_rng,
                        cfg.leaky_slope);

  Prng train_rng(cfg.seed, stream::latent);
  DftResult res = train_dft(*train_target, sampler, score, cfg.dft, train_rng);
  log << "blr: training status=" << res.trace.status << " ("
      << fmt_double(res.trace.wall_time_sec) << "s)\n";

  Prng out_rng(cfg.seed, stream::eval);
  Mat xi_samples = forward(res.sampler_best, out_rng.normal_mat(cfg.blr_eval_samples, zdim));
  double acc_dft = blr_accuracy(*posterior, xi_samples);

  ChainConfig bc;
  bc.n_particles = cfg.blr_eval_samples;
  bc.n_steps = cfg.blr_baseline_steps;
  bc.step_size = cfg.blr_baseline_step_size;
  ChainDiagnostics diag;
  Prng chain_rng(cfg.seed, stream::chain);
  SampleBatch baseline = langevin_run(*baseline_target, bc, chain_rng, &diag);
  double acc_langevin = blr_accuracy(*posterior, baseline.points);
  log << "blr: accuracy dft=" << fmt_double(acc_dft)
      << " langevin=" << fmt_double(acc_langevin) << "\n";

  ordered_json j{{"experiment", "blr"},
                 {"dataset", dataset_desc},
                 {"n_train", n_train},
                 {"n_test", n_test},
                 {"posterior_dim", dim},
                 {"accuracy_dft", acc_dft},
                 {"accuracy_langevin", acc_langevin},
                 {"accuracy_gap", std::abs(acc_dft - acc_langevin)},
                 {"eval_samples", cfg.blr_eval_samples},
                 {"baseline_steps", cfg.blr_baseline_steps},
                 {"minibatch", cfg.blr_minibatch},
                 {"best_iteration", res.trace.best_iteration},
                 {"baseline_diagnostics", diagnostics_json(diag)},
                 {"status", res.trace.status}};

  em.text("samples.csv", samples_csv_text(xi_samples));
  em.text("metrics.json", j.dump(2) + "\n");
  em.text("trace.jsonl", trace_to_jsonl(res.trace));
  em.net("sampler_best.ckpt", res.sampler_best);
  em.net("sampler_final.ckpt", res.sampler_final);
  em.net("score_final.ckpt", res.score_final);
  return res.trace.status;
}

std::filesystem::path resolve_output_dir(const RunConfig& cfg) {
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  const char* root = std::getenv(kOutputRootEnv);
  std::string base = (root && *root) ? root : "runs";
  std::string label = cfg.experiment;
  if (cfg.experiment == "blr")
    label += cfg.blr_csv.empty() ? "_synthetic" : "_csv";
  else if (cfg.experiment == "run_mcmc")
    label += "_" + cfg.mcmc_sampler + "_" + cfg.target;
  else
    label += "_" + cfg.target;
  return std::filesystem::path(base) / (label + "_seed" + std::to_string(cfg.seed));
}

}  // namespace

RunOutcome run_experiment(const RunConfig& config, std::ostream& log) {
  RunOutcome out;
  std::string started = utc_stamp();
  out.output_dir = resolve_output_dir(config);
  std::error_code ec;
  std::filesystem::create_directories(out.output_dir, ec);
  if (ec)
    throw IoError("cannot create output dir " + out.output_dir.string() + ": " + ec.message());

  Emitter em{out.output_dir, {}};
  out.status = "ok";
  try {
    if (config.experiment == "train_dft")
      out.status = run_train_dft(config, em, log);
    else if (config.experiment == "run_mcmc")
      out.status = run_mcmc(config, em, log);
    else if (config.experiment == "eval_ksd")
      out.status = run_eval_ksd(config, em, log);
    else if (config.experiment == "blr")
      out.status = run_blr(config, em, log);
    else
      throw ConfigError("unknown experiment '" + config.experiment + "'");
  } catch (const std::exception& e) {
    out.status = "error";
    out.error = e.what();
    log << "error: " << out.error << "\n";
  }

  ordered_json files = ordered_json::array();
  for (const auto& name : em.files) {
    auto p = out.output_dir / name;
    files.push_back({{"name", name},
                     {"sha256", sha256_hex_of_file(p.string())},
                     {"bytes", std::filesystem::file_size(p)}});
  }
  ordered_json manifest{{"version", kVersion},
                        {"experiment", config.experiment},
                        {"status", out.status}};
  if (!out.error.empty()) manifest["error"] = out.error;
  manifest["started_utc"] = started;
  manifest["finished_utc"] = utc_stamp();
  manifest["config"] = config.snapshot;
  manifest["files"] = files;
  write_text_file(out.output_dir / "manifest.json", manifest.dump(2) + "\n");

  out.exit_code = out.status == "ok" ? 0 : (out.status == "aborted" ? 2 : 1);
  return out;
}

}  // namespace dft
