#pragma once
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dft/baselines.hpp"
#include "dft/dft_training.hpp"
#include "dft/nn.hpp"
#include "dft/targets.hpp"
#include "dft/types.hpp"

namespace dft {

// One documented key of the flat config format. "auto" defaults are resolved
// from the experiment and target at validation time.
struct SchemaEntry {
  std::string key;
  std::string type;  // int, real, bool, string, enum{...}, int-list
  std::string default_value;
  std::string help;
};

const std::vector<SchemaEntry>& config_schema();
std::string schema_text();

// raw key=value pairs: file contents, presets, --set overrides
using FlatConfig = std::map<std::string, std::string>;

// `key = value` lines, '#' comments, blank lines ignored
FlatConfig parse_config_text(const std::string& text, const std::string& origin);
FlatConfig parse_config_file(const std::string& path);
void apply_override(FlatConfig& config, const std::string& key_equals_value);

// named profiles layered between defaults and the config file; "desk" is the
// default profile (empty), "paper" switches to the large-run settings
FlatConfig preset_pairs(const std::string& name);

// everything an experiment needs, after type checking and defaulting
struct RunConfig {
  std::string experiment;  // train_dft | run_mcmc | eval_ksd | blr
  std::string target;
  uint64_t seed = 0;
  std::string output_dir;  // empty = resolve from env root + run name

  int latent_dim = 0;  // 0 = twice the sample dim
  std::vector<int> sampler_hidden, score_hidden;
  Activation sampler_activation = Activation::elu;
  Activation score_activation = Activation::gelu;
  double leaky_slope = 0.2;

  DftConfig dft;

  std::string mcmc_sampler;  // langevin | hmc | svgd
  ChainConfig chain;

  std::string samples_csv;  // eval_ksd input

  std::string blr_csv;  // empty = seeded synthetic dataset
  std::string blr_label_column;
  double blr_test_fraction = 0.2;
  int blr_synthetic_n = 2000;
  int blr_synthetic_d = 10;
  int blr_minibatch = 0;  // 0 = full-batch scores
  int blr_baseline_steps = 1000;
  double blr_baseline_step_size = 1e-3;
  int blr_eval_samples = 100;

  int n_output_samples = 500;
  bool emit_svg = true;

  FlatConfig snapshot;  // the fully resolved flat map, stored in the manifest
};

// validates and types the flat map; throws ConfigError listing every
// violation (unknown keys, bad values) in one message
RunConfig resolve_config(const FlatConfig& flat);

// ---- artifact helpers ----

// header "x0,x1,...", one row per sample, shortest round-trip formatting
std::string samples_csv_text(const Mat& samples);
void write_samples_csv(const std::string& path, const Mat& samples);
// reads the same format back (first line is always treated as the header)
Mat read_samples_csv(const std::string& path);

// sample scatter over log-density contour lines from a 200x200 grid;
// deterministic bytes for fixed inputs. 2-d targets only.
std::string scatter_svg(const TargetDistribution& target, const Mat& samples);

std::string sha256_hex_of_file(const std::string& path);

struct RunOutcome {
  int exit_code = 0;        // 0 ok, 1 error, 2 aborted
  std::string status;       // ok | aborted | error
  std::string error;        // set when status == error
  std::filesystem::path output_dir;
};

// runs one experiment end to end: artifacts plus a trailing manifest.json
// with digests of every emitted file. Never writes outside the output dir.
RunOutcome run_experiment(const RunConfig& config, std::ostream& log);

// env var consulted when neither --out nor output_dir is given
constexpr const char* kOutputRootEnv = "DFTSAMPLER_OUTPUT_ROOT";

}  // namespace dft
