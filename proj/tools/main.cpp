#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dft/errors.hpp"
#include "dft/runner.hpp"

namespace {

int fail_json(const std::string& kind, const std::string& message) {
  nlohmann::ordered_json err{{"status", "error"}, {"kind", kind}, {"message", message}};
  std::cerr << err.dump() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"one-step implicit samplers: training, chain baselines, evaluation"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run one experiment from a config file");
  std::string config_path;
  run->add_option("config", config_path, "key = value config file")->required();
  std::vector<std::string> overrides;
  run->add_option("--set", overrides, "override one key, e.g. --set max_iter=500")
      ->take_all();
  std::string preset = "desk";
  run->add_option("--preset", preset, "base profile the file is layered onto")
      ->check(CLI::IsMember({"desk", "paper"}));
  uint64_t seed = 0;
  auto* seed_opt = run->add_option("--seed", seed, "overrides the seed key");
  std::string out_dir;
  run->add_option("--out", out_dir, "overrides the output_dir key");
  long sweep = 1;
  run->add_option("--sweep", sweep, "run this many consecutive seeds")
      ->check(CLI::PositiveNumber);

  app.add_subcommand("schema", "print every config key with type, default and help");

  CLI11_PARSE(app, argc, argv);

  if (app.got_subcommand("schema")) {
    std::cout << dft::schema_text();
    return 0;
  }

  try {
    dft::FlatConfig flat = dft::preset_pairs(preset);
    for (const auto& [k, v] : dft::parse_config_file(config_path)) flat[k] = v;
    for (const auto& s : overrides) dft::apply_override(flat, s);
    if (seed_opt->count() > 0) flat["seed"] = std::to_string(seed);
    if (!out_dir.empty()) flat["output_dir"] = out_dir;

    dft::RunConfig base = dft::resolve_config(flat);
    uint64_t seed0 = base.seed;
    int worst = 0;
    for (long k = 0; k < sweep; ++k) {
      dft::FlatConfig step = flat;
      step["seed"] = std::to_string(seed0 + uint64_t(k));
      if (sweep > 1 && !base.output_dir.empty())
        step["output_dir"] =
            (std::filesystem::path(base.output_dir) / ("seed" + step["seed"])).string();
      dft::RunConfig cfg = dft::resolve_config(step);
      dft::RunOutcome res = dft::run_experiment(cfg, std::cout);
      std::cout << "[" << cfg.experiment << "] seed=" << cfg.seed << " status=" << res.status
                << " dir=" << res.output_dir.string() << "\n";
      if (!res.error.empty()) std::cout << "  " << res.error << "\n";
      worst = std::max(worst, res.exit_code);
    }
    return worst;
  } catch (const dft::ConfigError& e) {
    return fail_json("config", e.what());
  } catch (const dft::Error& e) {
    return fail_json("runtime", e.what());
  } catch (const std::exception& e) {
    return fail_json("internal", e.what());
  }
}
