// Command-line experiment runner. Subcommands:
//   run <config> [--seed N]        execute one experiment
//   compare <configs...> --out F   aggregate runs into a summary CSV
//   validate <config>              report config violations
//   gen-data <preset> --out PATH   write a synthetic dataset as CSV
//   preset [name] [--out F]        print or list shipped experiment configs
// Exit codes: 0 success, 1 validation failure, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "raan/data.hpp"
#include "raan/experiment.hpp"

namespace {

int cmd_run(const std::string& config_path, bool seed_set, std::uint64_t seed) {
  std::vector<std::string> violations = raan::validate_config(config_path);
  if (!violations.empty()) {
    for (const std::string& v : violations) std::cerr << "invalid config: " << v << "\n";
    return 1;
  }
  raan::ExperimentConfig cfg = raan::load_config(config_path);
  if (seed_set) cfg.training.seed = seed;
  raan::RunResult result = raan::run_experiment(cfg);
  const auto& metrics = result.test_metrics.empty() ? result.train_metrics : result.test_metrics;
  std::cout << "run complete: " << cfg.output_dir << "\n";
  for (const auto& [k, v] : metrics) std::printf("  %-22s %.6f\n", k.c_str(), v);
  return 0;
}

int cmd_gen_data(const std::string& preset, const std::string& out, std::uint64_t seed) {
  raan::SeededRng rng(seed);
  raan::CsvSchema schema{"label", "attribute", 2, 2};
  if (preset == "gaussian_biased" || preset == "gaussian_fair") {
    const raan::GaussianGroupSpec spec = preset == "gaussian_fair"
                                             ? raan::GaussianGroupSpec::fair_preset()
                                             : raan::GaussianGroupSpec::biased_preset();
    raan::save_csv(raan::gen_gaussian_groups(spec, rng), schema, out);
    std::cout << "wrote " << out << "\n";
    return 0;
  }
  if (preset == "spurious") {
    raan::EnvSpec base;
    std::vector<raan::EnvSpec> train_specs(2, base);
    train_specs[0].p_e = 0.1;
    train_specs[1].p_e = 0.2;
    raan::EnvSpec test_spec = base;
    test_spec.p_e = 0.9;
    raan::SpuriousEnvs envs = raan::gen_spurious_envs(train_specs, test_spec, rng);
    std::filesystem::create_directories(out);
    raan::save_csv(raan::concat(envs.train, "spurious_train"), schema, out + "/train.csv");
    raan::save_csv(envs.test, schema, out + "/test.csv");
    std::cout << "wrote " << out << "/train.csv and " << out << "/test.csv\n";
    return 0;
  }
  std::cerr << "unknown data preset '" << preset
            << "' (available: gaussian_biased, gaussian_fair, spurious)\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness-aware robust training experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "Execute one experiment from a config file");
  run->add_option("config", config_path, "Path to the JSON experiment config")->required();
  auto* seed_opt = run->add_option("--seed", seed, "Override training.seed");

  std::vector<std::string> compare_paths;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Summarize runs in a per-method CSV");
  compare->add_option("configs", compare_paths, "Config files of the runs to compare")
      ->required()
      ->expected(2, -1);
  compare->add_option("--out", compare_out, "Output CSV path")->required();

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a config and list violations");
  validate->add_option("config", validate_path, "Path to the JSON experiment config")
      ->required();

  std::string data_preset, data_out;
  std::uint64_t data_seed = 1;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset as CSV");
  gen->add_option("preset", data_preset, "gaussian_biased, gaussian_fair, or spurious")
      ->required();
  gen->add_option("--out", data_out, "Output CSV path (directory for spurious)")->required();
  gen->add_option("--seed", data_seed, "Generator seed");

  std::string preset_name, preset_out;
  auto* preset = app.add_subcommand("preset", "Print a shipped experiment config");
  preset->add_option("name", preset_name, "Preset name (omit to list all)");
  preset->add_option("--out", preset_out, "Write the config to this path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*run) return cmd_run(config_path, seed_opt->count() > 0, seed);
    if (*compare) {
      raan::compare_runs(compare_paths, compare_out);
      std::cout << "wrote " << compare_out << "\n";
      return 0;
    }
    if (*validate) {
      const std::vector<std::string> violations = raan::validate_config(validate_path);
      for (const std::string& v : violations) std::cout << v << "\n";
      return violations.empty() ? 0 : 1;
    }
    if (*gen) return cmd_gen_data(data_preset, data_out, data_seed);
    if (*preset) {
      if (preset_name.empty()) {
        for (const std::string& n : raan::preset_names()) std::cout << n << "\n";
        return 0;
      }
      const std::string text = raan::preset_config(preset_name);
      if (preset_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(preset_out);
        out << text;
        if (!out) throw std::runtime_error("cannot write " + preset_out);
        std::cout << "wrote " << preset_out << "\n";
      }
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
