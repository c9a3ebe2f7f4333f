#ifndef RAAN_EXPERIMENT_HPP_
#define RAAN_EXPERIMENT_HPP_

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "raan/data.hpp"
#include "raan/model.hpp"
#include "raan/scraan.hpp"

namespace raan {

enum class Method { kCeOnly, kRaanHeadOnly, kRlRaanFull, kBalancedCe };

std::string method_name(Method m);

struct SpuriousBlock {
  std::vector<double> train_pe{0.1, 0.2};
  double test_pe = 0.9;
  std::size_t samples_per_env = 500;
  std::size_t feature_dim = 10;
  double class_scale = 0.6;
  double attr_scale = 1.0;
  double noise_scale = 0.7;
};

struct DatasetBlock {
  enum class Source { kGaussianBiased, kGaussianFair, kSpuriousEnvs, kCsv };
  Source source = Source::kGaussianBiased;
  std::size_t per_cell = 500;  // gaussian presets
  SpuriousBlock spurious;
  std::string csv_path;
  CsvSchema csv_schema;
  /// Canonical serialization of the config's dataset object; used by compare
  /// to enforce like-for-like runs.
  std::string fingerprint;
};

struct ModelBlock {
  std::vector<std::size_t> encoder_hidden_dims{50};
  std::size_t embedding_dim = 50;
  std::vector<std::size_t> head_hidden_dims{50};
  double dropout_rate = 0.2;
};

/// Parsed experiment description. The config file is JSON with four blocks:
/// dataset, model, training, output. See the repository README for the full
/// key reference.
struct ExperimentConfig {
  DatasetBlock dataset;
  ModelBlock model;
  Method method = Method::kRaanHeadOnly;
  TrainConfig training;
  OptimizerConfig optimizer;
  std::string output_dir;
  bool emit_embeddings = false;
  // presence flags for fields that are only mandatory for some methods
  bool tau_specified = false;
  bool gamma_specified = false;
};

/// Parse a config file. Throws on unreadable files, malformed JSON, or type
/// errors; semantic violations are reported by validate_config instead.
ExperimentConfig load_config(const std::string& path);

/// Every violated invariant, one message per line, each naming the offending
/// field path. Empty means the config is runnable. Malformed JSON yields a
/// single parse-error entry; an unreadable file throws.
std::vector<std::string> validate_config(const std::string& path);

struct RunResult {
  std::vector<TrainLogRow> log;
  std::map<std::string, double> train_metrics;
  std::map<std::string, double> test_metrics;  // empty when no held-out set
};

/// Execute the configured experiment and write metrics.csv,
/// final_metrics.json, model.ckpt and (optionally) embeddings.csv into the
/// output directory.
RunResult run_experiment(const ExperimentConfig& cfg);

/// Aggregate completed runs (running any config whose artifacts are missing)
/// into a per-method summary CSV: mean and standard deviation of the final
/// metrics over seeds. Throws if the configs' dataset blocks differ.
void compare_runs(const std::vector<std::string>& config_paths, const std::string& out_path);

/// Built-in config presets, keyed by name ("gaussian_biased_raan", ...).
/// Returns the JSON text of the preset; throws on unknown names.
std::string preset_config(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace raan

#endif  // RAAN_EXPERIMENT_HPP_
