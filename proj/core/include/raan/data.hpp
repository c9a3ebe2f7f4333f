#ifndef RAAN_DATA_HPP_
#define RAAN_DATA_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "raan/aan.hpp"
#include "raan/matrix.hpp"
#include "raan/rng.hpp"

namespace raan {

struct Dataset {
  DenseMatrix features;  // n x d
  std::vector<std::size_t> labels;
  std::vector<std::size_t> attributes;
  std::size_t num_classes = 2;
  std::size_t num_attributes = 2;
  std::string name;

  std::size_t size() const { return labels.size(); }
  void validate() const;
  GroupIndex group_index() const;
};

/// One Gaussian per (label, attribute) cell with a diagonal covariance.
struct GaussianCell {
  std::size_t label = 0;
  std::size_t attribute = 0;
  std::vector<double> mean;
  std::vector<double> variance;  // diagonal entries, > 0
  std::size_t count = 0;
};

struct GaussianGroupSpec {
  std::vector<GaussianCell> cells;

  /// Biased two-class preset: class means at x = -1/+1, attribute shift on
  /// the second coordinate, and the (y=1, a=1) group pulled toward the class
  /// boundary so a CE-trained model shows a measurable equalized-odds gap.
  static GaussianGroupSpec biased_preset(std::size_t per_cell = 500);
  /// Fair preset: attribute shift only, symmetric across the boundary.
  static GaussianGroupSpec fair_preset(std::size_t per_cell = 500);
};

Dataset gen_gaussian_groups(const GaussianGroupSpec& spec, SeededRng& rng);

/// Label-switching environment: balanced classes; within class y a fraction
/// p_e of samples get attribute 1-y (deterministic quota, not sampling).
/// Features are class_scale * (2y-1) e0 + attr_scale * (2a-1) e1 + noise.
struct EnvSpec {
  double p_e = 0.1;
  std::size_t samples_per_env = 500;
  std::size_t feature_dim = 10;
  double class_scale = 0.6;
  double attr_scale = 1.0;
  double noise_scale = 0.7;
};

struct SpuriousEnvs {
  std::vector<Dataset> train;
  Dataset test;
};

SpuriousEnvs gen_spurious_envs(const std::vector<EnvSpec>& train_specs,
                               const EnvSpec& test_spec, SeededRng& rng);

/// Concatenate datasets (same feature dim / cardinalities).
Dataset concat(const std::vector<Dataset>& parts, const std::string& name);

struct CsvSchema {
  std::string label_column;
  std::string attribute_column;
  std::size_t num_classes = 2;
  std::size_t num_attributes = 2;
};

/// Comma-separated, first row header, '.' decimal. All non-label,
/// non-attribute columns are numeric features. Errors cite row and column.
Dataset load_csv(const std::string& path, const CsvSchema& schema);
void save_csv(const Dataset& dataset, const CsvSchema& schema, const std::string& path);

/// Stratified batch plan for one epoch: a shuffled full pass chopped into
/// batches, each topped up to at least `min_cell_quota` indices from every
/// (class, attribute) cell.
std::vector<std::vector<std::size_t>> stratified_batches(const GroupIndex& gi,
                                                         std::size_t batch_size,
                                                         std::size_t min_cell_quota,
                                                         SeededRng& rng);

}  // namespace raan

#endif  // RAAN_DATA_HPP_
