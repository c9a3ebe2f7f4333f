#ifndef RAAN_AAN_HPP_
#define RAAN_AAN_HPP_

#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "raan/matrix.hpp"

namespace raan {

/// Partition of sample indices by (class, attribute) cell. The adversarial
/// attribute neighborhood of sample i with (c, a) is every same-class sample
/// with a different attribute.
class GroupIndex {
 public:
  GroupIndex(const std::vector<std::size_t>& labels,
             const std::vector<std::size_t>& attributes, std::size_t num_classes,
             std::size_t num_attributes);

  std::size_t num_classes() const { return num_classes_; }
  std::size_t num_attributes() const { return num_attributes_; }
  std::size_t num_samples() const { return labels_.size(); }

  const std::vector<std::size_t>& cell(std::size_t c, std::size_t a) const;
  const std::vector<std::size_t>& class_list(std::size_t c) const;
  std::size_t label_of(std::size_t i) const { return labels_[i]; }
  std::size_t attribute_of(std::size_t i) const { return attributes_[i]; }

  /// Neighbor list P_i = D^c \ D^c_a, materialized on demand (for binary
  /// attributes this is exactly the opposite cell, returned without copying
  /// through the cached per-(c,a) complement).
  const std::vector<std::size_t>& neighbors(std::size_t i) const;

  /// Throws if any cell is empty, naming the (class, attribute) pair.
  void require_all_cells_nonempty() const;

 private:
  std::size_t num_classes_;
  std::size_t num_attributes_;
  std::vector<std::size_t> labels_;
  std::vector<std::size_t> attributes_;
  std::vector<std::vector<std::vector<std::size_t>>> cells_;       // [c][a]
  std::vector<std::vector<std::size_t>> class_lists_;              // [c]
  std::vector<std::vector<std::vector<std::size_t>>> complements_; // [c][a]: D^c \ D^c_a
};

GroupIndex build_group_index(const std::vector<std::size_t>& labels,
                             const std::vector<std::size_t>& attributes,
                             std::size_t num_classes, std::size_t num_attributes);

/// Closed-form KL-DRO pairwise weights for center i over its neighbors:
/// softmax of similarities at temperature tau.
std::vector<double> pair_weights(const DenseMatrix& z, std::size_t i,
                                 const std::vector<std::size_t>& neighbors, double tau);

/// Numeric maximizer of  sum_j p_j s_j - tau KL(p || uniform)  over the
/// simplex, used as an independent oracle for pair_weights. Diagonally scaled
/// projected gradient ascent (per-coordinate step eta*(p_j + delta_t), eta =
/// 0.5/tau, delta halving from 0.1/m) with a weighted simplex projection;
/// converged when successive iterates move < 1e-10, capped at 10^4
/// iterations. Throws with the residual on non-convergence.
std::vector<double> dro_oracle(const std::vector<double>& similarities, double tau,
                               std::size_t max_iter = 10000, double tol = 1e-10);

/// Aggregated per-sample weights p_j = (1/|P_j|) sum_{i in P_j} p_ij.
std::vector<double> sample_weights(const DenseMatrix& z, const GroupIndex& gi, double tau);

/// RAAN(w) = (1/(AC)) sum_j p_j loss_j.
double raan_value(const DenseMatrix& z, const std::vector<double>& losses,
                  const GroupIndex& gi, double tau);

/// First form: (1/C) sum_c (1/A) sum_a (1/|D^c_a|) sum_{i in cell} l_i^AAN.
/// Equal to raan_value for binary attributes; kept as the dual evaluation
/// route.
double raan_value_pairwise(const DenseMatrix& z, const std::vector<double>& losses,
                           const GroupIndex& gi, double tau);

/// Inner two-component value g = (g1, g2) of the compositional form.
struct InnerValue {
  double g1 = 0.0;
  double g2 = 0.0;
};

/// Minibatch inner estimate over P_i ∩ subset (scaled by n/(AC)). Returns
/// nullopt when the intersection is empty so stochastic callers can skip the
/// center; pass the full index set for the exact g.
std::optional<InnerValue> inner_g(const DenseMatrix& z, const std::vector<double>& losses,
                                  std::size_t i, const std::vector<std::size_t>& subset,
                                  const GroupIndex& gi, double tau);

/// Gradient of f(g) = g1/g2: (1/g2, -g1/g2^2). Throws on g2 <= 0.
std::pair<double, double> grad_f(const InnerValue& g);

}  // namespace raan

#endif  // RAAN_AAN_HPP_
