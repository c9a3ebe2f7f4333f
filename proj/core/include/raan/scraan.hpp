#ifndef RAAN_SCRAAN_HPP_
#define RAAN_SCRAAN_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "raan/aan.hpp"
#include "raan/data.hpp"
#include "raan/matrix.hpp"
#include "raan/model.hpp"

namespace raan {

/// Per-sample running estimates (u1, u2) of the inner two-component value.
/// u2 is floored at u0 so f(g) = g1/g2 stays smooth along the trajectory.
struct EstimatorTable {
  EstimatorTable(std::size_t n, double u0);

  double u0;
  std::vector<double> u1;
  std::vector<double> u2;
  std::vector<char> visited;
};

/// Moving-average update for one table row. The first visit replaces the row
/// outright (gamma treated as 1) instead of mixing with the unseeded zeros.
void ug_update(EstimatorTable& table, std::size_t i, const InnerValue& ghat, double gamma);

/// Minibatch inner estimates for every center, over P_i intersected with the
/// batch. Entries are nullopt where the intersection is empty. z and losses
/// are indexed by dataset index.
std::vector<std::optional<InnerValue>> ghat_batch(const DenseMatrix& z,
                                                  const std::vector<double>& losses,
                                                  const std::vector<std::size_t>& centers,
                                                  const std::vector<std::size_t>& batch,
                                                  const GroupIndex& gi, double tau);

/// Stochastic gradient estimate over one batch: every batch sample acts as a
/// center, pair terms run over P_i within the batch, and the outer gradient
/// is evaluated at the table's running (u1, u2). The cache must hold a
/// forward pass over exactly the batch rows, in batch order. Head-only scope
/// drops the similarity terms (they do not touch head parameters).
ParamGrads grad_estimator(const ModelParams& params, const ForwardCache& cache,
                          const std::vector<std::size_t>& batch, const EstimatorTable& table,
                          const GroupIndex& gi, double tau, GradScope scope);

/// How centers are weighted in the exact objective gradient.
enum class CenterWeighting {
  kUniform,       // (1/n) sum_i f(g_i), the compositional objective
  kCellBalanced,  // cell-size-normalized weights matching raan_value
};

/// Analytic full-dataset gradient of the robust objective. The cache must
/// hold a forward pass over the whole dataset in index order.
ParamGrads exact_raan_gradient(const ModelParams& params, const ForwardCache& cache,
                               const GroupIndex& gi, double tau, GradScope scope,
                               CenterWeighting weighting = CenterWeighting::kCellBalanced);

struct SgdConfig {
  double alpha = 0.1;
};

/// Adam with the AMSGrad max-clamp on the second moment and no bias
/// correction. Validation enforces eta1 <= sqrt(eta2).
struct AdamConfig {
  double alpha = 1e-3;
  double eta1 = 0.9;
  double eta2 = 0.999;
  double eps = 1e-8;
  bool amsgrad = true;

  void validate() const;
};

struct AdamState {
  ParamGrads h;      // first moment
  ParamGrads v;      // second moment
  ParamGrads vhat;   // running max of v (equals v when amsgrad is off)

  static AdamState init(const ModelParams& params, GradScope scope);
};

void uw_sgd(ModelParams& params, const ParamGrads& grad, const SgdConfig& cfg,
            GradScope scope);
void uw_adam(ModelParams& params, AdamState& state, const ParamGrads& grad,
             const AdamConfig& cfg, GradScope scope);

/// Step size and mixing rate from the convergence analysis:
/// alpha = 1 / (n^{2/5} T^{3/5}), gamma = (n/T)^{2/5}. Requires T > n.
struct TheoryHparams {
  double alpha = 0.0;
  double gamma = 0.0;
};
TheoryHparams theory_hparams(std::size_t n, std::size_t total_steps);

enum class TrainMode {
  kHeadOnly,  // frozen encoder, robust loss on the head only
  kFull,      // gradients through embeddings into the encoder
};

struct OptimizerConfig {
  enum class Kind { kSgd, kAdam };
  Kind kind = Kind::kAdam;
  SgdConfig sgd;
  AdamConfig adam;
};

struct TrainConfig {
  std::size_t stage1_epochs = 5;   // plain cross-entropy warm-up
  std::size_t stage2_epochs = 20;  // robust stage
  std::size_t batch_size = 64;
  std::size_t min_cell_quota = 4;
  double tau = 0.5;
  double gamma = 0.9;
  double u0 = 1e-4;
  TrainMode mode = TrainMode::kHeadOnly;
  std::uint64_t seed = 0;
  std::size_t eval_subset_max = 2000;  // cap for the exact objective log

  void validate() const;
};

/// One evaluation row per epoch, computed on the training set in eval mode.
/// Fairness gaps are NaN when the task is not binary/binary.
struct TrainLogRow {
  std::size_t epoch = 0;  // 1-based, over both stages
  int stage = 0;
  double raan = 0.0;  // exact objective on the (possibly subsampled) eval set
  double ce = 0.0;
  double accuracy = 0.0;
  double dp = 0.0;
  double eo = 0.0;
  double worst_group = 0.0;
};

/// Two-stage training driver: stage 1 runs standard minibatch cross-entropy,
/// stage 2 switches to the stochastic compositional robust update. Modifies
/// params in place and returns the per-epoch log.
std::vector<TrainLogRow> train(const Dataset& dataset, ModelParams& params,
                               const TrainConfig& cfg, const OptimizerConfig& opt);

}  // namespace raan

#endif  // RAAN_SCRAAN_HPP_
