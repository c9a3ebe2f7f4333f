#ifndef RAAN_MODEL_HPP_
#define RAAN_MODEL_HPP_

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "raan/matrix.hpp"
#include "raan/rng.hpp"

namespace raan {

/// MLP split into a feature encoder and a classification head. The encoder
/// output is L2-normalized row-wise, so embeddings live on the unit sphere
/// and pairwise inner products are bounded in [-1, 1]. The normalization is
/// part of the network and is differentiated through.
struct MlpConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> encoder_hidden_dims;  // may be empty: single linear layer
  std::size_t embedding_dim = 0;
  std::vector<std::size_t> head_hidden_dims;  // may be empty: linear head
  std::size_t num_classes = 2;
  double dropout_rate = 0.0;  // in [0,1); applied after each hidden ReLU

  void validate() const;

  /// The tabular preset: hidden size 50 encoder, one hidden layer in the
  /// head, ReLU, dropout 0.2.
  static MlpConfig tabular_preset(std::size_t input_dim, std::size_t num_classes = 2);

  bool operator==(const MlpConfig&) const = default;
};

struct LinearLayer {
  DenseMatrix weight;  // in_dim x out_dim
  std::vector<double> bias;

  bool operator==(const LinearLayer&) const = default;
};

struct ModelParams {
  MlpConfig config;
  std::vector<LinearLayer> encoder_layers;  // w_f
  std::vector<LinearLayer> head_layers;     // w_c

  std::size_t num_params(bool head_only = false) const;

  bool operator==(const ModelParams&) const = default;
};

/// Gradient container shaped like the corresponding parameter subset.
struct ParamGrads {
  std::vector<LinearLayer> encoder_layers;  // empty in head-only scope
  std::vector<LinearLayer> head_layers;

  void add_scaled(const ParamGrads& other, double scale);
  void scale(double s);
  double squared_norm() const;
};

enum class GradScope { kHeadOnly, kFull };

/// Everything the backward pass needs from a forward pass. Encoder
/// intermediates are only retained when the forward ran with
/// retain_encoder=true; backward calls requiring them throw otherwise.
struct ForwardCache {
  bool train_mode = false;
  bool has_encoder = false;

  DenseMatrix input;
  // per-layer pre-ReLU activations and post-dropout outputs for the encoder
  std::vector<DenseMatrix> encoder_pre;
  std::vector<DenseMatrix> encoder_act;
  std::vector<DenseMatrix> encoder_mask;  // dropout keep-masks (already inverted-scaled)
  DenseMatrix embedding_raw;              // pre-normalization encoder output
  DenseMatrix embedding;                  // Z, unit-norm rows

  std::vector<DenseMatrix> head_pre;
  std::vector<DenseMatrix> head_act;
  std::vector<DenseMatrix> head_mask;
  DenseMatrix logits;
};

ModelParams init_params(const MlpConfig& cfg, SeededRng& rng);

/// Encoder forward: x -> Z (unit-norm rows). Dropout only in train_mode.
DenseMatrix encode(const ModelParams& params, const DenseMatrix& x, bool train_mode,
                   SeededRng& rng, ForwardCache* cache = nullptr);

/// Head forward: Z -> logits.
DenseMatrix head_logits(const ModelParams& params, const DenseMatrix& z, bool train_mode,
                        SeededRng& rng, ForwardCache* cache = nullptr);

/// Full forward pass, filling the cache for a later backward call.
/// retain_encoder controls whether encoder intermediates are kept (needed for
/// GradScope::kFull backward).
ForwardCache forward(const ModelParams& params, const DenseMatrix& x, bool train_mode,
                     SeededRng& rng, bool retain_encoder = true);

/// Per-sample cross-entropy: -log softmax(logits_j)[label_j].
std::vector<double> ce_loss_per_sample(const DenseMatrix& logits,
                                       const std::vector<std::size_t>& labels);

/// Gradient of sum_j weights_j * ce_j. kHeadOnly differentiates w.r.t. head
/// parameters with Z treated as input; kFull continues through the
/// normalization into the encoder.
ParamGrads backward_weighted(const ModelParams& params, const ForwardCache& cache,
                             const std::vector<std::size_t>& labels,
                             const std::vector<double>& sample_weights, GradScope scope);

/// Gradient of z_i . z_j w.r.t. encoder parameters (exactly zero when i == j,
/// because rows of Z have constant norm 1).
ParamGrads backward_similarity(const ModelParams& params, const ForwardCache& cache,
                               std::size_t i, std::size_t j);

/// General backward: d_logits is the gradient of the scalar objective w.r.t.
/// logits (may be empty for a similarity-only pass), dz_extra an additional
/// gradient injected at Z (empty or batch x embedding_dim). This is the
/// single path both wrappers above go through.
ParamGrads backward(const ModelParams& params, const ForwardCache& cache,
                    const DenseMatrix& d_logits, const DenseMatrix& dz_extra,
                    GradScope scope);

ParamGrads zero_grads(const ModelParams& params, GradScope scope);

/// Checkpoint round-trip: text header with the config, then row-major layer
/// arrays in hex floats (bitwise exact).
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace raan

#endif  // RAAN_MODEL_HPP_
