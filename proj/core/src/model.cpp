#include "raan/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace raan {

void MlpConfig::validate() const {
  if (input_dim < 1) throw std::invalid_argument("MlpConfig: input_dim must be >= 1");
  if (embedding_dim < 1) throw std::invalid_argument("MlpConfig: embedding_dim must be >= 1");
  if (num_classes < 2) throw std::invalid_argument("MlpConfig: num_classes must be >= 2");
  for (std::size_t d : encoder_hidden_dims)
    if (d < 1) throw std::invalid_argument("MlpConfig: encoder hidden dims must be >= 1");
  for (std::size_t d : head_hidden_dims)
    if (d < 1) throw std::invalid_argument("MlpConfig: head hidden dims must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw std::invalid_argument("MlpConfig: dropout_rate must lie in [0,1)");
}

MlpConfig MlpConfig::tabular_preset(std::size_t input_dim, std::size_t num_classes) {
  MlpConfig cfg;
  cfg.input_dim = input_dim;
  cfg.encoder_hidden_dims = {50};
  cfg.embedding_dim = 50;
  cfg.head_hidden_dims = {50};
  cfg.num_classes = num_classes;
  cfg.dropout_rate = 0.2;
  return cfg;
}

namespace {

std::vector<std::size_t> encoder_dims(const MlpConfig& cfg) {
  std::vector<std::size_t> dims{cfg.input_dim};
  dims.insert(dims.end(), cfg.encoder_hidden_dims.begin(), cfg.encoder_hidden_dims.end());
  dims.push_back(cfg.embedding_dim);
  return dims;
}

std::vector<std::size_t> head_dims(const MlpConfig& cfg) {
  std::vector<std::size_t> dims{cfg.embedding_dim};
  dims.insert(dims.end(), cfg.head_hidden_dims.begin(), cfg.head_hidden_dims.end());
  dims.push_back(cfg.num_classes);
  return dims;
}

std::vector<LinearLayer> init_chain(const std::vector<std::size_t>& dims, SeededRng& rng) {
  std::vector<LinearLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    LinearLayer layer;
    layer.weight = DenseMatrix(dims[l], dims[l + 1]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
    layer.bias.assign(dims[l + 1], 0.0);
    layers.push_back(std::move(layer));
  }
  return layers;
}

DenseMatrix affine(const DenseMatrix& x, const LinearLayer& layer) {
  DenseMatrix out = matmul(x, layer.weight);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    for (std::size_t j = 0; j < out.cols(); ++j) row[j] += layer.bias[j];
  }
  return out;
}

// Applies ReLU in place and returns the inverted-scale dropout keep mask
// (all ones in eval mode).
DenseMatrix relu_dropout(DenseMatrix& a, double dropout_rate, bool train_mode, SeededRng& rng) {
  DenseMatrix mask(a.rows(), a.cols(), 1.0);
  const bool drop = train_mode && dropout_rate > 0.0;
  const double keep = 1.0 - dropout_rate;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double& x = a.data()[i];
    x = x > 0.0 ? x : 0.0;
    if (drop) {
      const double m = rng.uniform() < keep ? 1.0 / keep : 0.0;
      mask.data()[i] = m;
      x *= m;
    }
  }
  return mask;
}

struct ChainResult {
  DenseMatrix output;
};

// Forward through one layer chain; records pre-activations, post-dropout
// activations and masks for all hidden layers.
DenseMatrix run_chain(const std::vector<LinearLayer>& layers, const DenseMatrix& input,
                      double dropout_rate, bool train_mode, SeededRng& rng,
                      std::vector<DenseMatrix>* pre, std::vector<DenseMatrix>* act,
                      std::vector<DenseMatrix>* mask) {
  DenseMatrix a = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    DenseMatrix p = affine(a, layers[l]);
    if (l + 1 == layers.size()) {
      if (pre) pre->push_back(p);
      return p;
    }
    if (pre) pre->push_back(p);
    DenseMatrix h = p;
    DenseMatrix m = relu_dropout(h, dropout_rate, train_mode, rng);
    if (act) act->push_back(h);
    if (mask) mask->push_back(m);
    a = std::move(h);
  }
  return a;  // no layers: identity (not reachable, chains always have >= 1 layer)
}

// Backward through a layer chain. `d_out` is the gradient at the chain's
// final pre-activation output. Returns the gradient at the chain input.
DenseMatrix chain_backward(const std::vector<LinearLayer>& layers, const DenseMatrix& input,
                           const std::vector<DenseMatrix>& pre,
                           const std::vector<DenseMatrix>& act,
                           const std::vector<DenseMatrix>& mask, const DenseMatrix& d_out,
                           std::vector<LinearLayer>& grads) {
  DenseMatrix d = d_out;
  for (std::size_t li = layers.size(); li-- > 0;) {
    const DenseMatrix& layer_input = (li == 0) ? input : act[li - 1];
    // dW = input^T d, db = column sums of d
    LinearLayer& g = grads[li];
    for (std::size_t i = 0; i < d.rows(); ++i) {
      const auto xrow = layer_input.row(i);
      const auto drow = d.row(i);
      for (std::size_t c = 0; c < d.cols(); ++c) g.bias[c] += drow[c];
      for (std::size_t r = 0; r < layer_input.cols(); ++r) {
        const double xv = xrow[r];
        if (xv == 0.0) continue;
        auto wrow = g.weight.row(r);
        for (std::size_t c = 0; c < d.cols(); ++c) wrow[c] += xv * drow[c];
      }
    }
    DenseMatrix d_in = matmul_transposed(d, layers[li].weight);
    if (li > 0) {
      // through dropout and ReLU of the previous hidden layer
      const DenseMatrix& p = pre[li - 1];
      const DenseMatrix& m = mask[li - 1];
      for (std::size_t i = 0; i < d_in.size(); ++i) {
        d_in.data()[i] *= (p.data()[i] > 0.0 ? 1.0 : 0.0) * m.data()[i];
      }
    }
    d = std::move(d_in);
  }
  return d;
}

}  // namespace

ModelParams init_params(const MlpConfig& cfg, SeededRng& rng) {
  cfg.validate();
  ModelParams params;
  params.config = cfg;
  params.encoder_layers = init_chain(encoder_dims(cfg), rng);
  params.head_layers = init_chain(head_dims(cfg), rng);
  return params;
}

std::size_t ModelParams::num_params(bool head_only) const {
  std::size_t n = 0;
  for (const auto& l : head_layers) n += l.weight.size() + l.bias.size();
  if (!head_only)
    for (const auto& l : encoder_layers) n += l.weight.size() + l.bias.size();
  return n;
}

DenseMatrix encode(const ModelParams& params, const DenseMatrix& x, bool train_mode,
                   SeededRng& rng, ForwardCache* cache) {
  if (x.cols() != params.config.input_dim) {
    throw std::invalid_argument("encode: input has " + std::to_string(x.cols()) +
                                " columns, expected " +
                                std::to_string(params.config.input_dim));
  }
  std::vector<DenseMatrix> pre, act, mask;
  DenseMatrix raw = run_chain(params.encoder_layers, x, params.config.dropout_rate,
                              train_mode, rng, &pre, &act, &mask);
  pre.pop_back();  // run_chain records the final pre-activation; raw holds it
  DenseMatrix z = l2_normalize_rows(raw);
  if (cache) {
    cache->train_mode = train_mode;
    cache->has_encoder = true;
    cache->input = x;
    cache->encoder_pre = std::move(pre);
    cache->encoder_act = std::move(act);
    cache->encoder_mask = std::move(mask);
    cache->embedding_raw = std::move(raw);
    cache->embedding = z;
  }
  return z;
}

DenseMatrix head_logits(const ModelParams& params, const DenseMatrix& z, bool train_mode,
                        SeededRng& rng, ForwardCache* cache) {
  if (z.cols() != params.config.embedding_dim) {
    throw std::invalid_argument("head_logits: embedding has " + std::to_string(z.cols()) +
                                " columns, expected " +
                                std::to_string(params.config.embedding_dim));
  }
  std::vector<DenseMatrix> pre, act, mask;
  DenseMatrix logits = run_chain(params.head_layers, z, params.config.dropout_rate,
                                 train_mode, rng, &pre, &act, &mask);
  pre.pop_back();
  if (cache) {
    cache->train_mode = train_mode;
    cache->embedding = z;
    cache->head_pre = std::move(pre);
    cache->head_act = std::move(act);
    cache->head_mask = std::move(mask);
    cache->logits = logits;
  }
  return logits;
}

ForwardCache forward(const ModelParams& params, const DenseMatrix& x, bool train_mode,
                     SeededRng& rng, bool retain_encoder) {
  ForwardCache cache;
  DenseMatrix z = encode(params, x, train_mode, rng, &cache);
  head_logits(params, z, train_mode, rng, &cache);
  if (!retain_encoder) {
    cache.has_encoder = false;
    cache.input = DenseMatrix();
    cache.encoder_pre.clear();
    cache.encoder_act.clear();
    cache.encoder_mask.clear();
    cache.embedding_raw = DenseMatrix();
  }
  return cache;
}

std::vector<double> ce_loss_per_sample(const DenseMatrix& logits,
                                       const std::vector<std::size_t>& labels) {
  if (labels.size() != logits.rows())
    throw std::invalid_argument("ce_loss_per_sample: label/logit row mismatch");
  std::vector<double> losses(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= logits.cols())
      throw std::invalid_argument("ce_loss_per_sample: label " + std::to_string(labels[i]) +
                                  " out of range at row " + std::to_string(i));
    const auto row = logits.row(i);
    const double m = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - m);
    losses[i] = m + std::log(sum) - row[labels[i]];
  }
  return losses;
}

ParamGrads zero_grads(const ModelParams& params, GradScope scope) {
  ParamGrads g;
  auto zero_like = [](const std::vector<LinearLayer>& layers) {
    std::vector<LinearLayer> out;
    for (const auto& l : layers) {
      LinearLayer z;
      z.weight = DenseMatrix(l.weight.rows(), l.weight.cols());
      z.bias.assign(l.bias.size(), 0.0);
      out.push_back(std::move(z));
    }
    return out;
  };
  g.head_layers = zero_like(params.head_layers);
  if (scope == GradScope::kFull) g.encoder_layers = zero_like(params.encoder_layers);
  return g;
}

void ParamGrads::add_scaled(const ParamGrads& other, double scale) {
  auto acc = [scale](std::vector<LinearLayer>& a, const std::vector<LinearLayer>& b) {
    for (std::size_t l = 0; l < a.size(); ++l) {
      for (std::size_t i = 0; i < a[l].weight.size(); ++i)
        a[l].weight.data()[i] += scale * b[l].weight.data()[i];
      for (std::size_t i = 0; i < a[l].bias.size(); ++i)
        a[l].bias[i] += scale * b[l].bias[i];
    }
  };
  acc(head_layers, other.head_layers);
  acc(encoder_layers, other.encoder_layers);
}

void ParamGrads::scale(double s) {
  for (auto* layers : {&head_layers, &encoder_layers})
    for (auto& l : *layers) {
      for (double& v : l.weight.data()) v *= s;
      for (double& v : l.bias) v *= s;
    }
}

double ParamGrads::squared_norm() const {
  double s = 0.0;
  for (const auto* layers : {&head_layers, &encoder_layers})
    for (const auto& l : *layers) {
      for (double v : l.weight.data()) s += v * v;
      for (double v : l.bias) s += v * v;
    }
  return s;
}

ParamGrads backward(const ModelParams& params, const ForwardCache& cache,
                    const DenseMatrix& d_logits, const DenseMatrix& dz_extra,
                    GradScope scope) {
  ParamGrads grads = zero_grads(params, scope);
  DenseMatrix dz(cache.embedding.rows(), cache.embedding.cols());
  if (d_logits.size() > 0) {
    DenseMatrix d_head_in =
        chain_backward(params.head_layers, cache.embedding, cache.head_pre, cache.head_act,
                       cache.head_mask, d_logits, grads.head_layers);
    dz = std::move(d_head_in);
  }
  if (dz_extra.size() > 0) {
    if (dz_extra.rows() != dz.rows() || dz_extra.cols() != dz.cols())
      throw std::invalid_argument("backward: dz_extra shape mismatch");
    for (std::size_t i = 0; i < dz.size(); ++i) dz.data()[i] += dz_extra.data()[i];
  }
  if (scope == GradScope::kHeadOnly) return grads;
  if (!cache.has_encoder)
    throw std::invalid_argument(
        "backward: full scope requested but the cache was built head-only (no encoder "
        "intermediates)");
  // through the row normalization: z = h/||h||, dh = (dz - z (z.dz)) / ||h||
  DenseMatrix dh(dz.rows(), dz.cols());
  for (std::size_t i = 0; i < dz.rows(); ++i) {
    const auto h = cache.embedding_raw.row(i);
    const auto z = cache.embedding.row(i);
    const auto dzi = dz.row(i);
    const double norm = std::sqrt(dot(h, h));
    const double zdz = dot(z, dzi);
    auto out = dh.row(i);
    for (std::size_t c = 0; c < dz.cols(); ++c) out[c] = (dzi[c] - z[c] * zdz) / norm;
  }
  chain_backward(params.encoder_layers, cache.input, cache.encoder_pre, cache.encoder_act,
                 cache.encoder_mask, dh, grads.encoder_layers);
  return grads;
}

ParamGrads backward_weighted(const ModelParams& params, const ForwardCache& cache,
                             const std::vector<std::size_t>& labels,
                             const std::vector<double>& sample_weights, GradScope scope) {
  if (labels.size() != cache.logits.rows() || sample_weights.size() != labels.size())
    throw std::invalid_argument("backward_weighted: batch size mismatch");
  DenseMatrix d_logits(cache.logits.rows(), cache.logits.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = cache.logits.row(i);
    std::vector<double> sm = stable_softmax(row, 1.0);
    auto drow = d_logits.row(i);
    for (std::size_t c = 0; c < sm.size(); ++c) drow[c] = sample_weights[i] * sm[c];
    drow[labels[i]] -= sample_weights[i];
  }
  return backward(params, cache, d_logits, DenseMatrix(), scope);
}

ParamGrads backward_similarity(const ModelParams& params, const ForwardCache& cache,
                               std::size_t i, std::size_t j) {
  if (!cache.has_encoder)
    throw std::invalid_argument("backward_similarity: cache lacks encoder intermediates");
  DenseMatrix dz(cache.embedding.rows(), cache.embedding.cols());
  for (std::size_t c = 0; c < cache.embedding.cols(); ++c) {
    dz(i, c) += cache.embedding(j, c);
    dz(j, c) += cache.embedding(i, c);
  }
  return backward(params, cache, DenseMatrix(), dz, GradScope::kFull);
}

namespace {
void write_doubles(std::ostream& os, const std::vector<double>& v) {
  for (double d : v) {
    os << ' ' << std::hex << std::bit_cast<std::uint64_t>(d) << std::dec;
  }
  os << '\n';
}

std::vector<double> read_doubles(std::istream& is, std::size_t n) {
  std::vector<double> out(n);
  for (auto& d : out) {
    std::uint64_t bits;
    if (!(is >> std::hex >> bits >> std::dec))
      throw std::runtime_error("checkpoint: truncated parameter array");
    d = std::bit_cast<double>(bits);
  }
  return out;
}

void write_dims(std::ostream& os, const std::vector<std::size_t>& dims) {
  os << dims.size();
  for (auto d : dims) os << ' ' << d;
  os << '\n';
}

std::vector<std::size_t> read_dims(std::istream& is) {
  std::size_t n;
  if (!(is >> n)) throw std::runtime_error("checkpoint: bad dim list");
  std::vector<std::size_t> dims(n);
  for (auto& d : dims) is >> d;
  return dims;
}
}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  os << "raan-checkpoint 1\n";
  const auto& cfg = params.config;
  os << cfg.input_dim << ' ' << cfg.embedding_dim << ' ' << cfg.num_classes << ' '
     << std::hex << std::bit_cast<std::uint64_t>(cfg.dropout_rate) << std::dec << '\n';
  write_dims(os, cfg.encoder_hidden_dims);
  write_dims(os, cfg.head_hidden_dims);
  for (const auto* layers : {&params.encoder_layers, &params.head_layers}) {
    for (const auto& l : *layers) {
      os << l.weight.rows() << ' ' << l.weight.cols() << '\n';
      write_doubles(os, l.weight.data());
      write_doubles(os, l.bias);
    }
  }
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string magic;
  int version;
  is >> magic >> version;
  if (magic != "raan-checkpoint" || version != 1)
    throw std::runtime_error("load_checkpoint: unrecognized format in " + path);
  MlpConfig cfg;
  std::uint64_t drop_bits;
  is >> cfg.input_dim >> cfg.embedding_dim >> cfg.num_classes >> std::hex >> drop_bits >>
      std::dec;
  cfg.dropout_rate = std::bit_cast<double>(drop_bits);
  cfg.encoder_hidden_dims = read_dims(is);
  cfg.head_hidden_dims = read_dims(is);
  ModelParams params;
  params.config = cfg;
  auto read_chain = [&is](std::size_t count) {
    std::vector<LinearLayer> layers;
    for (std::size_t l = 0; l < count; ++l) {
      std::size_t r, c;
      if (!(is >> r >> c)) throw std::runtime_error("checkpoint: bad layer shape");
      LinearLayer layer;
      layer.weight = DenseMatrix(r, c, read_doubles(is, r * c));
      layer.bias = read_doubles(is, c);
      layers.push_back(std::move(layer));
    }
    return layers;
  };
  params.encoder_layers = read_chain(cfg.encoder_hidden_dims.size() + 1);
  params.head_layers = read_chain(cfg.head_hidden_dims.size() + 1);
  return params;
}

}  // namespace raan
