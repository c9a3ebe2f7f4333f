#ifndef RAAN_TESTS_TEST_UTIL_HPP_
#define RAAN_TESTS_TEST_UTIL_HPP_

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "raan/data.hpp"
#include "raan/model.hpp"
#include "raan/rng.hpp"

namespace testutil {

/// Pointers to every parameter coordinate, in the ParamGrads flattening order
/// (encoder layers first when in scope, then head layers).
inline std::vector<double*> param_coords(raan::ModelParams& p, raan::GradScope scope) {
  std::vector<double*> out;
  auto add = [&out](std::vector<raan::LinearLayer>& layers) {
    for (raan::LinearLayer& l : layers) {
      for (double& w : l.weight.data()) out.push_back(&w);
      for (double& b : l.bias) out.push_back(&b);
    }
  };
  if (scope == raan::GradScope::kFull) add(p.encoder_layers);
  add(p.head_layers);
  return out;
}

inline std::vector<double> grad_coords(const raan::ParamGrads& g, raan::GradScope scope) {
  std::vector<double> out;
  auto add = [&out](const std::vector<raan::LinearLayer>& layers) {
    for (const raan::LinearLayer& l : layers) {
      for (double w : l.weight.data()) out.push_back(w);
      for (double b : l.bias) out.push_back(b);
    }
  };
  if (scope == raan::GradScope::kFull) add(g.encoder_layers);
  add(g.head_layers);
  return out;
}

/// Central finite differences of a scalar function of the parameters.
template <typename F>
std::vector<double> fd_grad(raan::ModelParams& p, raan::GradScope scope, F f,
                            double h = 1e-6) {
  std::vector<double*> coords = param_coords(p, scope);
  std::vector<double> g(coords.size());
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const double saved = *coords[k];
    *coords[k] = saved + h;
    const double fp = f();
    *coords[k] = saved - h;
    const double fm = f();
    *coords[k] = saved;
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Balanced random dataset: `per_cell` Gaussian points in every (c, a) cell.
inline raan::Dataset balanced_dataset(std::size_t per_cell, std::size_t dim,
                                      std::size_t num_classes, std::size_t num_attributes,
                                      raan::SeededRng& rng) {
  raan::Dataset ds;
  const std::size_t n = per_cell * num_classes * num_attributes;
  ds.features = raan::DenseMatrix(n, dim);
  ds.num_classes = num_classes;
  ds.num_attributes = num_attributes;
  ds.name = "balanced_random";
  std::size_t row = 0;
  for (std::size_t c = 0; c < num_classes; ++c)
    for (std::size_t a = 0; a < num_attributes; ++a)
      for (std::size_t k = 0; k < per_cell; ++k, ++row) {
        ds.labels.push_back(c);
        ds.attributes.push_back(a);
        for (std::size_t j = 0; j < dim; ++j) ds.features(row, j) = rng.normal();
      }
  return ds;
}

/// Parameter draw that survives an eval forward over `x`. Narrow toy nets can
/// initialize with a fully dead ReLU row, which the unit-norm embedding
/// rejects; redraw until the forward pass succeeds. Identical to init_params
/// whenever the first draw works.
inline raan::ModelParams robust_init(const raan::MlpConfig& cfg, const raan::DenseMatrix& x,
                                     raan::SeededRng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    raan::ModelParams p = raan::init_params(cfg, rng);
    try {
      raan::SeededRng probe(0);
      raan::encode(p, x, false, probe);
      return p;
    } catch (const std::invalid_argument&) {
    }
  }
  throw std::runtime_error("robust_init: no viable parameter draw");
}

/// Small two-hidden-layer network for gradient checks (< 200 parameters).
inline raan::MlpConfig toy_config(std::size_t input_dim, std::size_t num_classes = 2) {
  raan::MlpConfig cfg;
  cfg.input_dim = input_dim;
  cfg.encoder_hidden_dims = {4};
  cfg.embedding_dim = 3;
  cfg.head_hidden_dims = {4};
  cfg.num_classes = num_classes;
  cfg.dropout_rate = 0.0;
  return cfg;
}

}  // namespace testutil

#endif  // RAAN_TESTS_TEST_UTIL_HPP_
