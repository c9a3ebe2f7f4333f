#include "raan/scraan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "raan/fairness.hpp"

namespace raan {

EstimatorTable::EstimatorTable(std::size_t n, double u0_in) : u0(u0_in) {
  if (!(u0 > 0.0)) throw std::invalid_argument("EstimatorTable: u0 must be positive");
  u1.assign(n, 0.0);
  u2.assign(n, 0.0);
  visited.assign(n, 0);
}

void ug_update(EstimatorTable& table, std::size_t i, const InnerValue& ghat, double gamma) {
  if (i >= table.u1.size())
    throw std::invalid_argument("ug_update: sample index out of range");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("ug_update: gamma must lie in (0, 1]");
  const double g = table.visited[i] ? gamma : 1.0;
  table.u1[i] = (1.0 - g) * table.u1[i] + g * ghat.g1;
  table.u2[i] = std::max((1.0 - g) * table.u2[i] + g * ghat.g2, table.u0);
  table.visited[i] = 1;
}

std::vector<std::optional<InnerValue>> ghat_batch(const DenseMatrix& z,
                                                  const std::vector<double>& losses,
                                                  const std::vector<std::size_t>& centers,
                                                  const std::vector<std::size_t>& batch,
                                                  const GroupIndex& gi, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("ghat_batch: tau must be positive");
  std::vector<char> in_batch(gi.num_samples(), 0);
  for (std::size_t j : batch) in_batch[j] = 1;
  const double ac = static_cast<double>(gi.num_attributes() * gi.num_classes());
  std::vector<std::optional<InnerValue>> out;
  out.reserve(centers.size());
  for (std::size_t i : centers) {
    double e_sum = 0.0, el_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t j : gi.neighbors(i)) {
      if (!in_batch[j]) continue;
      const double e = std::exp(dot(z.row(i), z.row(j)) / tau);
      e_sum += e;
      el_sum += e * losses[j];
      ++count;
    }
    if (count == 0) {
      out.push_back(std::nullopt);
      continue;
    }
    const double scale = static_cast<double>(gi.num_samples()) / (ac * static_cast<double>(count));
    out.push_back(InnerValue{scale * el_sum, scale * e_sum});
  }
  return out;
}

namespace {

DenseMatrix ce_logit_grads(const ForwardCache& cache, const std::vector<std::size_t>& labels,
                           const std::vector<double>& weights) {
  DenseMatrix d(cache.logits.rows(), cache.logits.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::vector<double> sm = stable_softmax(cache.logits.row(i), 1.0);
    auto drow = d.row(i);
    for (std::size_t c = 0; c < sm.size(); ++c) drow[c] = weights[i] * sm[c];
    drow[labels[i]] -= weights[i];
  }
  return d;
}

}  // namespace

ParamGrads grad_estimator(const ModelParams& params, const ForwardCache& cache,
                          const std::vector<std::size_t>& batch, const EstimatorTable& table,
                          const GroupIndex& gi, double tau, GradScope scope) {
  if (!(tau > 0.0)) throw std::invalid_argument("grad_estimator: tau must be positive");
  const std::size_t bsz = batch.size();
  if (cache.logits.rows() != bsz)
    throw std::invalid_argument("grad_estimator: cache rows do not match the batch");
  std::vector<std::ptrdiff_t> pos(gi.num_samples(), -1);
  for (std::size_t k = 0; k < bsz; ++k) pos[batch[k]] = static_cast<std::ptrdiff_t>(k);

  std::vector<std::size_t> labels(bsz);
  for (std::size_t k = 0; k < bsz; ++k) labels[k] = gi.label_of(batch[k]);
  const std::vector<double> losses = ce_loss_per_sample(cache.logits, labels);

  const DenseMatrix& zb = cache.embedding;
  const double ac = static_cast<double>(gi.num_attributes() * gi.num_classes());
  const double inv_b = 1.0 / static_cast<double>(bsz);
  const bool full = scope == GradScope::kFull;

  std::vector<double> weights(bsz, 0.0);
  DenseMatrix dz;
  if (full) dz = DenseMatrix(bsz, zb.cols());

  std::vector<std::size_t> nbr_pos;
  for (std::size_t bi = 0; bi < bsz; ++bi) {
    const std::size_t i = batch[bi];
    nbr_pos.clear();
    for (std::size_t j : gi.neighbors(i))
      if (pos[j] >= 0) nbr_pos.push_back(static_cast<std::size_t>(pos[j]));
    if (nbr_pos.empty()) continue;
    if (!table.visited[i])
      throw std::invalid_argument("grad_estimator: estimator row for sample " +
                                  std::to_string(i) + " was never updated");
    const double u1 = table.u1[i];
    const double u2 = table.u2[i];
    const double scale =
        static_cast<double>(gi.num_samples()) / (ac * static_cast<double>(nbr_pos.size()));
    for (std::size_t bj : nbr_pos) {
      const double e = std::exp(dot(zb.row(bi), zb.row(bj)) / tau);
      const double common = inv_b * scale * e;
      weights[bj] += common / u2;
      if (full) {
        const double csim = common / tau * (losses[bj] / u2 - u1 / (u2 * u2));
        auto dzi = dz.row(bi);
        auto dzj = dz.row(bj);
        const auto zi = zb.row(bi);
        const auto zj = zb.row(bj);
        for (std::size_t c = 0; c < zb.cols(); ++c) {
          dzi[c] += csim * zj[c];
          dzj[c] += csim * zi[c];
        }
      }
    }
  }
  return backward(params, cache, ce_logit_grads(cache, labels, weights), dz, scope);
}

ParamGrads exact_raan_gradient(const ModelParams& params, const ForwardCache& cache,
                               const GroupIndex& gi, double tau, GradScope scope,
                               CenterWeighting weighting) {
  const std::size_t n = gi.num_samples();
  if (cache.logits.rows() != n)
    throw std::invalid_argument("exact_raan_gradient: cache must cover the full dataset");
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = gi.label_of(i);
  const std::vector<double> losses = ce_loss_per_sample(cache.logits, labels);
  const DenseMatrix& z = cache.embedding;
  const double ac = static_cast<double>(gi.num_attributes() * gi.num_classes());
  const bool full = scope == GradScope::kFull;

  std::vector<double> weights(n, 0.0);
  DenseMatrix dz;
  if (full) dz = DenseMatrix(n, z.cols());

  for (std::size_t i = 0; i < n; ++i) {
    const auto& nbrs = gi.neighbors(i);
    if (nbrs.empty())
      throw std::invalid_argument("exact_raan_gradient: empty neighborhood for sample " +
                                  std::to_string(i));
    const std::vector<double> pij = pair_weights(z, i, nbrs, tau);
    // Per-pair coefficient c_ij: uniform centers give the compositional
    // objective, per-target cell normalization gives raan_value.
    std::vector<double> c(nbrs.size());
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      c[k] = weighting == CenterWeighting::kUniform
                 ? 1.0 / static_cast<double>(n)
                 : 1.0 / (ac * static_cast<double>(gi.neighbors(nbrs[k]).size()));
    }
    double mi = 0.0;  // sum_j c_ij p_ij loss_j, the softmax-coupling term
    for (std::size_t k = 0; k < nbrs.size(); ++k) mi += c[k] * pij[k] * losses[nbrs[k]];
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      const std::size_t j = nbrs[k];
      weights[j] += c[k] * pij[k];
      if (full) {
        const double csim = pij[k] / tau * (c[k] * losses[j] - mi);
        auto dzi = dz.row(i);
        auto dzj = dz.row(j);
        const auto zi = z.row(i);
        const auto zj = z.row(j);
        for (std::size_t col = 0; col < z.cols(); ++col) {
          dzi[col] += csim * zj[col];
          dzj[col] += csim * zi[col];
        }
      }
    }
  }
  return backward(params, cache, ce_logit_grads(cache, labels, weights), dz, scope);
}

void AdamConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("AdamConfig: alpha must be positive");
  if (!(eps > 0.0)) throw std::invalid_argument("AdamConfig: eps must be positive");
  if (!(eta1 >= 0.0 && eta1 < 1.0) || !(eta2 >= 0.0 && eta2 < 1.0))
    throw std::invalid_argument("AdamConfig: eta1 and eta2 must lie in [0, 1)");
  if (eta1 > std::sqrt(eta2))
    throw std::invalid_argument("AdamConfig: requires eta1 <= sqrt(eta2)");
}

AdamState AdamState::init(const ModelParams& params, GradScope scope) {
  AdamState st;
  st.h = zero_grads(params, scope);
  st.v = zero_grads(params, scope);
  st.vhat = zero_grads(params, scope);
  return st;
}

namespace {

template <typename F>
void zip_layers(std::vector<LinearLayer>& params, const std::vector<LinearLayer>& grads,
                F&& f) {
  for (std::size_t l = 0; l < grads.size(); ++l) {
    for (std::size_t i = 0; i < grads[l].weight.size(); ++i)
      f(params[l].weight.data()[i], grads[l].weight.data()[i]);
    for (std::size_t i = 0; i < grads[l].bias.size(); ++i)
      f(params[l].bias[i], grads[l].bias[i]);
  }
}

}  // namespace

void uw_sgd(ModelParams& params, const ParamGrads& grad, const SgdConfig& cfg,
            GradScope scope) {
  if (!(cfg.alpha > 0.0)) throw std::invalid_argument("uw_sgd: alpha must be positive");
  auto step = [&cfg](double& w, double g) { w -= cfg.alpha * g; };
  zip_layers(params.head_layers, grad.head_layers, step);
  if (scope == GradScope::kFull) {
    if (grad.encoder_layers.size() != params.encoder_layers.size())
      throw std::invalid_argument("uw_sgd: full scope needs encoder gradients");
    zip_layers(params.encoder_layers, grad.encoder_layers, step);
  }
}

void uw_adam(ModelParams& params, AdamState& state, const ParamGrads& grad,
             const AdamConfig& cfg, GradScope scope) {
  cfg.validate();
  auto step = [&cfg](std::vector<LinearLayer>& w, std::vector<LinearLayer>& h,
                     std::vector<LinearLayer>& v, std::vector<LinearLayer>& vhat,
                     const std::vector<LinearLayer>& g) {
    for (std::size_t l = 0; l < g.size(); ++l) {
      auto update = [&cfg](double& wv, double& hv, double& vv, double& vhv, double gv) {
        hv = cfg.eta1 * hv + (1.0 - cfg.eta1) * gv;
        vv = cfg.eta2 * vhv + (1.0 - cfg.eta2) * gv * gv;
        vhv = cfg.amsgrad ? std::max(vhv, vv) : vv;
        wv -= cfg.alpha * hv / std::sqrt(cfg.eps + vhv);
      };
      for (std::size_t i = 0; i < g[l].weight.size(); ++i)
        update(w[l].weight.data()[i], h[l].weight.data()[i], v[l].weight.data()[i],
               vhat[l].weight.data()[i], g[l].weight.data()[i]);
      for (std::size_t i = 0; i < g[l].bias.size(); ++i)
        update(w[l].bias[i], h[l].bias[i], v[l].bias[i], vhat[l].bias[i], g[l].bias[i]);
    }
  };
  step(params.head_layers, state.h.head_layers, state.v.head_layers, state.vhat.head_layers,
       grad.head_layers);
  if (scope == GradScope::kFull) {
    if (grad.encoder_layers.size() != params.encoder_layers.size())
      throw std::invalid_argument("uw_adam: full scope needs encoder gradients");
    step(params.encoder_layers, state.h.encoder_layers, state.v.encoder_layers,
         state.vhat.encoder_layers, grad.encoder_layers);
  }
}

TheoryHparams theory_hparams(std::size_t n, std::size_t total_steps) {
  if (n == 0) throw std::invalid_argument("theory_hparams: n must be positive");
  if (total_steps <= n)
    throw std::invalid_argument("theory_hparams: total_steps must exceed n (got T=" +
                                std::to_string(total_steps) + ", n=" + std::to_string(n) + ")");
  const double nn = static_cast<double>(n);
  const double tt = static_cast<double>(total_steps);
  TheoryHparams hp;
  hp.alpha = 1.0 / (std::pow(nn, 0.4) * std::pow(tt, 0.6));
  hp.gamma = std::pow(nn / tt, 0.4);
  return hp;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
  if (min_cell_quota == 0)
    throw std::invalid_argument("TrainConfig: min_cell_quota must be positive");
  if (!(tau > 0.0)) throw std::invalid_argument("TrainConfig: tau must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("TrainConfig: gamma must lie in (0, 1]");
  if (!(u0 > 0.0)) throw std::invalid_argument("TrainConfig: u0 must be positive");
  if (eval_subset_max == 0)
    throw std::invalid_argument("TrainConfig: eval_subset_max must be positive");
}

namespace {

DenseMatrix gather_rows(const DenseMatrix& m, const std::vector<std::size_t>& idx) {
  DenseMatrix out(idx.size(), m.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto src = m.row(idx[k]);
    auto dst = out.row(k);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return out;
}

std::vector<std::size_t> pick_eval_subset(const GroupIndex& gi, std::size_t cap,
                                          SeededRng& rng) {
  const std::size_t n = gi.num_samples();
  std::vector<std::size_t> idx;
  if (n <= cap) {
    idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
  }
  // proportional per-cell allocation, at least one from each cell, so the
  // subsample keeps every neighborhood populated
  for (std::size_t c = 0; c < gi.num_classes(); ++c)
    for (std::size_t a = 0; a < gi.num_attributes(); ++a) {
      std::vector<std::size_t> members = gi.cell(c, a);
      rng.shuffle(members);
      const std::size_t take = std::max<std::size_t>(1, members.size() * cap / n);
      idx.insert(idx.end(), members.begin(), members.begin() + std::min(take, members.size()));
    }
  std::sort(idx.begin(), idx.end());
  return idx;
}

void update_table_from_batch(const DenseMatrix& zb, const std::vector<double>& losses,
                             const std::vector<std::size_t>& batch, const GroupIndex& gi,
                             EstimatorTable& table, double gamma, double tau) {
  std::vector<std::ptrdiff_t> pos(gi.num_samples(), -1);
  for (std::size_t k = 0; k < batch.size(); ++k) pos[batch[k]] = static_cast<std::ptrdiff_t>(k);
  const double ac = static_cast<double>(gi.num_attributes() * gi.num_classes());
  for (std::size_t bi = 0; bi < batch.size(); ++bi) {
    const std::size_t i = batch[bi];
    double e_sum = 0.0, el_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t j : gi.neighbors(i)) {
      if (pos[j] < 0) continue;
      const std::size_t bj = static_cast<std::size_t>(pos[j]);
      const double e = std::exp(dot(zb.row(bi), zb.row(bj)) / tau);
      e_sum += e;
      el_sum += e * losses[bj];
      ++count;
    }
    if (count == 0) continue;
    const double scale =
        static_cast<double>(gi.num_samples()) / (ac * static_cast<double>(count));
    ug_update(table, i, InnerValue{scale * el_sum, scale * e_sum}, gamma);
  }
}

}  // namespace

std::vector<TrainLogRow> train(const Dataset& dataset, ModelParams& params,
                               const TrainConfig& cfg, const OptimizerConfig& opt) {
  dataset.validate();
  cfg.validate();
  if (opt.kind == OptimizerConfig::Kind::kAdam) opt.adam.validate();
  if (opt.kind == OptimizerConfig::Kind::kSgd && !(opt.sgd.alpha > 0.0))
    throw std::invalid_argument("train: sgd alpha must be positive");
  if (params.config.input_dim != dataset.features.cols())
    throw std::invalid_argument("train: model input_dim does not match dataset features");
  if (params.config.num_classes != dataset.num_classes)
    throw std::invalid_argument("train: model num_classes does not match dataset");
  const GroupIndex gi = dataset.group_index();
  gi.require_all_cells_nonempty();
  const std::size_t n = dataset.size();

  SeededRng rng(cfg.seed);
  const std::vector<std::size_t> eval_idx = pick_eval_subset(gi, cfg.eval_subset_max, rng);
  std::vector<std::size_t> eval_labels, eval_attrs;
  for (std::size_t i : eval_idx) {
    eval_labels.push_back(dataset.labels[i]);
    eval_attrs.push_back(dataset.attributes[i]);
  }
  const GroupIndex eval_gi(eval_labels, eval_attrs, dataset.num_classes,
                           dataset.num_attributes);
  const bool binary = dataset.num_classes == 2 && dataset.num_attributes == 2;

  std::vector<TrainLogRow> log;
  auto record = [&](std::size_t epoch, int stage) {
    ForwardCache ec = forward(params, dataset.features, false, rng, false);
    const std::vector<double> losses = ce_loss_per_sample(ec.logits, dataset.labels);
    TrainLogRow row;
    row.epoch = epoch;
    row.stage = stage;
    double ce = 0.0, correct = 0.0;
    std::vector<int> preds(n);
    for (std::size_t i = 0; i < n; ++i) {
      ce += losses[i];
      const auto lr = ec.logits.row(i);
      const std::size_t p = static_cast<std::size_t>(
          std::max_element(lr.begin(), lr.end()) - lr.begin());
      preds[i] = static_cast<int>(p);
      correct += (p == dataset.labels[i]);
    }
    row.ce = ce / static_cast<double>(n);
    row.accuracy = correct / static_cast<double>(n);
    if (binary) {
      EvalFrame frame;
      frame.predictions = preds;
      for (std::size_t i = 0; i < n; ++i) {
        frame.labels.push_back(static_cast<int>(dataset.labels[i]));
        frame.attributes.push_back(static_cast<int>(dataset.attributes[i]));
      }
      row.dp = dp_gap(frame);
      row.eo = eo_gap(frame);
      row.worst_group = worst_group_accuracy(frame);
    } else {
      row.dp = row.eo = row.worst_group = std::numeric_limits<double>::quiet_NaN();
    }
    DenseMatrix z_sub = gather_rows(ec.embedding, eval_idx);
    std::vector<double> losses_sub;
    for (std::size_t i : eval_idx) losses_sub.push_back(losses[i]);
    row.raan = raan_value(z_sub, losses_sub, eval_gi, cfg.tau);
    log.push_back(row);
  };

  const GradScope stage2_scope =
      cfg.mode == TrainMode::kHeadOnly ? GradScope::kHeadOnly : GradScope::kFull;
  auto apply = [&](const ParamGrads& grad, AdamState& st, GradScope scope) {
    if (opt.kind == OptimizerConfig::Kind::kSgd)
      uw_sgd(params, grad, opt.sgd, scope);
    else
      uw_adam(params, st, grad, opt.adam, scope);
  };

  // stage 1: plain minibatch cross-entropy
  AdamState st1 = AdamState::init(params, GradScope::kFull);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t epoch = 1; epoch <= cfg.stage1_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, n);
      const std::vector<std::size_t> batch(order.begin() + start, order.begin() + stop);
      DenseMatrix xb = gather_rows(dataset.features, batch);
      ForwardCache cache = forward(params, xb, true, rng, true);
      std::vector<std::size_t> labels(batch.size());
      for (std::size_t k = 0; k < batch.size(); ++k) labels[k] = dataset.labels[batch[k]];
      const std::vector<double> weights(batch.size(), 1.0 / static_cast<double>(batch.size()));
      ParamGrads grad = backward_weighted(params, cache, labels, weights, GradScope::kFull);
      apply(grad, st1, GradScope::kFull);
    }
    record(epoch, 1);
  }

  // stage 2: stochastic compositional robust updates
  if (cfg.stage2_epochs > 0) {
    AdamState st2 = AdamState::init(params, stage2_scope);
    EstimatorTable table(n, cfg.u0);
    DenseMatrix z_full;
    if (cfg.mode == TrainMode::kHeadOnly)
      z_full = encode(params, dataset.features, false, rng);
    for (std::size_t epoch = 1; epoch <= cfg.stage2_epochs; ++epoch) {
      const auto batches = stratified_batches(gi, cfg.batch_size, cfg.min_cell_quota, rng);
      for (const std::vector<std::size_t>& batch : batches) {
        ForwardCache cache;
        if (cfg.mode == TrainMode::kHeadOnly) {
          DenseMatrix zb = gather_rows(z_full, batch);
          head_logits(params, zb, true, rng, &cache);
        } else {
          DenseMatrix xb = gather_rows(dataset.features, batch);
          cache = forward(params, xb, true, rng, true);
        }
        std::vector<std::size_t> labels(batch.size());
        for (std::size_t k = 0; k < batch.size(); ++k) labels[k] = dataset.labels[batch[k]];
        const std::vector<double> losses = ce_loss_per_sample(cache.logits, labels);
        update_table_from_batch(cache.embedding, losses, batch, gi, table, cfg.gamma,
                                cfg.tau);
        ParamGrads grad = grad_estimator(params, cache, batch, table, gi, cfg.tau,
                                         stage2_scope);
        apply(grad, st2, stage2_scope);
      }
      record(cfg.stage1_epochs + epoch, 2);
    }
  }
  return log;
}

}  // namespace raan
