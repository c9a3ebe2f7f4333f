// Microbenchmarks for the hot paths: pairwise weight computation, the exact
// objective, the stochastic gradient estimator, and dense matmul.

#include <vector>

#include <benchmark/benchmark.h>

#include "raan/aan.hpp"
#include "raan/data.hpp"
#include "raan/matrix.hpp"
#include "raan/model.hpp"
#include "raan/rng.hpp"
#include "raan/scraan.hpp"

namespace {

raan::Dataset make_dataset(std::size_t per_cell, raan::SeededRng& rng) {
  return raan::gen_gaussian_groups(raan::GaussianGroupSpec::fair_preset(per_cell), rng);
}

raan::ModelParams make_model(std::size_t input_dim, raan::SeededRng& rng) {
  return raan::init_params(raan::MlpConfig::tabular_preset(input_dim), rng);
}

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  raan::SeededRng rng(1);
  raan::DenseMatrix a(n, n), b(n, n);
  for (double& v : a.data()) v = rng.normal();
  for (double& v : b.data()) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(raan::matmul(a, b));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

void BM_SampleWeights(benchmark::State& state) {
  const std::size_t per_cell = static_cast<std::size_t>(state.range(0));
  raan::SeededRng rng(2);
  raan::Dataset ds = make_dataset(per_cell, rng);
  raan::GroupIndex gi = ds.group_index();
  raan::ModelParams params = make_model(ds.features.cols(), rng);
  raan::DenseMatrix z = raan::encode(params, ds.features, false, rng);
  for (auto _ : state) benchmark::DoNotOptimize(raan::sample_weights(z, gi, 0.5));
}
BENCHMARK(BM_SampleWeights)->Arg(50)->Arg(200);

void BM_RaanValue(benchmark::State& state) {
  const std::size_t per_cell = static_cast<std::size_t>(state.range(0));
  raan::SeededRng rng(3);
  raan::Dataset ds = make_dataset(per_cell, rng);
  raan::GroupIndex gi = ds.group_index();
  raan::ModelParams params = make_model(ds.features.cols(), rng);
  raan::ForwardCache cache = raan::forward(params, ds.features, false, rng, false);
  const std::vector<double> losses = raan::ce_loss_per_sample(cache.logits, ds.labels);
  for (auto _ : state)
    benchmark::DoNotOptimize(raan::raan_value(cache.embedding, losses, gi, 0.5));
}
BENCHMARK(BM_RaanValue)->Arg(50)->Arg(200);

void BM_GradEstimator(benchmark::State& state) {
  raan::SeededRng rng(4);
  raan::Dataset ds = make_dataset(100, rng);
  raan::GroupIndex gi = ds.group_index();
  raan::ModelParams params = make_model(ds.features.cols(), rng);
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  raan::ForwardCache cache = raan::forward(params, ds.features, false, rng, true);
  const std::vector<std::size_t> batch =
      raan::stratified_batches(gi, 64, 4, rng).front();
  raan::ForwardCache bcache;
  raan::DenseMatrix xb(batch.size(), ds.features.cols());
  for (std::size_t k = 0; k < batch.size(); ++k)
    for (std::size_t j = 0; j < xb.cols(); ++j) xb(k, j) = ds.features(batch[k], j);
  bcache = raan::forward(params, xb, false, rng, true);
  const std::vector<double> losses =
      raan::ce_loss_per_sample(cache.logits, ds.labels);
  raan::EstimatorTable table(ds.size(), 1e-4);
  auto ghats = raan::ghat_batch(cache.embedding, losses, all, all, gi, 0.5);
  for (std::size_t i = 0; i < all.size(); ++i) raan::ug_update(table, i, *ghats[i], 0.9);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        raan::grad_estimator(params, bcache, batch, table, gi, 0.5, raan::GradScope::kFull));
}
BENCHMARK(BM_GradEstimator);

void BM_StratifiedBatches(benchmark::State& state) {
  raan::SeededRng rng(5);
  raan::Dataset ds = make_dataset(500, rng);
  raan::GroupIndex gi = ds.group_index();
  for (auto _ : state)
    benchmark::DoNotOptimize(raan::stratified_batches(gi, 64, 4, rng));
}
BENCHMARK(BM_StratifiedBatches);

}  // namespace

BENCHMARK_MAIN();
