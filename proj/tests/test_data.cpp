#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "raan/data.hpp"
#include "test_util.hpp"

using raan::CsvSchema;
using raan::Dataset;
using raan::EnvSpec;
using raan::GaussianGroupSpec;
using raan::SeededRng;

namespace {

std::map<std::pair<std::size_t, std::size_t>, std::size_t> cell_counts(const Dataset& ds) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> counts;
  for (std::size_t i = 0; i < ds.size(); ++i) ++counts[{ds.labels[i], ds.attributes[i]}];
  return counts;
}

}  // namespace

TEST_CASE("gaussian presets produce the configured cell counts") {
  SeededRng rng(1);
  Dataset fair = raan::gen_gaussian_groups(GaussianGroupSpec::fair_preset(100), rng);
  auto fc = cell_counts(fair);
  REQUIRE(fc.size() == 4);
  for (const auto& [cell, count] : fc) CHECK(count == 100);
  fair.validate();

  Dataset biased = raan::gen_gaussian_groups(GaussianGroupSpec::biased_preset(100), rng);
  auto bc = cell_counts(biased);
  REQUIRE(bc.size() == 4);
  // minority cells get 2/5 of per_cell, majority cells the remainder of 2x
  CHECK(bc[{0, 0}] == 40);
  CHECK(bc[{0, 1}] == 160);
  CHECK(bc[{1, 0}] == 160);
  CHECK(bc[{1, 1}] == 40);
  biased.validate();
}

TEST_CASE("gaussian sampling is seed-deterministic and seed-sensitive") {
  GaussianGroupSpec spec = GaussianGroupSpec::fair_preset(50);
  SeededRng a(7), b(7), c(8);
  Dataset da = raan::gen_gaussian_groups(spec, a);
  Dataset db = raan::gen_gaussian_groups(spec, b);
  Dataset dc = raan::gen_gaussian_groups(spec, c);
  CHECK(da.features == db.features);
  CHECK(da.features.data() != dc.features.data());
}

TEST_CASE("gaussian cells land near their configured means") {
  GaussianGroupSpec spec = GaussianGroupSpec::fair_preset(2000);
  SeededRng rng(3);
  Dataset ds = raan::gen_gaussian_groups(spec, rng);
  for (const raan::GaussianCell& cell : spec.cells) {
    std::vector<double> mean(ds.features.cols(), 0.0);
    std::size_t n = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.labels[i] != cell.label || ds.attributes[i] != cell.attribute) continue;
      for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += ds.features(i, j);
      ++n;
    }
    REQUIRE(n == cell.count);
    for (std::size_t j = 0; j < mean.size(); ++j)
      CHECK(std::abs(mean[j] / static_cast<double>(n) - cell.mean[j]) < 0.1);
  }
}

TEST_CASE("spurious environments flip the deterministic quota") {
  SeededRng rng(5);
  EnvSpec train1{.p_e = 0.1, .samples_per_env = 200, .feature_dim = 6};
  EnvSpec train2{.p_e = 0.2, .samples_per_env = 200, .feature_dim = 6};
  EnvSpec test{.p_e = 0.9, .samples_per_env = 300, .feature_dim = 6};
  raan::SpuriousEnvs envs = raan::gen_spurious_envs({train1, train2}, test, rng);
  REQUIRE(envs.train.size() == 2);

  auto check_env = [](const Dataset& ds, double p_e, std::size_t n) {
    REQUIRE(ds.size() == n);
    std::size_t per_class = n / 2;
    const auto flipped = static_cast<std::size_t>(std::llround(p_e * static_cast<double>(per_class)));
    auto counts = cell_counts(ds);
    // a == y except for exactly `flipped` samples per class
    CHECK(counts[{0, 1}] == flipped);
    CHECK(counts[{1, 0}] == flipped);
    CHECK(counts[{0, 0}] == per_class - flipped);
    CHECK(counts[{1, 1}] == per_class - flipped);
  };
  check_env(envs.train[0], 0.1, 200);
  check_env(envs.train[1], 0.2, 200);
  check_env(envs.test, 0.9, 300);

  // the class signal sits on coordinate 0, the attribute signal on coordinate 1
  double cls = 0.0, attr = 0.0;
  const Dataset& tr = envs.train[0];
  for (std::size_t i = 0; i < tr.size(); ++i) {
    cls += (2.0 * static_cast<double>(tr.labels[i]) - 1.0) * tr.features(i, 0);
    attr += (2.0 * static_cast<double>(tr.attributes[i]) - 1.0) * tr.features(i, 1);
  }
  CHECK(cls / static_cast<double>(tr.size()) > 0.3);
  CHECK(attr / static_cast<double>(tr.size()) > 0.6);
}

TEST_CASE("p_e of zero leaves the attribute equal to the label") {
  SeededRng rng(6);
  EnvSpec clean{.p_e = 0.0, .samples_per_env = 50, .feature_dim = 4};
  EnvSpec test{.p_e = 0.5, .samples_per_env = 50, .feature_dim = 4};
  raan::SpuriousEnvs envs = raan::gen_spurious_envs({clean}, test, rng);
  for (std::size_t i = 0; i < envs.train[0].size(); ++i)
    CHECK(envs.train[0].labels[i] == envs.train[0].attributes[i]);
}

TEST_CASE("concat stacks rows and validates shape agreement") {
  SeededRng rng(9);
  Dataset a = testutil::balanced_dataset(3, 4, 2, 2, rng);
  Dataset b = testutil::balanced_dataset(2, 4, 2, 2, rng);
  Dataset joined = raan::concat({a, b}, "joined");
  CHECK(joined.size() == a.size() + b.size());
  CHECK(joined.features.rows() == joined.size());
  CHECK(joined.labels[a.size()] == b.labels[0]);
  for (std::size_t j = 0; j < 4; ++j)
    CHECK(joined.features(a.size(), j) == b.features(0, j));

  Dataset narrow = testutil::balanced_dataset(2, 3, 2, 2, rng);
  CHECK_THROWS_AS(raan::concat({a, narrow}, "bad"), std::invalid_argument);
}

TEST_CASE("csv round-trip preserves the dataset exactly") {
  SeededRng rng(11);
  Dataset ds = testutil::balanced_dataset(4, 3, 2, 2, rng);
  ds.features(0, 0) = 1.0 / 3.0;  // not representable in short decimal
  ds.features(1, 2) = -1e-17;
  CsvSchema schema{.label_column = "y", .attribute_column = "a"};
  const std::string path =
      (std::filesystem::temp_directory_path() / "raan_roundtrip.csv").string();
  raan::save_csv(ds, schema, path);
  Dataset back = raan::load_csv(path, schema);
  CHECK(back.size() == ds.size());
  CHECK(back.labels == ds.labels);
  CHECK(back.attributes == ds.attributes);
  CHECK(back.features == ds.features);
  std::filesystem::remove(path);
}

TEST_CASE("csv loader reports the offending row and column") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "raan_bad.csv").string();
  CsvSchema schema{.label_column = "y", .attribute_column = "a"};
  {
    std::ofstream f(path);
    f << "f0,f1,y,a\n1.0,2.0,0,0\n1.0,oops,1,1\n";
  }
  try {
    raan::load_csv(path, schema);
    FAIL("expected a parse error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("data row 2") != std::string::npos);
    CHECK(msg.find("f1") != std::string::npos);
  }
  {
    std::ofstream f(path);
    f << "f0,y,a\n1.0,0\n";  // short row
  }
  CHECK_THROWS_AS(raan::load_csv(path, schema), std::invalid_argument);
  {
    std::ofstream f(path);
    f << "f0,a\n1.0,0\n";  // label column missing
  }
  CHECK_THROWS_AS(raan::load_csv(path, schema), std::invalid_argument);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(raan::load_csv(path, schema), std::runtime_error);  // missing file
}

TEST_CASE("stratified batches cover every index once per epoch") {
  SeededRng data_rng(13);
  Dataset ds = testutil::balanced_dataset(40, 3, 2, 2, data_rng);
  raan::GroupIndex gi = ds.group_index();
  SeededRng rng(17);
  auto plan = raan::stratified_batches(gi, 32, 4, rng);
  std::map<std::size_t, std::size_t> seen;
  for (const auto& batch : plan) {
    CHECK(batch.size() <= 32);
    // every batch meets the per-cell quota
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> cells;
    for (std::size_t i : batch) ++cells[{gi.label_of(i), gi.attribute_of(i)}];
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t a = 0; a < 2; ++a) CHECK(cells[{c, a}] >= 4);
    // no duplicate index within one batch
    std::set<std::size_t> uniq(batch.begin(), batch.end());
    CHECK(uniq.size() == batch.size());
    for (std::size_t i : batch) ++seen[i];
  }
  // base pass covers every sample at least once; top-ups may repeat a few
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(seen[i] >= 1);
}

TEST_CASE("stratified batches are deterministic in the rng seed") {
  SeededRng data_rng(19);
  Dataset ds = testutil::balanced_dataset(25, 3, 2, 2, data_rng);
  raan::GroupIndex gi = ds.group_index();
  SeededRng r1(5), r2(5), r3(6);
  CHECK(raan::stratified_batches(gi, 24, 2, r1) == raan::stratified_batches(gi, 24, 2, r2));
  CHECK(raan::stratified_batches(gi, 24, 2, r1) != raan::stratified_batches(gi, 24, 2, r3));
}

TEST_CASE("stratified batching rejects infeasible plans") {
  SeededRng data_rng(23);
  Dataset ds = testutil::balanced_dataset(3, 3, 2, 2, data_rng);
  raan::GroupIndex gi = ds.group_index();
  SeededRng rng(1);
  // quota larger than a cell
  CHECK_THROWS_AS(raan::stratified_batches(gi, 64, 4, rng), std::invalid_argument);
  // batch too small for the total quota
  CHECK_THROWS_AS(raan::stratified_batches(gi, 7, 2, rng), std::invalid_argument);
}

TEST_CASE("quota-saturated batches still cover the largest cell") {
  // batch_size == A*C*quota leaves no fill; the plan must still walk through
  // every cell via the cyclic top-up draws
  SeededRng data_rng(29);
  Dataset ds = testutil::balanced_dataset(12, 3, 2, 2, data_rng);
  raan::GroupIndex gi = ds.group_index();
  SeededRng rng(2);
  auto plan = raan::stratified_batches(gi, 16, 4, rng);
  CHECK(plan.size() == 3);  // ceil(12 / 4)
  std::set<std::size_t> seen;
  for (const auto& batch : plan) {
    CHECK(batch.size() == 16);
    seen.insert(batch.begin(), batch.end());
  }
  CHECK(seen.size() == ds.size());
}

TEST_CASE("dataset validation catches inconsistencies") {
  SeededRng rng(31);
  Dataset ds = testutil::balanced_dataset(2, 3, 2, 2, rng);
  ds.validate();
  Dataset bad = ds;
  bad.labels[0] = 5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ds;
  bad.attributes.pop_back();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ds;
  bad.features = raan::DenseMatrix(1, 3);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
