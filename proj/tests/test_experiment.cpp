#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "raan/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json tiny_config(const std::string& method, std::uint64_t seed, const std::string& out_dir) {
  json j;
  j["dataset"] = {{"source", "gaussian_fair"}, {"per_cell", 25}};
  // linear encoder so no seed can produce a dead ReLU row in a 6-dim embedding
  j["model"] = {{"encoder_hidden_dims", json::array()},
                {"embedding_dim", 6},
                {"head_hidden_dims", json::array()},
                {"dropout_rate", 0.0}};
  j["training"] = {{"method", method},
                   {"stage1_epochs", 1},
                   {"stage2_epochs", 2},
                   {"batch_size", 32},
                   {"min_cell_quota", 4},
                   {"tau", 0.5},
                   {"gamma", 0.9},
                   {"seed", seed},
                   {"optimizer", {{"kind", "adam"}, {"alpha", 1e-3}}}};
  j["output"] = {{"dir", out_dir}, {"emit_embeddings", false}};
  return j;
}

}  // namespace

TEST_CASE("every shipped preset parses and validates clean") {
  TempDir tmp("raan_preset_check");
  const auto names = raan::preset_names();
  CHECK(names.size() == 8);
  for (const std::string& name : names) {
    const std::string path = write_text(tmp.file(name + ".json"), raan::preset_config(name));
    CAPTURE(name);
    CHECK(raan::validate_config(path).empty());
    raan::ExperimentConfig cfg = raan::load_config(path);
    CHECK(cfg.output_dir == "runs/" + name);
  }
  CHECK_THROWS_AS(raan::preset_config("no_such_preset"), std::invalid_argument);
}

TEST_CASE("validation reports each violated invariant by field path") {
  TempDir tmp("raan_validate");
  json base = json::parse(raan::preset_config("gaussian_biased_raan"));

  json bad = base;
  bad["training"]["gamma"] = 1.5;
  auto v = raan::validate_config(write_text(tmp.file("gamma.json"), bad.dump()));
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "training.gamma must lie in (0,1]");

  bad = base;
  bad["training"].erase("tau");
  v = raan::validate_config(write_text(tmp.file("tau.json"), bad.dump()));
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "training.tau is required for method raan_head_only");

  bad = base;
  bad["training"]["optimizer"]["eta1"] = 0.99;
  bad["training"]["optimizer"]["eta2"] = 0.9;
  v = raan::validate_config(write_text(tmp.file("adam.json"), bad.dump()));
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "training.optimizer.eta1 must satisfy eta1 <= sqrt(eta2)");

  bad = base;
  bad["training"]["batch_size"] = 8;  // below 4 cells * quota 4
  v = raan::validate_config(write_text(tmp.file("batch.json"), bad.dump()));
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "training.batch_size must be at least num_cells * min_cell_quota");

  // several violations accumulate instead of stopping at the first
  bad = base;
  bad["training"]["gamma"] = -0.5;
  bad["model"]["embedding_dim"] = 0;
  v = raan::validate_config(write_text(tmp.file("multi.json"), bad.dump()));
  CHECK(v.size() == 2);
}

TEST_CASE("structural problems surface as parse errors or throws") {
  TempDir tmp("raan_parse");
  const auto v =
      raan::validate_config(write_text(tmp.file("broken.json"), "{ not json"));
  REQUIRE(v.size() == 1);  // single parse-error entry
  CHECK_THROWS_AS(raan::validate_config(tmp.file("missing.json")), std::runtime_error);
  // bad enum value is a type-level error reported through the same channel
  json base = json::parse(raan::preset_config("spurious_ce"));
  base["training"]["method"] = "mystery";
  const auto v2 = raan::validate_config(write_text(tmp.file("enum.json"), base.dump()));
  REQUIRE(v2.size() == 1);
  CHECK(v2[0].find("mystery") != std::string::npos);
}

TEST_CASE("a run writes the full artifact set") {
  TempDir tmp("raan_run");
  json cfg_json = tiny_config("raan_head_only", 3, tmp.file("out"));
  cfg_json["output"]["emit_embeddings"] = true;
  raan::ExperimentConfig cfg =
      raan::load_config(write_text(tmp.file("cfg.json"), cfg_json.dump()));
  raan::RunResult result = raan::run_experiment(cfg);
  CHECK(result.log.size() == 3);
  CHECK(result.train_metrics.count("accuracy") == 1);
  CHECK(result.test_metrics.count("eo_gap") == 1);  // gaussian runs hold out a test set

  CHECK(fs::exists(tmp.file("out/metrics.csv")));
  CHECK(fs::exists(tmp.file("out/model.ckpt")));
  CHECK(fs::exists(tmp.file("out/embeddings.csv")));
  CHECK(fs::exists(tmp.file("out/final_metrics.json")));

  std::ifstream metrics(tmp.file("out/metrics.csv"));
  std::string line;
  std::getline(metrics, line);
  CHECK(line == "epoch,stage,raan_value,ce_loss,accuracy,dp_gap,eo_gap,worst_group_acc");
  std::size_t rows = 0;
  while (std::getline(metrics, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);

  raan::ModelParams params = raan::load_checkpoint(tmp.file("out/model.ckpt"));
  CHECK(params.config.embedding_dim == 6);

  json fin = json::parse(slurp(tmp.file("out/final_metrics.json")));
  CHECK(fin.at("method") == "raan_head_only");
  CHECK(fin.at("seed") == 3);
  for (const char* k : {"accuracy", "ce_loss", "dp_gap", "eo_gap", "worst_group_accuracy"}) {
    CHECK(fin.contains(k));
    CHECK(fin.at("train").contains(k));
    CHECK(fin.at("test").contains(k));
  }
  // headline numbers come from the held-out set
  CHECK(fin.at("accuracy").get<double>() == fin.at("test").at("accuracy").get<double>());

  std::ifstream emb(tmp.file("out/embeddings.csv"));
  std::getline(emb, line);
  CHECK(line == "sample_id,label,attribute,e0,e1,e2,e3,e4,e5");
}

TEST_CASE("identical configs produce byte-identical metrics") {
  TempDir tmp("raan_repro");
  for (const char* dir : {"a", "b"}) {
    raan::ExperimentConfig cfg = raan::load_config(write_text(
        tmp.file(std::string("cfg_") + dir + ".json"),
        tiny_config("raan_head_only", 11, tmp.file(dir)).dump()));
    raan::run_experiment(cfg);
  }
  CHECK(slurp(tmp.file("a/metrics.csv")) == slurp(tmp.file("b/metrics.csv")));
  CHECK(slurp(tmp.file("a/final_metrics.json")) == slurp(tmp.file("b/final_metrics.json")));

  // a different seed must change the trajectory
  raan::ExperimentConfig cfg = raan::load_config(write_text(
      tmp.file("cfg_c.json"), tiny_config("raan_head_only", 12, tmp.file("c")).dump()));
  raan::run_experiment(cfg);
  CHECK(slurp(tmp.file("a/metrics.csv")) != slurp(tmp.file("c/metrics.csv")));
}

TEST_CASE("run_experiment rejects invalid configs up front") {
  TempDir tmp("raan_reject");
  json bad = tiny_config("raan_head_only", 1, tmp.file("out"));
  bad["training"]["gamma"] = 2.0;
  raan::ExperimentConfig cfg =
      raan::load_config(write_text(tmp.file("bad.json"), bad.dump()));
  CHECK_THROWS_AS(raan::run_experiment(cfg), std::invalid_argument);
  CHECK(!fs::exists(tmp.file("out")));
}

TEST_CASE("compare aggregates runs per method over seeds") {
  TempDir tmp("raan_compare");
  std::vector<std::string> paths;
  paths.push_back(write_text(tmp.file("raan_s1.json"),
                             tiny_config("raan_head_only", 1, tmp.file("raan_s1")).dump()));
  paths.push_back(write_text(tmp.file("raan_s2.json"),
                             tiny_config("raan_head_only", 2, tmp.file("raan_s2")).dump()));
  paths.push_back(write_text(tmp.file("ce_s1.json"),
                             tiny_config("ce_only", 1, tmp.file("ce_s1")).dump()));
  const std::string out = tmp.file("summary.csv");
  raan::compare_runs(paths, out);  // runs everything: no artifacts exist yet

  std::ifstream in(out);
  std::string line;
  std::getline(in, line);
  CHECK(line ==
        "method,runs,accuracy_mean,accuracy_std,dp_gap_mean,dp_gap_std,eo_gap_mean,"
        "eo_gap_std,worst_group_acc_mean,worst_group_acc_std");
  std::vector<std::string> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(line);
  REQUIRE(rows.size() == 2);  // sorted by method name
  CHECK(rows[0].rfind("ce_only,1,", 0) == 0);
  CHECK(rows[1].rfind("raan_head_only,2,", 0) == 0);

  // rerunning reuses the artifacts and reproduces the summary byte for byte
  const std::string again = tmp.file("summary2.csv");
  raan::compare_runs(paths, again);
  CHECK(slurp(out) == slurp(again));
}

TEST_CASE("compare refuses mismatched datasets and short lists") {
  TempDir tmp("raan_compare_bad");
  json a = tiny_config("ce_only", 1, tmp.file("a"));
  json b = tiny_config("ce_only", 2, tmp.file("b"));
  b["dataset"]["per_cell"] = 30;
  const std::string pa = write_text(tmp.file("a.json"), a.dump());
  const std::string pb = write_text(tmp.file("b.json"), b.dump());
  CHECK_THROWS_AS(raan::compare_runs({pa, pb}, tmp.file("sum.csv")), std::invalid_argument);
  CHECK_THROWS_AS(raan::compare_runs({pa}, tmp.file("sum.csv")), std::invalid_argument);
}
