#include "raan/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "raan/fairness.hpp"

namespace raan {

namespace fs = std::filesystem;
using nlohmann::json;

std::string method_name(Method m) {
  switch (m) {
    case Method::kCeOnly: return "ce_only";
    case Method::kRaanHeadOnly: return "raan_head_only";
    case Method::kRlRaanFull: return "rl_raan_full";
    case Method::kBalancedCe: return "balanced_ce";
  }
  throw std::logic_error("method_name: unknown method");
}

namespace {

Method parse_method(const std::string& s) {
  if (s == "ce_only") return Method::kCeOnly;
  if (s == "raan_head_only") return Method::kRaanHeadOnly;
  if (s == "rl_raan_full") return Method::kRlRaanFull;
  if (s == "balanced_ce") return Method::kBalancedCe;
  throw std::invalid_argument("training.method must be one of ce_only, raan_head_only, "
                              "rl_raan_full, balanced_ce (got '" + s + "')");
}

DatasetBlock parse_dataset(const json& j) {
  DatasetBlock d;
  const std::string source = j.at("source").get<std::string>();
  if (source == "gaussian_biased")
    d.source = DatasetBlock::Source::kGaussianBiased;
  else if (source == "gaussian_fair")
    d.source = DatasetBlock::Source::kGaussianFair;
  else if (source == "spurious_envs")
    d.source = DatasetBlock::Source::kSpuriousEnvs;
  else if (source == "csv")
    d.source = DatasetBlock::Source::kCsv;
  else
    throw std::invalid_argument("dataset.source must be one of gaussian_biased, "
                                "gaussian_fair, spurious_envs, csv (got '" + source + "')");
  d.per_cell = j.value("per_cell", d.per_cell);
  if (j.contains("train_pe")) d.spurious.train_pe = j.at("train_pe").get<std::vector<double>>();
  d.spurious.test_pe = j.value("test_pe", d.spurious.test_pe);
  d.spurious.samples_per_env = j.value("samples_per_env", d.spurious.samples_per_env);
  d.spurious.feature_dim = j.value("feature_dim", d.spurious.feature_dim);
  d.spurious.class_scale = j.value("class_scale", d.spurious.class_scale);
  d.spurious.attr_scale = j.value("attr_scale", d.spurious.attr_scale);
  d.spurious.noise_scale = j.value("noise_scale", d.spurious.noise_scale);
  if (d.source == DatasetBlock::Source::kCsv) {
    d.csv_path = j.at("path").get<std::string>();
    d.csv_schema.label_column = j.at("label_column").get<std::string>();
    d.csv_schema.attribute_column = j.at("attribute_column").get<std::string>();
    d.csv_schema.num_classes = j.value("num_classes", std::size_t{2});
    d.csv_schema.num_attributes = j.value("num_attributes", std::size_t{2});
  }
  d.fingerprint = j.dump();
  return d;
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config: cannot open " + path);
  json j;
  in >> j;

  ExperimentConfig cfg;
  cfg.dataset = parse_dataset(j.at("dataset"));

  if (j.contains("model")) {
    const json& m = j.at("model");
    cfg.model.encoder_hidden_dims =
        m.value("encoder_hidden_dims", cfg.model.encoder_hidden_dims);
    cfg.model.embedding_dim = m.value("embedding_dim", cfg.model.embedding_dim);
    cfg.model.head_hidden_dims = m.value("head_hidden_dims", cfg.model.head_hidden_dims);
    cfg.model.dropout_rate = m.value("dropout_rate", cfg.model.dropout_rate);
  }

  const json& t = j.at("training");
  cfg.method = parse_method(t.at("method").get<std::string>());
  cfg.training.stage1_epochs = t.value("stage1_epochs", cfg.training.stage1_epochs);
  cfg.training.stage2_epochs = t.value("stage2_epochs", cfg.training.stage2_epochs);
  cfg.training.batch_size = t.value("batch_size", cfg.training.batch_size);
  cfg.training.min_cell_quota = t.value("min_cell_quota", cfg.training.min_cell_quota);
  cfg.tau_specified = t.contains("tau");
  cfg.gamma_specified = t.contains("gamma");
  cfg.training.tau = t.value("tau", cfg.training.tau);
  cfg.training.gamma = t.value("gamma", cfg.training.gamma);
  cfg.training.u0 = t.value("u0", cfg.training.u0);
  cfg.training.seed = t.value("seed", cfg.training.seed);
  cfg.training.eval_subset_max = t.value("eval_subset_max", cfg.training.eval_subset_max);
  if (t.contains("optimizer")) {
    const json& o = t.at("optimizer");
    const std::string kind = o.value("kind", std::string("adam"));
    if (kind == "adam")
      cfg.optimizer.kind = OptimizerConfig::Kind::kAdam;
    else if (kind == "sgd")
      cfg.optimizer.kind = OptimizerConfig::Kind::kSgd;
    else
      throw std::invalid_argument("training.optimizer.kind must be adam or sgd (got '" +
                                  kind + "')");
    cfg.optimizer.sgd.alpha = o.value("alpha", cfg.optimizer.sgd.alpha);
    cfg.optimizer.adam.alpha = o.value("alpha", cfg.optimizer.adam.alpha);
    cfg.optimizer.adam.eta1 = o.value("eta1", cfg.optimizer.adam.eta1);
    cfg.optimizer.adam.eta2 = o.value("eta2", cfg.optimizer.adam.eta2);
    cfg.optimizer.adam.eps = o.value("eps", cfg.optimizer.adam.eps);
    cfg.optimizer.adam.amsgrad = o.value("amsgrad", cfg.optimizer.adam.amsgrad);
  }

  const json& out = j.at("output");
  cfg.output_dir = out.at("dir").get<std::string>();
  cfg.emit_embeddings = out.value("emit_embeddings", false);
  return cfg;
}

namespace {

std::vector<std::string> semantic_violations(const ExperimentConfig& cfg) {
  std::vector<std::string> v;
  const bool raan_mode =
      cfg.method == Method::kRaanHeadOnly || cfg.method == Method::kRlRaanFull;
  if (raan_mode && !cfg.tau_specified)
    v.push_back("training.tau is required for method " + method_name(cfg.method));
  if (raan_mode && !cfg.gamma_specified)
    v.push_back("training.gamma is required for method " + method_name(cfg.method));
  if (cfg.tau_specified && !(cfg.training.tau > 0.0))
    v.push_back("training.tau must be positive");
  if (cfg.gamma_specified && !(cfg.training.gamma > 0.0 && cfg.training.gamma <= 1.0))
    v.push_back("training.gamma must lie in (0,1]");
  if (cfg.training.stage1_epochs + cfg.training.stage2_epochs == 0)
    v.push_back("training: stage1_epochs + stage2_epochs must be at least 1");
  if (cfg.training.batch_size == 0) v.push_back("training.batch_size must be positive");
  if (cfg.training.min_cell_quota == 0)
    v.push_back("training.min_cell_quota must be positive");
  if (cfg.training.batch_size < 4 * cfg.training.min_cell_quota && raan_mode)
    v.push_back("training.batch_size must be at least num_cells * min_cell_quota");
  if (!(cfg.training.u0 > 0.0)) v.push_back("training.u0 must be positive");
  if (cfg.training.eval_subset_max == 0)
    v.push_back("training.eval_subset_max must be positive");

  if (cfg.model.embedding_dim == 0) v.push_back("model.embedding_dim must be positive");
  for (std::size_t d : cfg.model.encoder_hidden_dims)
    if (d == 0) v.push_back("model.encoder_hidden_dims entries must be positive");
  for (std::size_t d : cfg.model.head_hidden_dims)
    if (d == 0) v.push_back("model.head_hidden_dims entries must be positive");
  if (!(cfg.model.dropout_rate >= 0.0 && cfg.model.dropout_rate < 1.0))
    v.push_back("model.dropout_rate must lie in [0,1)");

  if (cfg.optimizer.kind == OptimizerConfig::Kind::kAdam) {
    const AdamConfig& a = cfg.optimizer.adam;
    if (!(a.alpha > 0.0)) v.push_back("training.optimizer.alpha must be positive");
    if (!(a.eps > 0.0)) v.push_back("training.optimizer.eps must be positive");
    if (!(a.eta1 >= 0.0 && a.eta1 < 1.0))
      v.push_back("training.optimizer.eta1 must lie in [0,1)");
    if (!(a.eta2 >= 0.0 && a.eta2 < 1.0))
      v.push_back("training.optimizer.eta2 must lie in [0,1)");
    if (a.eta1 >= 0.0 && a.eta2 >= 0.0 && a.eta1 > std::sqrt(a.eta2))
      v.push_back("training.optimizer.eta1 must satisfy eta1 <= sqrt(eta2)");
  } else if (!(cfg.optimizer.sgd.alpha > 0.0)) {
    v.push_back("training.optimizer.alpha must be positive");
  }

  if (cfg.dataset.source == DatasetBlock::Source::kGaussianBiased ||
      cfg.dataset.source == DatasetBlock::Source::kGaussianFair) {
    if (cfg.dataset.per_cell == 0) v.push_back("dataset.per_cell must be positive");
  }
  if (cfg.dataset.source == DatasetBlock::Source::kSpuriousEnvs) {
    const SpuriousBlock& s = cfg.dataset.spurious;
    if (s.train_pe.empty()) v.push_back("dataset.train_pe must name at least one environment");
    for (double p : s.train_pe)
      if (!(p >= 0.0 && p <= 1.0)) v.push_back("dataset.train_pe entries must lie in [0,1]");
    if (!(s.test_pe >= 0.0 && s.test_pe <= 1.0))
      v.push_back("dataset.test_pe must lie in [0,1]");
    if (s.samples_per_env == 0 || s.samples_per_env % 2 != 0)
      v.push_back("dataset.samples_per_env must be positive and even");
    if (s.feature_dim < 2) v.push_back("dataset.feature_dim must be at least 2");
  }
  if (cfg.dataset.source == DatasetBlock::Source::kCsv) {
    if (cfg.dataset.csv_path.empty()) v.push_back("dataset.path must be non-empty");
    if (cfg.dataset.csv_schema.num_classes < 2)
      v.push_back("dataset.num_classes must be at least 2");
    if (cfg.dataset.csv_schema.num_attributes < 2)
      v.push_back("dataset.num_attributes must be at least 2");
  }
  if (cfg.output_dir.empty()) v.push_back("output.dir must be non-empty");
  return v;
}

struct BuiltData {
  Dataset train;
  std::optional<Dataset> test;
};

BuiltData build_dataset(const DatasetBlock& block, SeededRng& rng) {
  BuiltData out;
  // Gaussian presets evaluate generalization fairness: the held-out set uses
  // the same cell geometry with count-balanced cells.
  auto gaussian = [&](GaussianGroupSpec spec) {
    out.train = gen_gaussian_groups(spec, rng);
    std::size_t total = 0;
    for (const GaussianCell& c : spec.cells) total += c.count;
    GaussianGroupSpec balanced = spec;
    for (GaussianCell& c : balanced.cells)
      c.count = std::max<std::size_t>(1, total / balanced.cells.size());
    out.test = gen_gaussian_groups(balanced, rng);
    out.test->name = "gaussian_test";
  };
  switch (block.source) {
    case DatasetBlock::Source::kGaussianBiased:
      gaussian(GaussianGroupSpec::biased_preset(block.per_cell));
      break;
    case DatasetBlock::Source::kGaussianFair:
      gaussian(GaussianGroupSpec::fair_preset(block.per_cell));
      break;
    case DatasetBlock::Source::kSpuriousEnvs: {
      std::vector<EnvSpec> train_specs;
      for (double p : block.spurious.train_pe) {
        EnvSpec e;
        e.p_e = p;
        e.samples_per_env = block.spurious.samples_per_env;
        e.feature_dim = block.spurious.feature_dim;
        e.class_scale = block.spurious.class_scale;
        e.attr_scale = block.spurious.attr_scale;
        e.noise_scale = block.spurious.noise_scale;
        train_specs.push_back(e);
      }
      EnvSpec test_spec = train_specs.front();
      test_spec.p_e = block.spurious.test_pe;
      SpuriousEnvs envs = gen_spurious_envs(train_specs, test_spec, rng);
      out.train = concat(envs.train, "spurious_train");
      out.test = std::move(envs.test);
      break;
    }
    case DatasetBlock::Source::kCsv:
      out.train = load_csv(block.csv_path, block.csv_schema);
      break;
  }
  return out;
}

std::map<std::string, double> eval_metrics(const ModelParams& params, const Dataset& ds) {
  SeededRng rng(0);  // eval mode draws nothing
  ForwardCache cache = forward(params, ds.features, false, rng, false);
  const std::vector<double> losses = ce_loss_per_sample(cache.logits, ds.labels);
  std::map<std::string, double> m;
  double ce = 0.0, correct = 0.0;
  std::vector<int> preds(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ce += losses[i];
    const auto lr = cache.logits.row(i);
    const std::size_t p =
        static_cast<std::size_t>(std::max_element(lr.begin(), lr.end()) - lr.begin());
    preds[i] = static_cast<int>(p);
    correct += (p == ds.labels[i]);
  }
  m["ce_loss"] = ce / static_cast<double>(ds.size());
  m["accuracy"] = correct / static_cast<double>(ds.size());
  if (ds.num_classes == 2 && ds.num_attributes == 2) {
    EvalFrame frame;
    frame.predictions = preds;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      frame.labels.push_back(static_cast<int>(ds.labels[i]));
      frame.attributes.push_back(static_cast<int>(ds.attributes[i]));
    }
    m["dp_gap"] = dp_gap(frame);
    m["eo_gap"] = eo_gap(frame);
    m["worst_group_accuracy"] = worst_group_accuracy(frame);
  }
  return m;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_metrics_csv(const std::vector<TrainLogRow>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("run_experiment: cannot write " + path);
  out << "epoch,stage,raan_value,ce_loss,accuracy,dp_gap,eo_gap,worst_group_acc\n";
  for (const TrainLogRow& r : log) {
    out << r.epoch << ',' << r.stage << ',' << fmt(r.raan) << ',' << fmt(r.ce) << ','
        << fmt(r.accuracy) << ',' << fmt(r.dp) << ',' << fmt(r.eo) << ','
        << fmt(r.worst_group) << '\n';
  }
}

void write_embeddings_csv(const ModelParams& params, const Dataset& ds,
                          const std::string& path) {
  SeededRng rng(0);
  DenseMatrix z = encode(params, ds.features, false, rng);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("run_experiment: cannot write " + path);
  out << "sample_id,label,attribute";
  for (std::size_t c = 0; c < z.cols(); ++c) out << ",e" << c;
  out << '\n';
  for (std::size_t i = 0; i < z.rows(); ++i) {
    out << i << ',' << ds.labels[i] << ',' << ds.attributes[i];
    for (double v : z.row(i)) out << ',' << fmt(v);
    out << '\n';
  }
}

}  // namespace

std::vector<std::string> validate_config(const std::string& path) {
  if (!std::ifstream(path)) throw std::runtime_error("validate_config: cannot open " + path);
  ExperimentConfig cfg;
  try {
    cfg = load_config(path);
  } catch (const std::exception& e) {
    return {e.what()};
  }
  return semantic_violations(cfg);
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  const std::vector<std::string> violations = semantic_violations(cfg);
  if (!violations.empty()) {
    std::string msg = "run_experiment: invalid config:";
    for (const std::string& v : violations) msg += "\n  " + v;
    throw std::invalid_argument(msg);
  }

  SeededRng root(cfg.training.seed);
  SeededRng data_rng = root.split();
  SeededRng init_rng = root.split();
  BuiltData data = build_dataset(cfg.dataset, data_rng);
  data.train.validate();

  MlpConfig mcfg;
  mcfg.input_dim = data.train.features.cols();
  mcfg.encoder_hidden_dims = cfg.model.encoder_hidden_dims;
  mcfg.embedding_dim = cfg.model.embedding_dim;
  mcfg.head_hidden_dims = cfg.model.head_hidden_dims;
  mcfg.num_classes = data.train.num_classes;
  mcfg.dropout_rate = cfg.model.dropout_rate;
  ModelParams params = init_params(mcfg, init_rng);

  TrainConfig tc = cfg.training;
  switch (cfg.method) {
    case Method::kCeOnly:
      // same epoch budget, no robust stage
      tc.stage1_epochs += tc.stage2_epochs;
      tc.stage2_epochs = 0;
      break;
    case Method::kBalancedCe:
      // analytic high-temperature limit: uniform pair weights, so stage 2
      // minimizes the cell-balanced mean loss
      tc.mode = TrainMode::kHeadOnly;
      tc.tau = 1e6;
      tc.gamma = 1.0;
      break;
    case Method::kRaanHeadOnly:
      tc.mode = TrainMode::kHeadOnly;
      break;
    case Method::kRlRaanFull:
      tc.mode = TrainMode::kFull;
      break;
  }

  RunResult result;
  result.log = train(data.train, params, tc, cfg.optimizer);
  result.train_metrics = eval_metrics(params, data.train);
  if (data.test) result.test_metrics = eval_metrics(params, *data.test);

  fs::create_directories(cfg.output_dir);
  write_metrics_csv(result.log, cfg.output_dir + "/metrics.csv");
  save_checkpoint(params, cfg.output_dir + "/model.ckpt");
  if (cfg.emit_embeddings)
    write_embeddings_csv(params, data.train, cfg.output_dir + "/embeddings.csv");

  const std::map<std::string, double>& headline =
      data.test ? result.test_metrics : result.train_metrics;
  json out;
  for (const auto& [k, v] : headline) out[k] = v;
  out["method"] = method_name(cfg.method);
  out["seed"] = cfg.training.seed;
  json train_obj;
  for (const auto& [k, v] : result.train_metrics) train_obj[k] = v;
  out["train"] = train_obj;
  if (data.test) {
    json test_obj;
    for (const auto& [k, v] : result.test_metrics) test_obj[k] = v;
    out["test"] = test_obj;
  }
  std::ofstream os(cfg.output_dir + "/final_metrics.json");
  if (!os) throw std::runtime_error("run_experiment: cannot write final_metrics.json");
  os << out.dump(2) << '\n';
  return result;
}

void compare_runs(const std::vector<std::string>& config_paths, const std::string& out_path) {
  if (config_paths.size() < 2)
    throw std::invalid_argument("compare: need at least two configs");
  struct Entry {
    std::string method;
    std::map<std::string, double> metrics;
  };
  std::vector<Entry> entries;
  std::string reference_fp;
  std::string reference_path;
  for (const std::string& path : config_paths) {
    ExperimentConfig cfg = load_config(path);
    if (reference_fp.empty()) {
      reference_fp = cfg.dataset.fingerprint;
      reference_path = path;
    } else if (cfg.dataset.fingerprint != reference_fp) {
      throw std::invalid_argument("compare: dataset blocks differ between " + reference_path +
                                  " and " + path);
    }
    const std::string metrics_path = cfg.output_dir + "/final_metrics.json";
    if (!fs::exists(metrics_path)) run_experiment(cfg);
    std::ifstream in(metrics_path);
    if (!in) throw std::runtime_error("compare: cannot open " + metrics_path);
    json j;
    in >> j;
    Entry e;
    e.method = j.at("method").get<std::string>();
    for (const char* k : {"accuracy", "dp_gap", "eo_gap", "worst_group_accuracy"})
      if (j.contains(k)) e.metrics[k] = j.at(k).get<double>();
    entries.push_back(std::move(e));
  }

  std::vector<std::string> methods;
  for (const Entry& e : entries)
    if (std::find(methods.begin(), methods.end(), e.method) == methods.end())
      methods.push_back(e.method);
  std::sort(methods.begin(), methods.end());

  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("compare: cannot write " + out_path);
  out << "method,runs,accuracy_mean,accuracy_std,dp_gap_mean,dp_gap_std,eo_gap_mean,"
         "eo_gap_std,worst_group_acc_mean,worst_group_acc_std\n";
  for (const std::string& method : methods) {
    std::vector<const Entry*> group;
    for (const Entry& e : entries)
      if (e.method == method) group.push_back(&e);
    out << method << ',' << group.size();
    for (const char* k : {"accuracy", "dp_gap", "eo_gap", "worst_group_accuracy"}) {
      double mean = 0.0;
      for (const Entry* e : group) mean += e->metrics.at(k);
      mean /= static_cast<double>(group.size());
      double var = 0.0;
      for (const Entry* e : group) {
        const double d = e->metrics.at(k) - mean;
        var += d * d;
      }
      const double stdev =
          group.size() > 1 ? std::sqrt(var / static_cast<double>(group.size() - 1)) : 0.0;
      out << ',' << fmt(mean) << ',' << fmt(stdev);
    }
    out << '\n';
  }
}

namespace {

json base_training(const std::string& method, std::uint64_t seed, std::size_t stage2,
                   double alpha) {
  json t;
  t["method"] = method;
  t["stage1_epochs"] = 5;
  t["stage2_epochs"] = stage2;
  t["batch_size"] = 64;
  t["min_cell_quota"] = 4;
  t["seed"] = seed;
  t["optimizer"] = {{"kind", "adam"}, {"alpha", alpha}, {"eta1", 0.9}, {"eta2", 0.999}};
  return t;
}

}  // namespace

std::string preset_config(const std::string& name) {
  json j;
  const std::uint64_t seed = 1;
  if (name == "gaussian_biased_raan" || name == "gaussian_biased_ce" ||
      name == "gaussian_biased_rl_raan" || name == "gaussian_biased_balanced_ce" ||
      name == "gaussian_fair_ce" || name == "gaussian_fair_raan") {
    const bool fair = name.rfind("gaussian_fair", 0) == 0;
    j["dataset"] = {{"source", fair ? "gaussian_fair" : "gaussian_biased"},
                    {"per_cell", 500}};
    j["model"] = {{"encoder_hidden_dims", json::array({50})},
                  {"embedding_dim", 50},
                  {"head_hidden_dims", json::array({50})},
                  {"dropout_rate", 0.2}};
    std::string method = "raan_head_only";
    if (name.ends_with("_ce") && !name.ends_with("balanced_ce")) method = "ce_only";
    if (name.ends_with("rl_raan")) method = "rl_raan_full";
    if (name.ends_with("balanced_ce")) method = "balanced_ce";
    j["training"] = base_training(method, seed, 30, 3e-3);
    if (method == "raan_head_only" || method == "rl_raan_full") {
      j["training"]["tau"] = 0.2;
      j["training"]["gamma"] = 0.9;
    }
  } else if (name == "spurious_raan" || name == "spurious_ce") {
    j["dataset"] = {{"source", "spurious_envs"},
                    {"train_pe", json::array({0.1, 0.2})},
                    {"test_pe", 0.9},
                    {"samples_per_env", 500},
                    {"feature_dim", 10}};
    j["model"] = {{"encoder_hidden_dims", json::array()},
                  {"embedding_dim", 10},
                  {"head_hidden_dims", json::array()},
                  {"dropout_rate", 0.0}};
    j["training"] =
        base_training(name == "spurious_ce" ? "ce_only" : "raan_head_only", seed, 15, 1e-3);
    if (name == "spurious_raan") {
      j["training"]["tau"] = 0.5;
      j["training"]["gamma"] = 0.9;
    }
  } else {
    throw std::invalid_argument("preset_config: unknown preset '" + name + "'");
  }
  j["output"] = {{"dir", "runs/" + name}, {"emit_embeddings", false}};
  return j.dump(2) + "\n";
}

std::vector<std::string> preset_names() {
  return {"gaussian_biased_ce",     "gaussian_biased_raan",       "gaussian_biased_rl_raan",
          "gaussian_biased_balanced_ce", "gaussian_fair_ce",      "gaussian_fair_raan",
          "spurious_ce",            "spurious_raan"};
}

}  // namespace raan
