#include "raan/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace raan {

void Dataset::validate() const {
  if (labels.empty()) throw std::invalid_argument("Dataset: empty dataset");
  if (features.rows() != labels.size() || attributes.size() != labels.size())
    throw std::invalid_argument("Dataset: features/labels/attributes length mismatch");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes)
      throw std::invalid_argument("Dataset: label out of range at row " + std::to_string(i));
    if (attributes[i] >= num_attributes)
      throw std::invalid_argument("Dataset: attribute out of range at row " +
                                  std::to_string(i));
  }
}

GroupIndex Dataset::group_index() const {
  return GroupIndex(labels, attributes, num_classes, num_attributes);
}

namespace {

}  // namespace

GaussianGroupSpec GaussianGroupSpec::biased_preset(std::size_t per_cell) {
  // Attribute group a=1 is aggregated on the class-0 side: it is the within-
  // class minority for class 1 and sits closer to the boundary, so the
  // attribute position carries spurious class signal.
  GaussianGroupSpec spec;
  const double var = 0.4;
  const std::size_t minority = std::max<std::size_t>(1, (per_cell * 2) / 5);
  const std::size_t majority = 2 * per_cell - minority;
  spec.cells.push_back({0, 0, {-1.0, 0.75}, {var, var}, minority});
  spec.cells.push_back({0, 1, {-1.0, -0.4}, {var, var}, majority});
  spec.cells.push_back({1, 0, {1.0, 0.75}, {var, var}, majority});
  spec.cells.push_back({1, 1, {0.4, -0.4}, {var, var}, minority});
  return spec;
}

GaussianGroupSpec GaussianGroupSpec::fair_preset(std::size_t per_cell) {
  GaussianGroupSpec spec;
  const double var = 0.4;
  for (std::size_t y : {std::size_t{0}, std::size_t{1}})
    for (std::size_t a : {std::size_t{0}, std::size_t{1}}) {
      const double mx = y == 0 ? -1.0 : 1.0;
      const double my = a == 0 ? 0.75 : -0.75;
      spec.cells.push_back({y, a, {mx, my}, {var, var}, per_cell});
    }
  return spec;
}

Dataset gen_gaussian_groups(const GaussianGroupSpec& spec, SeededRng& rng) {
  if (spec.cells.empty()) throw std::invalid_argument("gen_gaussian_groups: no cells");
  const std::size_t dim = spec.cells.front().mean.size();
  std::size_t n = 0, num_classes = 0, num_attributes = 0;
  for (const GaussianCell& c : spec.cells) {
    if (c.mean.size() != dim || c.variance.size() != dim)
      throw std::invalid_argument("gen_gaussian_groups: inconsistent cell dimensions");
    if (c.count == 0) throw std::invalid_argument("gen_gaussian_groups: empty cell count");
    for (double v : c.variance)
      if (!(v > 0.0))
        throw std::invalid_argument("gen_gaussian_groups: variances must be positive");
    n += c.count;
    num_classes = std::max(num_classes, c.label + 1);
    num_attributes = std::max(num_attributes, c.attribute + 1);
  }
  Dataset ds;
  ds.features = DenseMatrix(n, dim);
  ds.labels.resize(n);
  ds.attributes.resize(n);
  ds.num_classes = num_classes;
  ds.num_attributes = num_attributes;
  ds.name = "gaussian_groups";
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::size_t next = 0;
  for (const GaussianCell& c : spec.cells) {
    for (std::size_t k = 0; k < c.count; ++k) {
      const std::size_t row = order[next++];
      ds.labels[row] = c.label;
      ds.attributes[row] = c.attribute;
      for (std::size_t j = 0; j < dim; ++j)
        ds.features(row, j) = c.mean[j] + std::sqrt(c.variance[j]) * rng.normal();
    }
  }
  return ds;
}

namespace {

Dataset gen_env(const EnvSpec& spec, const std::string& name, SeededRng& rng) {
  const std::size_t n = spec.samples_per_env;
  if (n == 0 || n % 2 != 0)
    throw std::invalid_argument("gen_spurious_envs: samples_per_env must be even and > 0");
  if (spec.feature_dim < 2)
    throw std::invalid_argument("gen_spurious_envs: feature_dim must be at least 2");
  if (!(spec.p_e >= 0.0 && spec.p_e <= 1.0))
    throw std::invalid_argument("gen_spurious_envs: p_e must lie in [0, 1]");
  Dataset ds;
  ds.features = DenseMatrix(n, spec.feature_dim);
  ds.labels.resize(n);
  ds.attributes.resize(n);
  ds.name = name;
  const std::size_t per_class = n / 2;
  // Deterministic quota: exactly round(p_e * per_class) samples of class y get
  // the flipped attribute 1-y.
  const std::size_t flipped =
      static_cast<std::size_t>(std::llround(spec.p_e * static_cast<double>(per_class)));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::size_t next = 0;
  for (std::size_t y : {std::size_t{0}, std::size_t{1}}) {
    for (std::size_t k = 0; k < per_class; ++k) {
      const std::size_t row = order[next++];
      const std::size_t a = (k < flipped) ? 1 - y : y;
      ds.labels[row] = y;
      ds.attributes[row] = a;
      const double ys = spec.class_scale * (2.0 * static_cast<double>(y) - 1.0);
      const double as = spec.attr_scale * (2.0 * static_cast<double>(a) - 1.0);
      for (std::size_t j = 0; j < spec.feature_dim; ++j) {
        double x = spec.noise_scale * rng.normal();
        if (j == 0) x += ys;
        if (j == 1) x += as;
        ds.features(row, j) = x;
      }
    }
  }
  return ds;
}

}  // namespace

SpuriousEnvs gen_spurious_envs(const std::vector<EnvSpec>& train_specs,
                               const EnvSpec& test_spec, SeededRng& rng) {
  if (train_specs.empty())
    throw std::invalid_argument("gen_spurious_envs: need at least one training environment");
  SpuriousEnvs out;
  for (std::size_t e = 0; e < train_specs.size(); ++e)
    out.train.push_back(gen_env(train_specs[e], "env" + std::to_string(e), rng));
  out.test = gen_env(test_spec, "test", rng);
  return out;
}

Dataset concat(const std::vector<Dataset>& parts, const std::string& name) {
  if (parts.empty()) throw std::invalid_argument("concat: no datasets");
  const std::size_t dim = parts.front().features.cols();
  std::size_t n = 0;
  for (const Dataset& p : parts) {
    if (p.features.cols() != dim || p.num_classes != parts.front().num_classes ||
        p.num_attributes != parts.front().num_attributes)
      throw std::invalid_argument("concat: incompatible dataset shapes");
    n += p.size();
  }
  Dataset ds;
  ds.features = DenseMatrix(n, dim);
  ds.labels.reserve(n);
  ds.attributes.reserve(n);
  ds.num_classes = parts.front().num_classes;
  ds.num_attributes = parts.front().num_attributes;
  ds.name = name;
  std::size_t row = 0;
  for (const Dataset& p : parts) {
    for (std::size_t i = 0; i < p.size(); ++i, ++row)
      for (std::size_t j = 0; j < dim; ++j) ds.features(row, j) = p.features(i, j);
    ds.labels.insert(ds.labels.end(), p.labels.begin(), p.labels.end());
    ds.attributes.insert(ds.attributes.end(), p.attributes.begin(), p.attributes.end());
  }
  return ds;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& s, std::size_t row, const std::string& col) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end)
    throw std::invalid_argument("load_csv: bad numeric value '" + s + "' at data row " +
                                std::to_string(row) + ", column '" + col + "'");
  return v;
}

std::size_t parse_category(const std::string& s, std::size_t cardinality, std::size_t row,
                           const std::string& col) {
  std::size_t v = 0;
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end || v >= cardinality)
    throw std::invalid_argument("load_csv: value '" + s + "' at data row " +
                                std::to_string(row) + ", column '" + col +
                                "' is not an integer below " + std::to_string(cardinality));
  return v;
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("load_csv: " + path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_line(line);
  std::size_t label_col = header.size(), attr_col = header.size();
  std::vector<std::size_t> feature_cols;
  std::vector<std::string> feature_names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == schema.label_column) {
      if (label_col != header.size())
        throw std::invalid_argument("load_csv: duplicate label column '" + header[c] + "'");
      label_col = c;
    } else if (header[c] == schema.attribute_column) {
      if (attr_col != header.size())
        throw std::invalid_argument("load_csv: duplicate attribute column '" + header[c] + "'");
      attr_col = c;
    } else {
      feature_cols.push_back(c);
      feature_names.push_back(header[c]);
    }
  }
  if (label_col == header.size())
    throw std::invalid_argument("load_csv: label column '" + schema.label_column +
                                "' not found in " + path);
  if (attr_col == header.size())
    throw std::invalid_argument("load_csv: attribute column '" + schema.attribute_column +
                                "' not found in " + path);
  if (feature_cols.empty())
    throw std::invalid_argument("load_csv: no feature columns in " + path);

  std::vector<double> feat;
  std::vector<std::size_t> labels, attributes;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const std::vector<std::string> fields = split_line(line);
    if (fields.size() != header.size())
      throw std::invalid_argument("load_csv: data row " + std::to_string(row) + " has " +
                                  std::to_string(fields.size()) + " fields, header has " +
                                  std::to_string(header.size()));
    labels.push_back(
        parse_category(fields[label_col], schema.num_classes, row, schema.label_column));
    attributes.push_back(parse_category(fields[attr_col], schema.num_attributes, row,
                                        schema.attribute_column));
    for (std::size_t k = 0; k < feature_cols.size(); ++k)
      feat.push_back(parse_double(fields[feature_cols[k]], row, feature_names[k]));
  }
  if (row == 0) throw std::invalid_argument("load_csv: " + path + " has no data rows");

  Dataset ds;
  ds.features = DenseMatrix(row, feature_cols.size());
  std::copy(feat.begin(), feat.end(), ds.features.data().begin());
  ds.labels = std::move(labels);
  ds.attributes = std::move(attributes);
  ds.num_classes = schema.num_classes;
  ds.num_attributes = schema.num_attributes;
  ds.name = path;
  ds.validate();
  return ds;
}

void save_csv(const Dataset& dataset, const CsvSchema& schema, const std::string& path) {
  dataset.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open " + path + " for writing");
  const std::size_t dim = dataset.features.cols();
  for (std::size_t j = 0; j < dim; ++j) out << "f" << j << ",";
  out << schema.label_column << "," << schema.attribute_column << "\n";
  char buf[64];
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", dataset.features(i, j));
      out << buf << ",";
    }
    out << dataset.labels[i] << "," << dataset.attributes[i] << "\n";
  }
  if (!out) throw std::runtime_error("save_csv: write to " + path + " failed");
}

namespace {

/// Cyclic shuffled walk over one cell's indices; reshuffles at each wrap.
class CellCycle {
 public:
  CellCycle(std::vector<std::size_t> members, SeededRng& rng) : members_(std::move(members)) {
    rng.shuffle(members_);
  }

  std::size_t next(SeededRng& rng) {
    if (pos_ == members_.size()) {
      rng.shuffle(members_);
      pos_ = 0;
    }
    return members_[pos_++];
  }

 private:
  std::vector<std::size_t> members_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::vector<std::size_t>> stratified_batches(const GroupIndex& gi,
                                                         std::size_t batch_size,
                                                         std::size_t min_cell_quota,
                                                         SeededRng& rng) {
  gi.require_all_cells_nonempty();
  const std::size_t n = gi.num_samples();
  const std::size_t num_cells = gi.num_classes() * gi.num_attributes();
  const std::size_t quota_total = num_cells * min_cell_quota;
  if (min_cell_quota == 0)
    throw std::invalid_argument("stratified_batches: min_cell_quota must be positive");
  if (batch_size < quota_total)
    throw std::invalid_argument("stratified_batches: batch_size " + std::to_string(batch_size) +
                                " below the combined cell quota " + std::to_string(quota_total));
  std::vector<CellCycle> cycles;
  std::size_t max_cell = 0;
  for (std::size_t c = 0; c < gi.num_classes(); ++c)
    for (std::size_t a = 0; a < gi.num_attributes(); ++a) {
      if (gi.cell(c, a).size() < min_cell_quota)
        throw std::invalid_argument("stratified_batches: cell (class=" + std::to_string(c) +
                                    ", attribute=" + std::to_string(a) + ") has fewer than " +
                                    std::to_string(min_cell_quota) + " samples");
      max_cell = std::max(max_cell, gi.cell(c, a).size());
      cycles.emplace_back(gi.cell(c, a), rng);
    }

  // A shuffled full pass guarantees epoch coverage; each chunk is then topped
  // up from the cell cycles until every cell meets its quota.
  const std::size_t fill = batch_size - quota_total;
  const std::size_t num_batches =
      fill > 0 ? (n + fill - 1) / fill : (max_cell + min_cell_quota - 1) / min_cell_quota;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);

  std::vector<std::vector<std::size_t>> batches(num_batches);
  std::vector<char> used(n, 0);
  std::size_t consumed = 0;
  for (std::size_t b = 0; b < num_batches; ++b) {
    std::vector<std::size_t>& batch = batches[b];
    const std::size_t chunk =
        fill == 0 ? 0
                  : (n - consumed) / (num_batches - b) +
                        (((n - consumed) % (num_batches - b)) > 0 ? 1 : 0);
    std::vector<std::size_t> cell_count(num_cells, 0);
    for (std::size_t k = 0; k < chunk; ++k) {
      const std::size_t idx = order[consumed++];
      batch.push_back(idx);
      used[idx] = 1;
      cell_count[gi.label_of(idx) * gi.num_attributes() + gi.attribute_of(idx)]++;
    }
    for (std::size_t cell = 0; cell < num_cells; ++cell) {
      while (cell_count[cell] < min_cell_quota) {
        const std::size_t idx = cycles[cell].next(rng);
        if (used[idx]) continue;  // cell size >= quota keeps this loop finite
        batch.push_back(idx);
        used[idx] = 1;
        cell_count[cell]++;
      }
    }
    for (std::size_t idx : batch) used[idx] = 0;
  }
  return batches;
}

}  // namespace raan
