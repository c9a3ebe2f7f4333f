#include "raan/aan.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace raan {

GroupIndex::GroupIndex(const std::vector<std::size_t>& labels,
                       const std::vector<std::size_t>& attributes, std::size_t num_classes,
                       std::size_t num_attributes)
    : num_classes_(num_classes),
      num_attributes_(num_attributes),
      labels_(labels),
      attributes_(attributes) {
  if (labels.size() != attributes.size())
    throw std::invalid_argument("GroupIndex: labels/attributes length mismatch");
  cells_.assign(num_classes, std::vector<std::vector<std::size_t>>(num_attributes));
  class_lists_.assign(num_classes, {});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes)
      throw std::invalid_argument("GroupIndex: label " + std::to_string(labels[i]) +
                                  " out of range at sample " + std::to_string(i));
    if (attributes[i] >= num_attributes)
      throw std::invalid_argument("GroupIndex: attribute " + std::to_string(attributes[i]) +
                                  " out of range at sample " + std::to_string(i));
    cells_[labels[i]][attributes[i]].push_back(i);
    class_lists_[labels[i]].push_back(i);
  }
  complements_.assign(num_classes, std::vector<std::vector<std::size_t>>(num_attributes));
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t a = 0; a < num_attributes; ++a) {
      for (std::size_t b = 0; b < num_attributes; ++b) {
        if (b == a) continue;
        complements_[c][a].insert(complements_[c][a].end(), cells_[c][b].begin(),
                                  cells_[c][b].end());
      }
      std::sort(complements_[c][a].begin(), complements_[c][a].end());
    }
  }
}

const std::vector<std::size_t>& GroupIndex::cell(std::size_t c, std::size_t a) const {
  return cells_.at(c).at(a);
}

const std::vector<std::size_t>& GroupIndex::class_list(std::size_t c) const {
  return class_lists_.at(c);
}

const std::vector<std::size_t>& GroupIndex::neighbors(std::size_t i) const {
  return complements_[labels_[i]][attributes_[i]];
}

void GroupIndex::require_all_cells_nonempty() const {
  for (std::size_t c = 0; c < num_classes_; ++c)
    for (std::size_t a = 0; a < num_attributes_; ++a)
      if (cells_[c][a].empty())
        throw std::invalid_argument("GroupIndex: empty cell (class=" + std::to_string(c) +
                                    ", attribute=" + std::to_string(a) + ")");
}

GroupIndex build_group_index(const std::vector<std::size_t>& labels,
                             const std::vector<std::size_t>& attributes,
                             std::size_t num_classes, std::size_t num_attributes) {
  return GroupIndex(labels, attributes, num_classes, num_attributes);
}

std::vector<double> pair_weights(const DenseMatrix& z, std::size_t i,
                                 const std::vector<std::size_t>& neighbors, double tau) {
  if (neighbors.empty())
    throw std::invalid_argument("pair_weights: empty neighborhood for center " +
                                std::to_string(i));
  std::vector<double> sims(neighbors.size());
  for (std::size_t k = 0; k < neighbors.size(); ++k) sims[k] = dot(z.row(i), z.row(neighbors[k]));
  return stable_softmax(sims, tau);
}

namespace {

// argmin sum_j (q_j - v_j)^2 / (2 d_j)  s.t.  sum q = 1, q >= 0.
// Solution q_j = max(v_j - d_j * lambda, 0) with lambda found by bisection
// (the constraint sum is monotone decreasing in lambda).
std::vector<double> weighted_simplex_projection(const std::vector<double>& v,
                                                const std::vector<double>& d) {
  const std::size_t m = v.size();
  auto mass = [&](double lambda) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += std::max(v[j] - d[j] * lambda, 0.0);
    return s;
  };
  double lo = -1e9, hi = 1e9;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mass(mid) > 1.0)
      lo = mid;
    else
      hi = mid;
  }
  const double lambda = 0.5 * (lo + hi);
  std::vector<double> q(m);
  double total = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    q[j] = std::max(v[j] - d[j] * lambda, 0.0);
    total += q[j];
  }
  for (double& x : q) x /= total;  // renormalize away bisection residue
  return q;
}

}  // namespace

std::vector<double> dro_oracle(const std::vector<double>& similarities, double tau,
                               std::size_t max_iter, double tol) {
  if (!(tau > 0.0)) throw std::invalid_argument("dro_oracle: tau must be positive");
  const std::size_t m = similarities.size();
  if (m == 0) throw std::invalid_argument("dro_oracle: empty instance");
  const double eta = 0.5 / tau;
  std::vector<double> p(m, 1.0 / static_cast<double>(m));
  std::vector<double> v(m), d(m);
  double delta = 0.1 / static_cast<double>(m);
  double move = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    for (std::size_t j = 0; j < m; ++j) {
      const double pj = std::max(p[j], 1e-300);
      const double grad =
          similarities[j] - tau * std::log(pj * static_cast<double>(m)) - tau;
      d[j] = eta * (p[j] + delta);
      v[j] = p[j] + d[j] * grad;
    }
    std::vector<double> q = weighted_simplex_projection(v, d);
    move = 0.0;
    for (std::size_t j = 0; j < m; ++j) move = std::max(move, std::abs(q[j] - p[j]));
    p = std::move(q);
    delta *= 0.5;
    if (move < tol) return p;
  }
  throw std::runtime_error("dro_oracle: no convergence after " + std::to_string(max_iter) +
                           " iterations, last residual " + std::to_string(move));
}

std::vector<double> sample_weights(const DenseMatrix& z, const GroupIndex& gi, double tau) {
  const std::size_t n = gi.num_samples();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nbrs = gi.neighbors(i);
    if (nbrs.empty())
      throw std::invalid_argument("sample_weights: empty neighborhood for sample " +
                                  std::to_string(i));
    const std::vector<double> pij = pair_weights(z, i, nbrs, tau);
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      const std::size_t j = nbrs[k];
      out[j] += pij[k] / static_cast<double>(gi.neighbors(j).size());
    }
  }
  return out;
}

double raan_value(const DenseMatrix& z, const std::vector<double>& losses,
                  const GroupIndex& gi, double tau) {
  const std::vector<double> p = sample_weights(z, gi, tau);
  double sum = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) sum += p[j] * losses[j];
  return sum / static_cast<double>(gi.num_attributes() * gi.num_classes());
}

double raan_value_pairwise(const DenseMatrix& z, const std::vector<double>& losses,
                           const GroupIndex& gi, double tau) {
  double total = 0.0;
  for (std::size_t c = 0; c < gi.num_classes(); ++c) {
    for (std::size_t a = 0; a < gi.num_attributes(); ++a) {
      const auto& cell = gi.cell(c, a);
      if (cell.empty()) continue;
      double cell_sum = 0.0;
      for (std::size_t i : cell) {
        const auto& nbrs = gi.neighbors(i);
        const std::vector<double> pij = pair_weights(z, i, nbrs, tau);
        double l_aan = 0.0;
        for (std::size_t k = 0; k < nbrs.size(); ++k) l_aan += pij[k] * losses[nbrs[k]];
        cell_sum += l_aan;
      }
      total += cell_sum / static_cast<double>(cell.size());
    }
  }
  return total / static_cast<double>(gi.num_classes() * gi.num_attributes());
}

std::optional<InnerValue> inner_g(const DenseMatrix& z, const std::vector<double>& losses,
                                  std::size_t i, const std::vector<std::size_t>& subset,
                                  const GroupIndex& gi, double tau) {
  const auto& nbrs = gi.neighbors(i);
  if (nbrs.empty())
    throw std::invalid_argument("inner_g: empty true neighborhood for sample " +
                                std::to_string(i));
  std::vector<bool> in_subset(gi.num_samples(), false);
  for (std::size_t j : subset) in_subset[j] = true;
  double e_sum = 0.0, el_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t j : nbrs) {
    if (!in_subset[j]) continue;
    const double e = std::exp(dot(z.row(i), z.row(j)) / tau);
    e_sum += e;
    el_sum += e * losses[j];
    ++count;
  }
  if (count == 0) return std::nullopt;
  const double scale = static_cast<double>(gi.num_samples()) /
                       (static_cast<double>(gi.num_attributes() * gi.num_classes()) *
                        static_cast<double>(count));
  return InnerValue{scale * el_sum, scale * e_sum};
}

std::pair<double, double> grad_f(const InnerValue& g) {
  if (!(g.g2 > 0.0))
    throw std::invalid_argument("grad_f: normalizer component must be positive, got " +
                                std::to_string(g.g2));
  return {1.0 / g.g2, -g.g1 / (g.g2 * g.g2)};
}

}  // namespace raan
