#include "raan/fairness.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace raan {

void EvalFrame::validate() const {
  if (predictions.empty()) throw std::invalid_argument("EvalFrame: empty frame");
  if (labels.size() != predictions.size() || attributes.size() != predictions.size())
    throw std::invalid_argument("EvalFrame: length mismatch");
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if ((predictions[i] & ~1) || (labels[i] & ~1) || (attributes[i] & ~1))
      throw std::invalid_argument("EvalFrame: non-binary entry at row " + std::to_string(i));
  }
}

namespace {

struct Counts {
  // indexed [attribute][label]: total and predicted-positive counts
  double n[2][2] = {{0, 0}, {0, 0}};
  double pos[2][2] = {{0, 0}, {0, 0}};
  double correct[2][2] = {{0, 0}, {0, 0}};
};

Counts tally(const EvalFrame& f) {
  f.validate();
  Counts c;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const int a = f.attributes[i], y = f.labels[i], p = f.predictions[i];
    c.n[a][y] += 1;
    c.pos[a][y] += p;
    c.correct[a][y] += (p == y);
  }
  return c;
}

void require_cell(const Counts& c, int a, int y) {
  if (c.n[a][y] == 0)
    throw std::invalid_argument("fairness: empty cell (attribute=" + std::to_string(a) +
                                ", label=" + std::to_string(y) + ")");
}

}  // namespace

double dp_gap(const EvalFrame& frame) {
  const Counts c = tally(frame);
  for (int a : {0, 1})
    if (c.n[a][0] + c.n[a][1] == 0)
      throw std::invalid_argument("dp_gap: attribute group " + std::to_string(a) + " is empty");
  const double pr0 = (c.pos[0][0] + c.pos[0][1]) / (c.n[0][0] + c.n[0][1]);
  const double pr1 = (c.pos[1][0] + c.pos[1][1]) / (c.n[1][0] + c.n[1][1]);
  return std::abs(pr0 - pr1);
}

double eo_gap(const EvalFrame& frame) {
  const Counts c = tally(frame);
  for (int a : {0, 1})
    for (int y : {0, 1}) require_cell(c, a, y);
  const double tpr0 = c.pos[0][1] / c.n[0][1];
  const double tpr1 = c.pos[1][1] / c.n[1][1];
  const double fpr0 = c.pos[0][0] / c.n[0][0];
  const double fpr1 = c.pos[1][0] / c.n[1][0];
  return std::abs(tpr0 - tpr1) + std::abs(fpr0 - fpr1);
}

double worst_group_accuracy(const EvalFrame& frame) {
  const Counts c = tally(frame);
  double worst = 1.0;
  for (int a : {0, 1})
    for (int y : {0, 1}) {
      require_cell(c, a, y);
      worst = std::min(worst, c.correct[a][y] / c.n[a][y]);
    }
  return worst;
}

double accuracy(const EvalFrame& frame) {
  const Counts c = tally(frame);
  double correct = 0.0, total = 0.0;
  for (int a : {0, 1})
    for (int y : {0, 1}) {
      correct += c.correct[a][y];
      total += c.n[a][y];
    }
  return correct / total;
}

}  // namespace raan
