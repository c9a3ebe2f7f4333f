#ifndef RAAN_FAIRNESS_HPP_
#define RAAN_FAIRNESS_HPP_

#include <cstddef>
#include <vector>

namespace raan {

/// Binary predictions/labels/attributes for metric evaluation. Construction
/// validates lengths and {0,1} entries; multi-class frames are rejected.
struct EvalFrame {
  std::vector<int> predictions;
  std::vector<int> labels;
  std::vector<int> attributes;

  void validate() const;
  std::size_t size() const { return predictions.size(); }
};

/// |p(yhat=1 | a=0) - p(yhat=1 | a=1)|. Throws if an attribute group is empty.
double dp_gap(const EvalFrame& frame);

/// |TPR_0 - TPR_1| + |FPR_0 - FPR_1|. Throws if any (a, y) cell is empty.
double eo_gap(const EvalFrame& frame);

/// Minimum per-(y, a)-cell accuracy. Throws if any cell is empty.
double worst_group_accuracy(const EvalFrame& frame);

double accuracy(const EvalFrame& frame);

}  // namespace raan

#endif  // RAAN_FAIRNESS_HPP_
