#pragma once

#include <optional>
#include <span>
#include <vector>

#include "kpsim/common.hpp"

namespace kpsim {

// Probability that a random positive outranks a random negative, ties
// counted one half; rank-sum computation, O(n log n). Returns nullopt when
// either class is absent.
std::optional<double> compute_auc(std::span<const double> scores,
                                  std::span<const int> labels);

// Accumulates (score, label) pairs across batches for pooled AUC.
class AucAccumulator {
 public:
  void add(std::span<const double> scores, std::span<const int> labels);
  std::optional<double> value() const;
  std::size_t size() const { return scores_.size(); }

 private:
  std::vector<double> scores_;
  std::vector<int> labels_;
};

}  // namespace kpsim
