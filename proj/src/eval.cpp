#include "kpsim/eval.hpp"

#include <algorithm>
#include <numeric>

namespace kpsim {

std::optional<double> compute_auc(std::span<const double> scores,
                                  std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw Error("compute_auc: scores/labels length mismatch");
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw Error("compute_auc: label outside {0,1}");
    pos += static_cast<std::size_t>(y);
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // average ranks over tie groups, 1-based
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // (i+1 + j)/2
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] == 1) pos_rank_sum += avg_rank;
    i = j;
  }
  const double p = static_cast<double>(pos), m = static_cast<double>(neg);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * m);
}

void AucAccumulator::add(std::span<const double> scores,
                         std::span<const int> labels) {
  scores_.insert(scores_.end(), scores.begin(), scores.end());
  labels_.insert(labels_.end(), labels.begin(), labels.end());
}

std::optional<double> AucAccumulator::value() const {
  if (scores_.empty()) return std::nullopt;
  return compute_auc(scores_, labels_);
}

}  // namespace kpsim
