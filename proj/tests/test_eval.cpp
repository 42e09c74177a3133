#include <random>

#include "doctest.h"
#include "kpsim/eval.hpp"

using namespace kpsim;

namespace {

// O(n^2) all-pairs counting oracle, ties as one half.
double pair_count_auc(const std::vector<double>& scores,
                      const std::vector<int>& labels) {
  double won = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) won += 1.0;
      else if (scores[i] == scores[j]) won += 0.5;
    }
  }
  return won / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("auc basics") {
  CHECK(*compute_auc(std::vector<double>{0.1, 0.9}, std::vector<int>{0, 1}) ==
        1.0);
  CHECK(*compute_auc(std::vector<double>{0.9, 0.1}, std::vector<int>{0, 1}) ==
        0.0);
  CHECK(*compute_auc(std::vector<double>{0.4, 0.4, 0.4},
                     std::vector<int>{0, 1, 0}) == 0.5);
  CHECK(!compute_auc(std::vector<double>{0.2, 0.3}, std::vector<int>{1, 1})
           .has_value());
  CHECK_THROWS_AS(
      compute_auc(std::vector<double>{0.2}, std::vector<int>{2}), Error);
}

TEST_CASE("rank-sum equals the quadratic pair-counting oracle") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> quant(1, 20);

  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 50 + 95 * static_cast<std::size_t>(trial);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    const bool with_ties = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = with_ties ? quant(rng) / 20.0 : u(rng);
      labels[i] = coin(rng);
    }
    // ensure both classes exist
    labels[0] = 0;
    labels[1] = 1;
    const auto fast = compute_auc(scores, labels);
    REQUIRE(fast.has_value());
    CHECK(std::abs(*fast - pair_count_auc(scores, labels)) <= 1e-12);
  }
}

TEST_CASE("accumulator pools batches") {
  AucAccumulator acc;
  CHECK(!acc.value().has_value());
  acc.add(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0});
  acc.add(std::vector<double>{0.8, 0.2}, std::vector<int>{1, 0});
  CHECK(acc.size() == 4);
  CHECK(*acc.value() == 1.0);
}
