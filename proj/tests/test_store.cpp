#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "kpsim/store.hpp"

using namespace kpsim;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  const auto dir = fs::temp_directory_path() /
                   ("kpsim_store_" + tag + "_" + std::to_string(counter++));
  fs::remove_all(dir);
  return dir;
}

TierConfig tier(const fs::path& dir, std::size_t capacity) {
  TierConfig t;
  t.cache_capacity = capacity;
  t.cold_path = dir.string();
  return t;
}

// Unbounded single-map replay of the same update stream; eviction must be
// invisible next to it.
struct FlatOracle {
  std::size_t dim;
  std::map<ParameterKey, std::pair<std::vector<double>, std::vector<double>>>
      entries;

  explicit FlatOracle(std::size_t d) : dim(d) {}

  std::pair<std::vector<double>, std::vector<double>>& get(ParameterKey key) {
    auto it = entries.find(key);
    if (it == entries.end())
      it = entries
               .emplace(key, std::make_pair(
                                 std::vector<double>(dim, 0.0),
                                 std::vector<double>(
                                     dim, TieredStore::kFreshAccumulator)))
               .first;
    return it->second;
  }

  void push(ParameterKey key, const std::vector<double>& g, double lr) {
    auto& [w, acc] = get(key);
    for (std::size_t j = 0; j < dim; ++j) {
      acc[j] += g[j] * g[j];
      w[j] -= lr * g[j] / std::sqrt(acc[j]);
    }
  }
};

}  // namespace

TEST_CASE("pull_batch initialization and access accounting") {
  const auto dir = temp_dir("pull");
  TieredStore store(tier(dir, 8), 3);

  SUBCASE("fresh keys get zero weights and the documented accumulator") {
    const auto got = store.pull_batch({42});
    REQUIRE(got.count(42) == 1);
    CHECK(got.at(42).weights == std::vector<double>{0.0, 0.0, 0.0});
    CHECK(got.at(42).adagrad_acc ==
          std::vector<double>(3, TieredStore::kFreshAccumulator));
    CHECK(got.at(42).access_count == 1);
  }
  SUBCASE("one access bump per pull_batch call") {
    store.pull_batch({7});
    store.pull_batch({7});
    const auto got = store.pull_batch({7});
    CHECK(got.at(7).access_count == 3);
  }
  SUBCASE("empty key set is rejected") {
    CHECK_THROWS_AS(store.pull_batch({}), StoreError);
  }
  fs::remove_all(dir);
}

TEST_CASE("push_updates contract") {
  const auto dir = temp_dir("push");
  TieredStore store(tier(dir, 8), 2);
  store.pull_batch({1, 2});

  SUBCASE("zero gradients leave entries unchanged") {
    store.push_updates({{1, {0.0, 0.0}}}, 0.1);
    const auto got = store.pull_batch({1});
    CHECK(got.at(1).weights == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("key outside the working set is a contract violation") {
    CHECK_THROWS_AS(store.push_updates({{99, {1.0, 1.0}}}, 0.1), StoreError);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(store.push_updates({{1, {1.0}}}, 0.1), StoreError);
  }
  fs::remove_all(dir);
}

TEST_CASE("eviction follows lfu with lru tie-break") {
  const auto dir = temp_dir("evict");
  TieredStore store(tier(dir, 2), 2);

  store.pull_batch({100, 200});  // a, b
  store.pull_batch({100});       // access a again
  store.pull_batch({300});       // c; cache now over capacity
  CHECK(store.cache_size() == 3);
  CHECK(store.evict() == 1);
  CHECK(store.cache_size() == 2);

  // b (single access, oldest) must be the one that went cold
  PullStats stats;
  store.pull_batch({200}, stats);
  CHECK(stats.cold_loads == 1);
  PullStats stats_a;
  store.pull_batch({100}, stats_a);
  CHECK(stats_a.cache_hits == 1);

  SUBCASE("under capacity evicts nothing") {
    store.evict();  // the two reloads above pushed the cache over again
    CHECK(store.evict() == 0);
  }
  fs::remove_all(dir);
}

TEST_CASE("evicted values come back bit-identical") {
  const auto dir = temp_dir("roundtrip");
  TieredStore store(tier(dir, 1), 5);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-2.0, 2.0);

  std::map<ParameterKey, std::vector<double>> pushed;
  for (ParameterKey key = 0; key < 1000; ++key) {
    store.pull_batch({key});
    std::vector<double> g(5);
    for (auto& x : g) x = u(rng);
    store.push_updates({{key, g}}, 0.05);
    pushed[key] = store.lookup(key).weights;
    store.evict();  // capacity 1 forces the previous key cold
  }
  for (const auto& [key, want] : pushed) {
    const auto got = store.pull_batch({key});
    CHECK(got.at(key).weights == want);  // exact doubles through the file
  }
  fs::remove_all(dir);
}

TEST_CASE("flush and reopen") {
  const auto dir = temp_dir("flush");
  {
    TieredStore store(tier(dir, 64), 2);
    store.pull_batch({5, 6});
    store.push_updates({{5, {1.0, -1.0}}, {6, {0.5, 2.0}}}, 0.1);
    store.flush();
    store.flush();  // idempotent on observable state
  }
  {
    TieredStore reopened(tier(dir, 64), 2);
    CHECK(reopened.cache_size() == 0);
    const auto got = reopened.pull_batch({5, 6});
    // same adagrad arithmetic replayed by hand
    FlatOracle oracle(2);
    oracle.push(5, {1.0, -1.0}, 0.1);
    oracle.push(6, {0.5, 2.0}, 0.1);
    CHECK(got.at(5).weights == oracle.get(5).first);
    CHECK(got.at(6).weights == oracle.get(6).first);
    CHECK(got.at(5).adagrad_acc == oracle.get(5).second);
  }
  SUBCASE("empty store flushes and reopens") {
    const auto dir2 = temp_dir("flush_empty");
    { TieredStore store(tier(dir2, 4), 2); store.flush(); }
    TieredStore reopened(tier(dir2, 4), 2);
    CHECK(reopened.cache_size() == 0);
    fs::remove_all(dir2);
  }
  fs::remove_all(dir);
}

TEST_CASE("corrupt cold data is reported") {
  const auto dir = temp_dir("corrupt");
  {
    TieredStore store(tier(dir, 1), 2);
    store.pull_batch({1, 2});
    store.evict();
  }
  // clobber the data file body
  {
    std::fstream f((dir / "cold.dat").string(),
                   std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  TieredStore store(tier(dir, 1), 2);
  CHECK_THROWS_AS(store.pull_batch({1, 2}), StoreError);
  fs::remove_all(dir);
}

TEST_CASE("randomized operations match the flat-map oracle") {
  const auto dir = temp_dir("fuzz");
  TieredStore store(tier(dir, 8), 3);
  FlatOracle oracle(3);

  std::mt19937_64 rng(31);
  std::uniform_int_distribution<ParameterKey> key_dist(0, 99);
  std::uniform_int_distribution<int> op(0, 99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  for (int step = 0; step < 2000; ++step) {
    std::set<ParameterKey> keys;
    const int n = 1 + op(rng) % 6;
    while (static_cast<int>(keys.size()) < n) keys.insert(key_dist(rng));

    const auto got = store.pull_batch(keys);
    for (ParameterKey key : keys) {
      const auto& [w, acc] = oracle.get(key);
      CHECK(got.at(key).weights == w);
      CHECK(got.at(key).adagrad_acc == acc);
    }
    if (op(rng) < 70) {
      std::map<ParameterKey, std::vector<double>> updates;
      for (ParameterKey key : keys) {
        std::vector<double> g(3);
        for (auto& x : g) x = u(rng);
        updates[key] = g;
      }
      store.push_updates(updates, 0.1);
      for (const auto& [key, g] : updates) oracle.push(key, g, 0.1);
    }
    if (op(rng) < 20) {
      store.evict();
      CHECK(store.cache_size() <= 8);
    }
  }
  fs::remove_all(dir);
}
