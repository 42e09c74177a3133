#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "kpsim/common.hpp"

namespace kpsim {

using ParameterKey = std::uint64_t;

class StoreError : public Error {
 public:
  explicit StoreError(const std::string& what) : Error(what) {}
};

struct EmbeddingEntry {
  std::vector<double> weights;
  std::vector<double> adagrad_acc;
  std::uint64_t access_count = 0;
  std::uint64_t last_access = 0;  // logical pull clock
};

enum class EvictionPolicy : std::uint8_t { LfuThenLru };

struct TierConfig {
  std::size_t cache_capacity = 1;
  std::string cold_path;  // checkpoint directory (data + index file)
  EvictionPolicy eviction = EvictionPolicy::LfuThenLru;
};

struct PullStats {
  std::size_t cache_hits = 0;
  std::size_t cold_loads = 0;
  std::size_t fresh = 0;
  std::uint64_t cold_bytes_read = 0;
};

// Two software tiers for sparse parameters: a capacity-bounded in-memory
// cache and a file-backed cold tier. Fresh entries start at zero weights with
// adagrad_acc = 1e-6. Single writer; callers serialize pull -> push -> evict.
class TieredStore {
 public:
  static constexpr double kFreshAccumulator = 1e-6;

  TieredStore(TierConfig config, std::size_t embedding_dim);

  // Resolves every key (cache, then cold tier, then fresh initialization),
  // bumps access stats once per call per key, and replaces the working set.
  // The returned map is a value snapshot.
  std::map<ParameterKey, EmbeddingEntry> pull_batch(
      const std::set<ParameterKey>& keys);
  std::map<ParameterKey, EmbeddingEntry> pull_batch(
      const std::set<ParameterKey>& keys, PullStats& stats);

  // Applies the AdaGrad rule to each keyed entry; keys must belong to the
  // current working set. Updates are applied in ascending key order.
  void push_updates(const std::map<ParameterKey, std::vector<double>>& updates,
                    double lr);

  // Live view of a working-set entry (used between pull and push).
  const EmbeddingEntry& lookup(ParameterKey key) const;

  // Moves lowest-frequency entries (ties: oldest, then smallest key) to the
  // cold tier until the cache fits the configured capacity.
  std::size_t evict();
  // Persists every cached entry and the index; the store can be reopened
  // from cold_path with identical observable values.
  void flush();

  std::size_t cache_size() const { return cache_.size(); }
  std::size_t embedding_dim() const { return dim_; }
  std::uint64_t cold_bytes_written() const { return cold_bytes_written_; }

 private:
  EmbeddingEntry& resolve(ParameterKey key, PullStats& stats);
  void write_cold(ParameterKey key, const EmbeddingEntry& e);
  std::optional<EmbeddingEntry> read_cold(ParameterKey key,
                                          PullStats* stats) const;
  void write_index() const;
  void load_index();

  TierConfig config_;
  std::size_t dim_;
  std::unordered_map<ParameterKey, EmbeddingEntry> cache_;
  std::set<ParameterKey> working_set_;
  std::map<ParameterKey, std::uint64_t> cold_index_;  // key -> data offset
  std::uint64_t clock_ = 0;
  std::uint64_t cold_bytes_written_ = 0;
  std::string data_path_;
  std::string index_path_;
};

}  // namespace kpsim
