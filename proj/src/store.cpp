#include "kpsim/store.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "kpsim/optimizer.hpp"

// the documented cold-tier format is little-endian
static_assert(std::endian::native == std::endian::little);

namespace kpsim {

namespace fs = std::filesystem;

// Cold-tier layout (all little-endian):
//   data file:  magic "KPSC", version byte 0x01, then records of
//               key u64 | dim u32 | dim f64 weights | dim f64 accumulators
//   index file: magic "KPSI", version byte 0x01, then (key u64, offset u64)
//               pairs; offset points at a record in the data file.
namespace {

constexpr char kDataMagic[4] = {'K', 'P', 'S', 'C'};
constexpr char kIndexMagic[4] = {'K', 'P', 'S', 'I'};
constexpr std::uint8_t kVersion = 1;

template <typename T>
void put(std::string& buf, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  char raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  buf.append(raw, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  char raw[sizeof(T)];
  in.read(raw, sizeof(T));
  if (!in) throw StoreError("cold tier: truncated record");
  T value;
  std::memcpy(&value, raw, sizeof(T));
  return value;
}

std::uint64_t record_size(std::size_t dim) {
  return 8 + 4 + 16ull * dim;
}

}  // namespace

TieredStore::TieredStore(TierConfig config, std::size_t embedding_dim)
    : config_(std::move(config)), dim_(embedding_dim) {
  if (config_.cache_capacity < 1)
    throw StoreError("cache_capacity must be >= 1");
  if (dim_ < 1) throw StoreError("embedding_dim must be >= 1");
  if (config_.cold_path.empty())
    throw StoreError("cold_path must be a directory path");
  fs::create_directories(config_.cold_path);
  data_path_ = (fs::path(config_.cold_path) / "cold.dat").string();
  index_path_ = (fs::path(config_.cold_path) / "cold.idx").string();
  if (fs::exists(data_path_)) {
    load_index();
  } else {
    std::ofstream out(data_path_, std::ios::binary);
    std::string header(kDataMagic, 4);
    header.push_back(static_cast<char>(kVersion));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    if (!out) throw StoreError("cold tier: cannot create " + data_path_);
    write_index();
  }
}

void TieredStore::load_index() {
  std::ifstream in(index_path_, std::ios::binary);
  if (!in) throw StoreError("cold tier: missing index file " + index_path_);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kIndexMagic, 4) != 0)
    throw StoreError("cold tier: bad index magic");
  if (get<std::uint8_t>(in) != kVersion)
    throw StoreError("cold tier: unsupported index version");
  cold_index_.clear();
  while (true) {
    char raw[16];
    in.read(raw, 16);
    if (in.gcount() == 0 && in.eof()) break;
    if (in.gcount() != 16) throw StoreError("cold tier: truncated index");
    std::uint64_t key, offset;
    std::memcpy(&key, raw, 8);
    std::memcpy(&offset, raw + 8, 8);
    cold_index_[key] = offset;
  }
}

void TieredStore::write_index() const {
  std::ofstream out(index_path_, std::ios::binary | std::ios::trunc);
  std::string buf(kIndexMagic, 4);
  buf.push_back(static_cast<char>(kVersion));
  for (const auto& [key, offset] : cold_index_) {
    put(buf, key);
    put(buf, offset);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw StoreError("cold tier: cannot write index " + index_path_);
}

void TieredStore::write_cold(ParameterKey key, const EmbeddingEntry& e) {
  std::ofstream out(data_path_, std::ios::binary | std::ios::app);
  if (!out) throw StoreError("cold tier: cannot open " + data_path_);
  out.seekp(0, std::ios::end);
  const std::uint64_t offset = static_cast<std::uint64_t>(out.tellp());
  std::string buf;
  put(buf, key);
  put(buf, static_cast<std::uint32_t>(dim_));
  for (double w : e.weights) put(buf, w);
  for (double a : e.adagrad_acc) put(buf, a);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw StoreError("cold tier: write failure on " + data_path_);
  cold_index_[key] = offset;
  cold_bytes_written_ += record_size(dim_);
}

std::optional<EmbeddingEntry> TieredStore::read_cold(ParameterKey key,
                                                     PullStats* stats) const {
  auto it = cold_index_.find(key);
  if (it == cold_index_.end()) return std::nullopt;
  std::ifstream in(data_path_, std::ios::binary);
  if (!in) throw StoreError("cold tier: cannot open " + data_path_);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kDataMagic, 4) != 0)
    throw StoreError("cold tier: bad data magic");
  if (get<std::uint8_t>(in) != kVersion)
    throw StoreError("cold tier: unsupported data version");
  in.seekg(static_cast<std::streamoff>(it->second));
  const auto stored_key = get<std::uint64_t>(in);
  if (stored_key != key)
    throw StoreError("cold tier: corrupt record (key mismatch)");
  const auto stored_dim = get<std::uint32_t>(in);
  if (stored_dim != dim_)
    throw StoreError("cold tier: corrupt record (dimension mismatch)");
  EmbeddingEntry e;
  e.weights.resize(dim_);
  e.adagrad_acc.resize(dim_);
  for (auto& w : e.weights) w = get<double>(in);
  for (auto& a : e.adagrad_acc) a = get<double>(in);
  if (stats) stats->cold_bytes_read += record_size(dim_);
  return e;
}

EmbeddingEntry& TieredStore::resolve(ParameterKey key, PullStats& stats) {
  auto it = cache_.find(key);
  if (it != cache_.end()) {
    ++stats.cache_hits;
    return it->second;
  }
  if (auto cold = read_cold(key, &stats)) {
    ++stats.cold_loads;
    return cache_.emplace(key, std::move(*cold)).first->second;
  }
  ++stats.fresh;
  EmbeddingEntry e;
  e.weights.assign(dim_, 0.0);
  e.adagrad_acc.assign(dim_, kFreshAccumulator);
  return cache_.emplace(key, std::move(e)).first->second;
}

std::map<ParameterKey, EmbeddingEntry> TieredStore::pull_batch(
    const std::set<ParameterKey>& keys) {
  PullStats stats;
  return pull_batch(keys, stats);
}

std::map<ParameterKey, EmbeddingEntry> TieredStore::pull_batch(
    const std::set<ParameterKey>& keys, PullStats& stats) {
  if (keys.empty()) throw StoreError("pull_batch: empty key set");
  ++clock_;
  std::map<ParameterKey, EmbeddingEntry> snapshot;
  for (ParameterKey key : keys) {
    EmbeddingEntry& e = resolve(key, stats);
    e.access_count += 1;
    e.last_access = clock_;
    snapshot.emplace(key, e);
  }
  working_set_ = keys;
  return snapshot;
}

void TieredStore::push_updates(
    const std::map<ParameterKey, std::vector<double>>& updates, double lr) {
  for (const auto& [key, grad] : updates) {
    if (!working_set_.count(key))
      throw StoreError("push_updates: key " + std::to_string(key) +
                       " not in the current working set");
    if (grad.size() != dim_)
      throw StoreError("push_updates: gradient dimension mismatch");
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      // pulled earlier but evicted since; restore from cold
      PullStats stats;
      resolve(key, stats);
      it = cache_.find(key);
    }
    adagrad_sparse_update(it->second.weights, it->second.adagrad_acc, grad, lr);
  }
}

const EmbeddingEntry& TieredStore::lookup(ParameterKey key) const {
  if (!working_set_.count(key))
    throw StoreError("lookup: key " + std::to_string(key) +
                     " not in the current working set");
  auto it = cache_.find(key);
  if (it == cache_.end())
    throw StoreError("lookup: key " + std::to_string(key) + " not cached");
  return it->second;
}

std::size_t TieredStore::evict() {
  std::size_t moved = 0;
  const auto rank = [](const auto& p) {
    return std::make_tuple(p.second.access_count, p.second.last_access,
                           p.first);
  };
  while (cache_.size() > config_.cache_capacity) {
    auto victim = cache_.begin();
    for (auto it = std::next(cache_.begin()); it != cache_.end(); ++it)
      if (rank(*it) < rank(*victim)) victim = it;
    write_cold(victim->first, victim->second);
    cache_.erase(victim);
    ++moved;
  }
  if (moved > 0) write_index();
  return moved;
}

void TieredStore::flush() {
  std::vector<ParameterKey> keys;
  keys.reserve(cache_.size());
  for (const auto& [key, e] : cache_) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  for (ParameterKey key : keys) write_cold(key, cache_.at(key));
  write_index();
}

}  // namespace kpsim
