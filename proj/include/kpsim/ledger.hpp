#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kpsim/topology.hpp"

namespace kpsim {

enum class TransferCategory : std::uint8_t {
  GpuPull,
  GpuPush,
  DenseMerge,
  SparseSync,
  ColdTierIo,
};
const char* to_string(TransferCategory c);

struct TransferRecord {
  TransferCategory category = TransferCategory::GpuPull;
  std::uint64_t bytes = 0;
  std::optional<RouteMode> mode;  // empty for inter-node / disk transfers
  double modeled_time = 0.0;      // seconds
};

struct CategoryTotals {
  std::uint64_t bytes = 0;
  std::uint64_t count = 0;
  double modeled_time = 0.0;

  bool operator==(const CategoryTotals&) const = default;
};

struct KStepRatios {
  double dense_bytes = 0.0;  // DenseMerge bytes, k-step over baseline
  double total_bytes = 0.0;  // all bytes, k-step over baseline

  bool operator==(const KStepRatios&) const = default;
};

struct LedgerReport {
  std::map<TransferCategory, CategoryTotals> categories;
  CategoryTotals total;
  std::optional<KStepRatios> vs_baseline;
  std::optional<double> two_phase_time_ratio;

  std::string to_json() const;
  static LedgerReport from_json(const std::string& text);
  bool operator==(const LedgerReport&) const = default;
};

// Append-only transfer accounting. Totals are order-independent: byte and
// count totals are integer sums, modeled-time totals are summed over the
// per-category times in sorted order at report() time.
class CommLedger {
 public:
  void record(const TransferRecord& rec);
  void append(const CommLedger& other);

  const std::vector<TransferRecord>& records() const { return records_; }
  std::uint64_t bytes(TransferCategory c) const;
  std::uint64_t count(TransferCategory c) const;
  std::uint64_t total_bytes() const;

  LedgerReport report() const;

 private:
  std::vector<TransferRecord> records_;
  std::map<TransferCategory, std::pair<std::uint64_t, std::uint64_t>>
      totals_;  // category -> (bytes, count)
};

// Byte ratios of a k-step run over its k=1 baseline for the same workload.
// Throws on a zero-byte baseline.
KStepRatios kstep_ratio(const CommLedger& kstep, const CommLedger& baseline);

// Modeled time of the planned (NvLink-first) routes over the host-routed
// baseline for a per-pair byte workload. All-zero workloads return 1.0.
using WorkloadMatrix =
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t>;
double two_phase_ratio(const TopologyGraph& g, const WorkloadMatrix& workload,
                       TimingModel model = TimingModel::StoreAndForward);

// Synthetic merge-schedule ledger: T minibatch steps, a DenseMerge
// transmission per worker every k-th step, a SparseSync transmission per
// worker every step. Used for communication-arithmetic checks and predicted
// ratio tables.
CommLedger schedule_ledger(std::uint64_t steps, std::uint64_t k,
                           std::uint64_t workers,
                           std::uint64_t dense_bytes_per_tx,
                           std::uint64_t sparse_bytes_per_tx);

}  // namespace kpsim
