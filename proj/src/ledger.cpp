#include "kpsim/ledger.hpp"

#include <algorithm>

#include "json.hpp"

namespace kpsim {

const char* to_string(TransferCategory c) {
  switch (c) {
    case TransferCategory::GpuPull: return "gpu_pull";
    case TransferCategory::GpuPush: return "gpu_push";
    case TransferCategory::DenseMerge: return "dense_merge";
    case TransferCategory::SparseSync: return "sparse_sync";
    case TransferCategory::ColdTierIo: return "cold_tier_io";
  }
  return "?";
}

static const TransferCategory kAllCategories[] = {
    TransferCategory::GpuPull, TransferCategory::GpuPush,
    TransferCategory::DenseMerge, TransferCategory::SparseSync,
    TransferCategory::ColdTierIo};

static std::optional<TransferCategory> category_from_string(
    const std::string& s) {
  for (auto c : kAllCategories)
    if (s == to_string(c)) return c;
  return std::nullopt;
}

void CommLedger::record(const TransferRecord& rec) {
  records_.push_back(rec);
  auto& [bytes, count] = totals_[rec.category];
  bytes += rec.bytes;
  count += 1;
}

void CommLedger::append(const CommLedger& other) {
  for (const auto& r : other.records_) record(r);
}

std::uint64_t CommLedger::bytes(TransferCategory c) const {
  auto it = totals_.find(c);
  return it == totals_.end() ? 0 : it->second.first;
}

std::uint64_t CommLedger::count(TransferCategory c) const {
  auto it = totals_.find(c);
  return it == totals_.end() ? 0 : it->second.second;
}

std::uint64_t CommLedger::total_bytes() const {
  std::uint64_t t = 0;
  for (const auto& [c, bc] : totals_) t += bc.first;
  return t;
}

LedgerReport CommLedger::report() const {
  LedgerReport rep;
  std::map<TransferCategory, std::vector<double>> times;
  for (const auto& r : records_) times[r.category].push_back(r.modeled_time);
  for (const auto& [c, bc] : totals_) {
    CategoryTotals t;
    t.bytes = bc.first;
    t.count = bc.second;
    auto& ts = times[c];
    std::sort(ts.begin(), ts.end());
    for (double x : ts) t.modeled_time += x;
    rep.categories[c] = t;
  }
  std::vector<double> all;
  all.reserve(records_.size());
  for (const auto& r : records_) all.push_back(r.modeled_time);
  std::sort(all.begin(), all.end());
  for (double x : all) rep.total.modeled_time += x;
  for (const auto& [c, t] : rep.categories) {
    rep.total.bytes += t.bytes;
    rep.total.count += t.count;
  }
  return rep;
}

std::string LedgerReport::to_json() const {
  nlohmann::json j;
  j["schema"] = "kpsim.ledger.v1";
  auto dump_totals = [](const CategoryTotals& t) {
    return nlohmann::json{{"bytes", t.bytes},
                          {"count", t.count},
                          {"modeled_time", t.modeled_time}};
  };
  j["categories"] = nlohmann::json::object();
  for (const auto& [c, t] : categories) j["categories"][to_string(c)] = dump_totals(t);
  j["total"] = dump_totals(total);
  if (vs_baseline) {
    j["vs_baseline"] = {{"dense_bytes", vs_baseline->dense_bytes},
                        {"total_bytes", vs_baseline->total_bytes}};
  }
  if (two_phase_time_ratio) j["two_phase_time_ratio"] = *two_phase_time_ratio;
  return j.dump(2);
}

LedgerReport LedgerReport::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("schema", "") != "kpsim.ledger.v1")
    throw Error("unrecognized ledger report schema");
  auto read_totals = [](const nlohmann::json& t) {
    CategoryTotals out;
    out.bytes = t.at("bytes").get<std::uint64_t>();
    out.count = t.at("count").get<std::uint64_t>();
    out.modeled_time = t.at("modeled_time").get<double>();
    return out;
  };
  LedgerReport rep;
  for (const auto& [key, val] : j.at("categories").items()) {
    auto c = category_from_string(key);
    if (!c) throw Error("unknown ledger category: " + key);
    rep.categories[*c] = read_totals(val);
  }
  rep.total = read_totals(j.at("total"));
  if (j.contains("vs_baseline")) {
    KStepRatios r;
    r.dense_bytes = j["vs_baseline"].at("dense_bytes").get<double>();
    r.total_bytes = j["vs_baseline"].at("total_bytes").get<double>();
    rep.vs_baseline = r;
  }
  if (j.contains("two_phase_time_ratio"))
    rep.two_phase_time_ratio = j["two_phase_time_ratio"].get<double>();
  return rep;
}

KStepRatios kstep_ratio(const CommLedger& kstep, const CommLedger& baseline) {
  const auto base_dense = baseline.bytes(TransferCategory::DenseMerge);
  const auto base_total = baseline.total_bytes();
  if (base_total == 0) throw Error("kstep_ratio: zero-byte baseline ledger");
  KStepRatios r;
  r.dense_bytes =
      base_dense == 0
          ? 0.0
          : static_cast<double>(kstep.bytes(TransferCategory::DenseMerge)) /
                static_cast<double>(base_dense);
  r.total_bytes = static_cast<double>(kstep.total_bytes()) /
                  static_cast<double>(base_total);
  return r;
}

double two_phase_ratio(const TopologyGraph& g, const WorkloadMatrix& workload,
                       TimingModel model) {
  double planned = 0.0, naive = 0.0;
  bool any = false;
  for (const auto& [pair, bytes] : workload) {
    if (bytes == 0) continue;
    any = true;
    const DeviceId src{DeviceKind::Gpu, pair.first};
    const DeviceId dst{DeviceKind::Gpu, pair.second};
    planned += transfer_time(plan_route(g, src, dst), bytes, model);
    naive += transfer_time(naive_route(g, src, dst), bytes, model);
  }
  if (!any || naive == 0.0) return 1.0;  // zero workload, by convention
  return planned / naive;
}

CommLedger schedule_ledger(std::uint64_t steps, std::uint64_t k,
                           std::uint64_t workers,
                           std::uint64_t dense_bytes_per_tx,
                           std::uint64_t sparse_bytes_per_tx) {
  if (k == 0 || workers == 0) throw Error("schedule_ledger: k and workers must be >= 1");
  CommLedger ledger;
  for (std::uint64_t t = 1; t <= steps; ++t) {
    for (std::uint64_t w = 0; w < workers; ++w) {
      if (sparse_bytes_per_tx > 0)
        ledger.record({TransferCategory::SparseSync, sparse_bytes_per_tx,
                       std::nullopt, 0.0});
      if (t % k == 0)
        ledger.record({TransferCategory::DenseMerge, dense_bytes_per_tx,
                       std::nullopt, 0.0});
    }
  }
  return ledger;
}

}  // namespace kpsim
