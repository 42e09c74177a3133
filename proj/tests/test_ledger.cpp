#include <random>

#include "doctest.h"
#include "kpsim/ledger.hpp"

using namespace kpsim;

TEST_CASE("record keeps integer totals") {
  CommLedger ledger;
  ledger.record({TransferCategory::GpuPull, 0, RouteMode::Direct, 0.0});
  CHECK(ledger.count(TransferCategory::GpuPull) == 1);
  CHECK(ledger.bytes(TransferCategory::GpuPull) == 0);

  for (int i = 0; i < 3; ++i)
    ledger.record({TransferCategory::SparseSync, 10, std::nullopt, 0.5});
  CHECK(ledger.bytes(TransferCategory::SparseSync) == 30);
  CHECK(ledger.count(TransferCategory::SparseSync) == 3);
}

TEST_CASE("fuzzed totals match an independent fold and ignore order") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> cat(0, 4);
  std::uniform_int_distribution<std::uint64_t> bytes(0, 1 << 16);
  std::uniform_real_distribution<double> time(0.0, 1e-3);

  std::vector<TransferRecord> records;
  for (int i = 0; i < 100000; ++i)
    records.push_back({static_cast<TransferCategory>(cat(rng)), bytes(rng),
                       std::nullopt, time(rng)});

  CommLedger forward, backward;
  for (const auto& r : records) forward.record(r);
  for (auto it = records.rbegin(); it != records.rend(); ++it)
    backward.record(*it);

  // independent fold
  std::map<TransferCategory, std::uint64_t> byte_sum;
  std::map<TransferCategory, std::uint64_t> count_sum;
  for (const auto& r : records) {
    byte_sum[r.category] += r.bytes;
    count_sum[r.category] += 1;
  }
  const auto rep_f = forward.report();
  const auto rep_b = backward.report();
  for (const auto& [c, t] : rep_f.categories) {
    CHECK(t.bytes == byte_sum[c]);
    CHECK(t.count == count_sum[c]);
  }
  CHECK(rep_f == rep_b);  // totals invariant under record reordering
}

TEST_CASE("kstep byte ratios") {
  // T=100 steps, dense size D per transmission, sparse share S=4D per step
  const std::uint64_t D = 1288;  // 161 doubles
  const std::uint64_t S = 4 * D;
  const std::uint64_t T = 100, N = 4;
  const auto baseline = schedule_ledger(T, 1, N, D, S);

  SUBCASE("dense-only ratio is floor(T/k)/T") {
    for (std::uint64_t k : {10ull, 20ull, 50ull, 100ull}) {
      const auto led = schedule_ledger(T, k, N, D, S);
      CHECK(led.count(TransferCategory::DenseMerge) == (T / k) * N);
      const auto r = kstep_ratio(led, baseline);
      CHECK(r.dense_bytes ==
            doctest::Approx(static_cast<double>(T / k) / T).epsilon(1e-15));
    }
  }
  SUBCASE("total ratio matches the closed form with S=4D") {
    const auto led = schedule_ledger(T, 10, N, D, S);
    const auto r = kstep_ratio(led, baseline);
    // (0.1 D + S) / (D + S) = 4.1 / 5
    CHECK(r.total_bytes == doctest::Approx(0.82).epsilon(1e-13));
  }
  SUBCASE("total ratio decreases monotonically in k") {
    double prev = 2.0;
    for (std::uint64_t k : {10ull, 20ull, 50ull, 100ull, 200ull}) {
      const auto r = kstep_ratio(schedule_ledger(T, k, N, D, S), baseline);
      CHECK(r.total_bytes < prev);
      prev = r.total_bytes;
    }
  }
  SUBCASE("zero-byte baseline is an error") {
    CommLedger empty;
    CHECK_THROWS_AS(kstep_ratio(baseline, empty), Error);
  }
}

TEST_CASE("two_phase_ratio") {
  const auto g = build_topology(example_topology_document());

  SUBCASE("all-zero workload returns the 1.0 convention") {
    WorkloadMatrix w;
    w[{0, 5}] = 0;
    CHECK(two_phase_ratio(g, w) == 1.0);
    CHECK(two_phase_ratio(g, {}) == 1.0);
  }
  SUBCASE("uniform workload matches the per-pair summation oracle") {
    WorkloadMatrix w;
    for (std::uint32_t a : g.accelerators())
      for (std::uint32_t b : g.accelerators())
        if (a != b) w[{a, b}] = 1 << 20;
    double planned = 0.0, naive = 0.0;
    for (const auto& [pair, bytes] : w) {
      const DeviceId a{DeviceKind::Gpu, pair.first};
      const DeviceId b{DeviceKind::Gpu, pair.second};
      planned += transfer_time(plan_route(g, a, b), bytes);
      naive += transfer_time(naive_route(g, a, b), bytes);
    }
    const double ratio = two_phase_ratio(g, w);
    CHECK(ratio == doctest::Approx(planned / naive).epsilon(1e-14));
    CHECK(ratio < 1.0);
  }
  SUBCASE("nvlink-linked pairs strictly beat the host path") {
    WorkloadMatrix w;
    w[{0, 2}] = 4096;  // direct double bridge
    CHECK(two_phase_ratio(g, w) < 1.0);
  }
}

TEST_CASE("report round-trips through json and adds under merge") {
  CommLedger a, b;
  a.record({TransferCategory::GpuPull, 100, RouteMode::TwoPhase, 1e-5});
  a.record({TransferCategory::DenseMerge, 200, std::nullopt, 2e-4});
  b.record({TransferCategory::GpuPull, 50, RouteMode::Direct, 5e-6});

  SUBCASE("empty ledger reports zeros") {
    const auto rep = CommLedger().report();
    CHECK(rep.total.bytes == 0);
    CHECK(rep.total.count == 0);
    CHECK(rep.total.modeled_time == 0.0);
  }
  SUBCASE("merge adds reports") {
    CommLedger merged = a;
    merged.append(b);
    const auto rep = merged.report();
    CHECK(rep.total.bytes == 350);
    CHECK(rep.total.count == 3);
    CHECK(rep.categories.at(TransferCategory::GpuPull).bytes == 150);
  }
  SUBCASE("json round trip") {
    auto rep = a.report();
    rep.vs_baseline = KStepRatios{0.1, 0.82};
    rep.two_phase_time_ratio = 0.05;
    const auto back = LedgerReport::from_json(rep.to_json());
    CHECK(back == rep);
  }
}
