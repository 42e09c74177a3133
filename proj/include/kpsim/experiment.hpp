#pragma once

#include <iosfwd>

#include "kpsim/config.hpp"
#include "kpsim/diagnostics.hpp"

namespace kpsim {

// Outcome of one experiment run; the files listed were written under the
// run's output directory (trajectory.jsonl, metrics.jsonl, ledger.json,
// summary.json).
struct RunResult {
  std::string out_dir;
  std::optional<double> cumulative_auc;
  std::uint64_t merge_events = 0;
  std::uint64_t minibatch_steps = 0;
  LedgerReport ledger;
  std::optional<double> final_metric_avg;  // benchmark mode
  std::optional<AssumptionProfile> assumptions;  // benchmark mode
};

// Wires topology + store + optimizer + trainer + ledger and executes one
// experiment. `log` (optional) receives one progress line per batch group.
RunResult run_experiment(const ExperimentConfig& config, std::ostream* log);

struct SweepEntry {
  std::uint64_t k = 0;
  std::optional<double> cumulative_auc;
  std::optional<double> final_metric_avg;
  std::uint64_t dense_merge_bytes = 0;
  std::uint64_t total_bytes = 0;
  double dense_ratio_vs_k1 = 1.0;
  double total_ratio_vs_k1 = 1.0;
};

// Runs the experiment for every k in config.sweep_ks (k=1 is added as the
// baseline when missing); per-k outputs land in out/k_<k>/ and the combined
// ratio table in out/sweep_summary.json.
std::vector<SweepEntry> sweep_k(const ExperimentConfig& config,
                                std::ostream* log);

// All-pairs planned vs host-routed comparison on the configured topology;
// writes out/route_report.json and returns the uniform-workload time ratio.
double route_compare(const ExperimentConfig& config, std::uint64_t bytes,
                     std::ostream* log);

const std::string& output_schema_version();

}  // namespace kpsim
