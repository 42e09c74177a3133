#pragma once

#include <optional>
#include <set>

#include "kpsim/data.hpp"
#include "kpsim/eval.hpp"
#include "kpsim/ledger.hpp"
#include "kpsim/model.hpp"
#include "kpsim/optimizer.hpp"
#include "kpsim/store.hpp"

namespace kpsim {

// Order-preserving partition of a batch into per-worker minibatch lists.
// All n_workers * n_minibatch cells differ in size by at most one and their
// concatenation equals the input.
std::vector<std::vector<std::vector<Instance>>> shard_batch(
    const Batch& b, std::size_t n_workers, std::size_t n_minibatch);

struct TrainerConfig {
  std::uint64_t seed = 42;
  std::size_t n_workers = 4;
  std::uint64_t minibatch_size = 128;
  double sparse_lr = 0.05;
  AdamHyper adam;
  ModelConfig model;
  // communication cost model
  double internode_bandwidth = 1e9;  // bytes/s, dense merge + sparse sync
  double internode_latency = 1e-4;   // s per transmission
  double cold_io_bandwidth = 2e9;    // bytes/s, cold tier reads/writes
  bool dense_round_trip = true;      // merge counts upload + broadcast
  TimingModel timing = TimingModel::StoreAndForward;
};

struct BatchRecord {
  std::uint64_t batch = 0;
  std::size_t instances = 0;
  double loss = 0.0;                     // training loss (mean bce)
  std::optional<double> auc;             // predict-then-train, this batch
  std::optional<double> cumulative_auc;  // pooled over the stream so far
};

struct StageSeconds {
  double pull = 0.0;
  double train = 0.0;
  double evict = 0.0;
  double predict = 0.0;
};

struct TrainMetrics {
  std::vector<BatchRecord> batches;
  std::optional<double> cumulative_auc;
  std::uint64_t minibatch_steps = 0;
  std::uint64_t merge_events = 0;
  StageSeconds wall_clock;

  std::string to_jsonl() const;  // one record per batch, no wall clock
};

// Executes the data-parallel workflow per batch: pull the working set, shard
// across simulated workers, per-minibatch forward/backward, k-step Adam on
// the dense block, averaged AdaGrad on sparse embeddings, eviction, and
// transfer accounting. Workers run on a fixed sequential schedule, so results
// are deterministic for a given (seed, config).
class Trainer {
 public:
  Trainer(const TrainerConfig& config, TieredStore& store,
          const TopologyGraph* topology);

  // Algorithm workflow only (no evaluation).
  BatchRecord train_batch(const Batch& b);
  // Predict-then-train over a stream: each batch is scored by the current
  // model before it updates anything.
  TrainMetrics online_eval(std::span<const Batch> stream);

  const TrainMetrics& metrics() const { return metrics_; }
  const CommLedger& ledger() const { return ledger_; }
  const Trajectory& dense_trajectory() const { return trajectory_; }
  const WorkloadMatrix& pull_workload() const { return pull_workload_; }
  const WorkloadMatrix& push_workload() const { return push_workload_; }
  std::vector<double> dense_model() const { return engine_.x_bar(); }
  const KStepEngine& engine() const { return engine_; }
  const CtrModel& model() const { return model_; }

 private:
  BatchRecord process_batch(const Batch& b, bool predict_first);
  void account_gpu_traffic(const std::set<ParameterKey>& keys,
                           std::size_t worker);
  void account_merge();

  TrainerConfig config_;
  TieredStore& store_;
  const TopologyGraph* topology_;
  CtrModel model_;
  KStepEngine engine_;
  CommPlan plan_;
  std::vector<std::uint32_t> gpu_of_worker_;
  CommLedger ledger_;
  WorkloadMatrix pull_workload_;
  WorkloadMatrix push_workload_;
  Trajectory trajectory_;
  TrainMetrics metrics_;
  AucAccumulator cumulative_;
  std::uint64_t cold_written_seen_ = 0;
};

}  // namespace kpsim
