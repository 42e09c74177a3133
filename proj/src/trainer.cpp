#include "kpsim/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace kpsim {

namespace {

class StageTimer {
 public:
  explicit StageTimer(double& sink)
      : sink_(sink), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    sink_ += std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                           start_)
                 .count();
  }

 private:
  double& sink_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

std::vector<std::vector<std::vector<Instance>>> shard_batch(
    const Batch& b, std::size_t n_workers, std::size_t n_minibatch) {
  if (b.instances.empty()) throw Error("shard_batch: empty batch");
  if (n_workers < 1 || n_minibatch < 1)
    throw Error("shard_batch: workers and minibatch count must be >= 1");
  const std::size_t cells = n_workers * n_minibatch;
  const std::size_t n = b.instances.size();
  const std::size_t base = n / cells;
  const std::size_t extra = n % cells;

  std::vector<std::vector<std::vector<Instance>>> out(
      n_workers, std::vector<std::vector<Instance>>(n_minibatch));
  std::size_t cursor = 0;
  for (std::size_t c = 0; c < cells; ++c) {
    const std::size_t len = base + (c < extra ? 1 : 0);
    auto& cell = out[c / n_minibatch][c % n_minibatch];
    cell.assign(b.instances.begin() + static_cast<std::ptrdiff_t>(cursor),
                b.instances.begin() + static_cast<std::ptrdiff_t>(cursor + len));
    cursor += len;
  }
  return out;
}

Trainer::Trainer(const TrainerConfig& config, TieredStore& store,
                 const TopologyGraph* topology)
    : config_(config),
      store_(store),
      topology_(topology),
      model_(config.model),
      engine_(config.adam, config.n_workers,
              model_.init_dense(config.seed)) {
  if (store_.embedding_dim() != config_.model.embedding_dim)
    throw Error("trainer: store embedding_dim != model embedding_dim");
  if (topology_) {
    plan_ = plan_all_pairs(*topology_);
    const auto& gpus = topology_->accelerators();
    if (gpus.empty()) throw Error("trainer: topology has no accelerators");
    for (std::size_t w = 0; w < config_.n_workers; ++w)
      gpu_of_worker_.push_back(gpus[w % gpus.size()]);
  }
  trajectory_.dim = engine_.dim();
  trajectory_.workers = config_.n_workers;
}

void Trainer::account_gpu_traffic(const std::set<ParameterKey>& keys,
                                  std::size_t worker) {
  if (!topology_) return;
  const std::uint32_t here = gpu_of_worker_[worker];
  const auto& gpus = topology_->accelerators();
  std::map<std::uint32_t, std::uint64_t> owned;  // owner gpu -> key count
  for (ParameterKey key : keys) {
    const std::uint32_t owner = gpus[key % gpus.size()];
    if (owner != here) owned[owner] += 1;
  }
  const std::uint64_t entry_bytes = 8ull * store_.embedding_dim();
  for (const auto& [owner, count] : owned) {
    const std::uint64_t bytes = count * entry_bytes;
    const Route& pull = plan_.route(owner, here);
    ledger_.record({TransferCategory::GpuPull, bytes, pull.mode,
                    transfer_time(pull, bytes, config_.timing)});
    pull_workload_[{owner, here}] += bytes;
    const Route& push = plan_.route(here, owner);
    ledger_.record({TransferCategory::GpuPush, bytes, push.mode,
                    transfer_time(push, bytes, config_.timing)});
    push_workload_[{here, owner}] += bytes;
  }
}

void Trainer::account_merge() {
  const std::uint64_t model_bytes = 8ull * engine_.dim();
  const std::uint64_t bytes = config_.dense_round_trip ? 2 * model_bytes
                                                       : model_bytes;
  for (std::size_t w = 0; w < config_.n_workers; ++w)
    ledger_.record({TransferCategory::DenseMerge, bytes, std::nullopt,
                    config_.internode_latency +
                        static_cast<double>(bytes) /
                            config_.internode_bandwidth});
}

BatchRecord Trainer::train_batch(const Batch& b) {
  return process_batch(b, false);
}

BatchRecord Trainer::process_batch(const Batch& b, bool predict_first) {
  if (b.instances.empty()) throw Error("train_batch: empty batch");
  BatchRecord rec;
  rec.batch = b.id;
  rec.instances = b.instances.size();

  // working set = union of the batch's feature ids
  std::set<ParameterKey> keys;
  for (const auto& inst : b.instances)
    keys.insert(inst.feature_ids.begin(), inst.feature_ids.end());

  PullStats pull_stats;
  {
    StageTimer timer(metrics_.wall_clock.pull);
    store_.pull_batch(keys, pull_stats);
  }
  if (pull_stats.cold_bytes_read > 0)
    ledger_.record({TransferCategory::ColdTierIo, pull_stats.cold_bytes_read,
                    std::nullopt,
                    static_cast<double>(pull_stats.cold_bytes_read) /
                        config_.cold_io_bandwidth});

  const EmbeddingSource embeddings = [this](ParameterKey key) {
    return std::span<const double>(store_.lookup(key).weights);
  };

  if (predict_first) {
    StageTimer timer(metrics_.wall_clock.predict);
    const auto dense = engine_.x_bar();
    const auto fwd = model_.forward(dense, embeddings, b.instances);
    std::vector<int> labels;
    labels.reserve(b.instances.size());
    for (const auto& inst : b.instances) labels.push_back(inst.label);
    rec.auc = compute_auc(fwd.predictions, labels);
    cumulative_.add(fwd.predictions, labels);
    rec.cumulative_auc = cumulative_.value();
  }

  const std::size_t n_minibatch = std::max<std::size_t>(
      1, (b.instances.size() + config_.n_workers * config_.minibatch_size - 1) /
             (config_.n_workers * config_.minibatch_size));
  const auto shards = shard_batch(b, config_.n_workers, n_minibatch);

  StageTimer timer(metrics_.wall_clock.train);
  const std::size_t n_workers = config_.n_workers;
  std::vector<std::vector<double>> dense_grads(
      n_workers, std::vector<double>(engine_.dim()));
  for (std::size_t j = 0; j < n_minibatch; ++j) {
    std::map<ParameterKey, std::vector<double>> sparse_sum;
    double loss_sum = 0.0;
    std::size_t loss_count = 0;

    // all workers compute on the pre-step parameters before any update
    for (std::size_t i = 0; i < n_workers; ++i) {
      const auto& mb = shards[i][j];
      if (mb.empty()) {
        std::fill(dense_grads[i].begin(), dense_grads[i].end(), 0.0);
        continue;
      }
      const auto fwd = model_.forward(engine_.states()[i].x, embeddings, mb);
      auto bwd = model_.backward(engine_.states()[i].x, fwd);
      dense_grads[i] = std::move(bwd.dense_grad);
      loss_sum += bwd.loss * static_cast<double>(mb.size());
      loss_count += mb.size();

      std::set<ParameterKey> mb_keys;
      for (const auto& [key, grad] : bwd.sparse_grads) {
        mb_keys.insert(key);
        auto [it, inserted] = sparse_sum.try_emplace(
            key, std::vector<double>(store_.embedding_dim(), 0.0));
        for (std::size_t c = 0; c < grad.size(); ++c) it->second[c] += grad[c];
      }
      account_gpu_traffic(mb_keys, i);
      ledger_.record(
          {TransferCategory::SparseSync,
           mb_keys.size() * 8ull * store_.embedding_dim(), std::nullopt,
           config_.internode_latency +
               static_cast<double>(mb_keys.size() * 8ull *
                                   store_.embedding_dim()) /
                   config_.internode_bandwidth});
    }
    // workers with no instances still transmit their (empty) contribution
    for (std::size_t i = 0; i < n_workers; ++i)
      if (shards[i][j].empty())
        ledger_.record({TransferCategory::SparseSync, 0, std::nullopt,
                        config_.internode_latency});

    // averaged sparse update, fixed ascending key order
    if (!sparse_sum.empty()) {
      const double inv_n = 1.0 / static_cast<double>(n_workers);
      for (auto& [key, grad] : sparse_sum)
        for (auto& g : grad) g *= inv_n;
      store_.push_updates(sparse_sum, config_.sparse_lr);
    }

    const auto info = engine_.step(dense_grads);
    if (info.merged) {
      metrics_.merge_events += 1;
      account_merge();
    }
    metrics_.minibatch_steps += 1;

    StepRecord step;
    step.step = engine_.completed_steps();
    step.merged = info.merged;
    step.a3_increment = info.a3_increment;
    step.loss = loss_count > 0
                    ? loss_sum / static_cast<double>(loss_count)
                    : std::numeric_limits<double>::quiet_NaN();
    step.metric = std::numeric_limits<double>::quiet_NaN();
    step.x_bar = engine_.x_bar();
    step.v_bar = engine_.frozen_v();
    trajectory_.steps.push_back(std::move(step));
  }

  // mean training loss across this batch's minibatch steps
  {
    double total = 0.0;
    std::size_t count = 0;
    const std::size_t first = trajectory_.steps.size() - n_minibatch;
    for (std::size_t s = first; s < trajectory_.steps.size(); ++s) {
      if (std::isfinite(trajectory_.steps[s].loss)) {
        total += trajectory_.steps[s].loss;
        ++count;
      }
    }
    rec.loss = count > 0 ? total / static_cast<double>(count)
                         : std::numeric_limits<double>::quiet_NaN();
  }

  {
    StageTimer evict_timer(metrics_.wall_clock.evict);
    store_.evict();
  }
  const std::uint64_t written = store_.cold_bytes_written();
  if (written > cold_written_seen_) {
    const std::uint64_t delta = written - cold_written_seen_;
    ledger_.record({TransferCategory::ColdTierIo, delta, std::nullopt,
                    static_cast<double>(delta) / config_.cold_io_bandwidth});
    cold_written_seen_ = written;
  }

  metrics_.batches.push_back(rec);
  return rec;
}

TrainMetrics Trainer::online_eval(std::span<const Batch> stream) {
  for (const auto& b : stream) process_batch(b, true);
  metrics_.cumulative_auc = cumulative_.value();
  return metrics_;
}

std::string TrainMetrics::to_jsonl() const {
  std::ostringstream out;
  for (const auto& b : batches) {
    nlohmann::json j;
    j["batch"] = b.batch;
    j["instances"] = b.instances;
    j["loss"] = b.loss;
    j["auc"] = b.auc ? nlohmann::json(*b.auc) : nlohmann::json();
    j["auc_cumulative"] =
        b.cumulative_auc ? nlohmann::json(*b.cumulative_auc) : nlohmann::json();
    out << j.dump() << "\n";
  }
  return out.str();
}

}  // namespace kpsim
