#include "kpsim/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "json.hpp"

namespace kpsim {

namespace fs = std::filesystem;
using nlohmann::json;

const std::string& output_schema_version() {
  static const std::string v = "kpsim.run.v1";
  return v;
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

TopologyGraph resolve_topology(const ExperimentConfig& config) {
  if (config.topology_path.empty())
    return build_topology(example_topology_document());
  return load_topology(config.topology_path);
}

std::vector<Batch> resolve_stream(const ExperimentConfig& config) {
  std::vector<Batch> stream;
  if (config.source == DataSource::Synthetic) {
    SyntheticSpec spec;
    spec.seed = config.seed;
    spec.n_instances = config.instances;
    spec.vocab = config.model.vocab;
    spec.nnz_mean = config.nnz_mean;
    spec.signal_scale = config.signal_scale;
    stream = generate_synthetic_ctr(spec, config.batch_size);
  } else {
    stream = make_batches(read_instances(config.data_path), config.batch_size);
  }
  if (config.max_batches > 0 && stream.size() > config.max_batches)
    stream.resize(config.max_batches);
  return stream;
}

json stage_json(const StageSeconds& s) {
  return {{"pull", s.pull},
          {"train", s.train},
          {"evict", s.evict},
          {"predict", s.predict}};
}

RunResult run_ctr(const ExperimentConfig& config, const fs::path& out,
                  std::ostream* log) {
  const TopologyGraph topo = resolve_topology(config);
  TierConfig tier;
  tier.cache_capacity = config.cache_capacity;
  tier.cold_path = (out / "cold").string();
  TieredStore store(tier, config.model.embedding_dim);
  Trainer trainer(config.trainer_config(), store, &topo);

  const auto stream = resolve_stream(config);
  if (stream.empty()) throw Error("empty training stream");
  if (log)
    *log << "training " << stream.size() << " batches, k=" << config.adam.k
         << ", workers=" << config.workers << "\n";
  const TrainMetrics metrics = trainer.online_eval(stream);

  LedgerReport report = trainer.ledger().report();
  WorkloadMatrix workload = trainer.pull_workload();
  for (const auto& [pair, bytes] : trainer.push_workload())
    workload[pair] += bytes;
  report.two_phase_time_ratio =
      two_phase_ratio(topo, workload,
                      config.pipelined_timing ? TimingModel::Pipelined
                                              : TimingModel::StoreAndForward);

  write_file(out / "trajectory.jsonl",
             "{\"schema\":\"kpsim.trajectory.v1\"}\n" +
                 trainer.dense_trajectory().to_jsonl());
  write_file(out / "metrics.jsonl",
             "{\"schema\":\"kpsim.metrics.v1\"}\n" + metrics.to_jsonl());
  write_file(out / "ledger.json", report.to_json());

  json summary;
  summary["schema"] = output_schema_version();
  summary["config"] = json::parse(config.to_json());
  summary["instances"] =
      config.batch_size * (stream.size() - 1) + stream.back().instances.size();
  summary["batches"] = stream.size();
  summary["minibatch_steps"] = metrics.minibatch_steps;
  summary["merge_events"] = metrics.merge_events;
  summary["cumulative_auc"] = metrics.cumulative_auc
                                  ? json(*metrics.cumulative_auc)
                                  : json();
  summary["wall_clock_seconds"] = stage_json(metrics.wall_clock);
  write_file(out / "summary.json", summary.dump(2));

  RunResult result;
  result.out_dir = out.string();
  result.cumulative_auc = metrics.cumulative_auc;
  result.merge_events = metrics.merge_events;
  result.minibatch_steps = metrics.minibatch_steps;
  result.ledger = report;
  if (log && metrics.cumulative_auc)
    *log << "cumulative auc " << *metrics.cumulative_auc << "\n";
  return result;
}

RunResult run_benchmark(const ExperimentConfig& config, const fs::path& out,
                        std::ostream* log) {
  const auto oracle = make_benchmark_oracle(config.benchmark_dim, config.seed,
                                            config.benchmark_noise);
  const std::vector<double> x0(config.benchmark_dim, 0.0);
  if (log)
    *log << "benchmark run: d=" << config.benchmark_dim
         << " T=" << config.benchmark_steps << " k=" << config.adam.k << "\n";
  const Trajectory traj =
      run_kstep_adam(oracle, config.adam, config.workers,
                     config.benchmark_steps, x0, config.seed);
  const MetricCurve curve = convergence_metric(traj, oracle);
  const AssumptionProfile prof = estimate_assumptions(oracle, traj, 16,
                                                      config.seed);

  // dense-merge accounting for the pure-optimizer run
  CommLedger ledger = schedule_ledger(
      config.benchmark_steps, config.adam.k, config.workers,
      (config.dense_round_trip ? 2ull : 1ull) * 8ull * config.benchmark_dim,
      0);
  LedgerReport report = ledger.report();

  write_file(out / "trajectory.jsonl",
             "{\"schema\":\"kpsim.trajectory.v1\"}\n" + traj.to_jsonl());
  std::uint64_t merges = 0;
  for (const auto& s : traj.steps) merges += s.merged ? 1 : 0;

  json mrec;
  mrec["steps"] = traj.steps.size();
  mrec["final_loss"] = traj.steps.back().loss;
  mrec["final_metric_avg"] = curve.running_average.back();
  write_file(out / "metrics.jsonl",
             "{\"schema\":\"kpsim.metrics.v1\"}\n" + mrec.dump() + "\n");
  write_file(out / "ledger.json", report.to_json());

  json summary;
  summary["schema"] = output_schema_version();
  summary["config"] = json::parse(config.to_json());
  summary["merge_events"] = merges;
  summary["final_metric_avg"] = curve.running_average.back();
  summary["assumptions"] = {{"g_hat", prof.g_hat},
                            {"sigma2_hat", prof.sigma2_hat},
                            {"l_hat", prof.l_hat},
                            {"m_fit", prof.m_fit},
                            {"gamma_fit", prof.gamma_fit}};
  write_file(out / "summary.json", summary.dump(2));

  RunResult result;
  result.out_dir = out.string();
  result.merge_events = merges;
  result.minibatch_steps = traj.steps.size();
  result.ledger = report;
  result.final_metric_avg = curve.running_average.back();
  result.assumptions = prof;
  if (log)
    *log << "final running-average metric " << curve.running_average.back()
         << ", gamma_fit " << prof.gamma_fit << "\n";
  return result;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, std::ostream* log) {
  const auto diags = config.validate();
  if (!diags.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& d : diags) msg += "\n  " + d;
    throw ConfigError(msg);
  }
  const fs::path out(config.out_dir);
  fs::create_directories(out);
  if (config.source == DataSource::Benchmark)
    return run_benchmark(config, out, log);
  return run_ctr(config, out, log);
}

std::vector<SweepEntry> sweep_k(const ExperimentConfig& config,
                                std::ostream* log) {
  std::vector<std::uint64_t> ks = config.sweep_ks;
  if (std::find(ks.begin(), ks.end(), 1ull) == ks.end())
    ks.insert(ks.begin(), 1ull);  // ratios need the k=1 baseline
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

  const fs::path out(config.out_dir);
  fs::create_directories(out);

  std::vector<SweepEntry> entries;
  std::uint64_t base_dense = 0, base_total = 0;
  for (std::uint64_t k : ks) {
    ExperimentConfig sub = config;
    sub.adam.k = k;
    sub.out_dir = (out / ("k_" + std::to_string(k))).string();
    const RunResult r = run_experiment(sub, log);

    SweepEntry e;
    e.k = k;
    e.cumulative_auc = r.cumulative_auc;
    e.final_metric_avg = r.final_metric_avg;
    auto it = r.ledger.categories.find(TransferCategory::DenseMerge);
    e.dense_merge_bytes = it == r.ledger.categories.end() ? 0 : it->second.bytes;
    e.total_bytes = r.ledger.total.bytes;
    if (k == 1) {
      base_dense = e.dense_merge_bytes;
      base_total = e.total_bytes;
    }
    if (base_dense > 0)
      e.dense_ratio_vs_k1 = static_cast<double>(e.dense_merge_bytes) /
                            static_cast<double>(base_dense);
    if (base_total > 0)
      e.total_ratio_vs_k1 =
          static_cast<double>(e.total_bytes) / static_cast<double>(base_total);
    entries.push_back(e);
  }

  json table = json::array();
  for (const auto& e : entries) {
    json row;
    row["k"] = e.k;
    row["auc"] = e.cumulative_auc ? json(*e.cumulative_auc) : json();
    row["final_metric_avg"] =
        e.final_metric_avg ? json(*e.final_metric_avg) : json();
    row["dense_merge_bytes"] = e.dense_merge_bytes;
    row["total_bytes"] = e.total_bytes;
    row["dense_ratio_vs_k1"] = e.dense_ratio_vs_k1;
    row["total_ratio_vs_k1"] = e.total_ratio_vs_k1;
    table.push_back(row);
  }
  json summary;
  summary["schema"] = "kpsim.sweep.v1";
  summary["ks"] = ks;
  summary["table"] = table;
  write_file(out / "sweep_summary.json", summary.dump(2));
  if (log) *log << "sweep table written to " << (out / "sweep_summary.json")
                << "\n";
  return entries;
}

double route_compare(const ExperimentConfig& config, std::uint64_t bytes,
                     std::ostream* log) {
  const TopologyGraph topo = resolve_topology(config);
  const fs::path out(config.out_dir);
  fs::create_directories(out);
  const TimingModel model = config.pipelined_timing
                                ? TimingModel::Pipelined
                                : TimingModel::StoreAndForward;

  WorkloadMatrix workload;
  json pairs = json::array();
  for (std::uint32_t a : topo.accelerators()) {
    for (std::uint32_t b : topo.accelerators()) {
      if (a == b) continue;
      workload[{a, b}] = bytes;
      const Route planned = plan_route(topo, {DeviceKind::Gpu, a},
                                       {DeviceKind::Gpu, b});
      const Route naive = naive_route(topo, {DeviceKind::Gpu, a},
                                      {DeviceKind::Gpu, b});
      json row;
      row["src"] = a;
      row["dst"] = b;
      row["mode"] = to_string(planned.mode);
      json hops = json::array();
      for (const auto& h : planned.hops) hops.push_back(to_string(h));
      row["hops"] = hops;
      row["planned_time"] = transfer_time(planned, bytes, model);
      row["naive_time"] = transfer_time(naive, bytes, model);
      pairs.push_back(row);
    }
  }
  const double ratio = two_phase_ratio(topo, workload, model);

  json report;
  report["schema"] = "kpsim.routes.v1";
  report["bytes_per_pair"] = bytes;
  report["timing"] = config.pipelined_timing ? "pipelined" : "store_and_forward";
  report["two_phase_time_ratio"] = ratio;
  report["pairs"] = pairs;
  write_file(out / "route_report.json", report.dump(2));
  if (log)
    *log << "two-phase/naive modeled time ratio: " << ratio << "\n";
  return ratio;
}

}  // namespace kpsim
