#include "kpsim/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace kpsim {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(DataSource s) {
  switch (s) {
    case DataSource::Synthetic: return "synthetic";
    case DataSource::File: return "file";
    case DataSource::Benchmark: return "benchmark";
  }
  return "?";
}

static DataSource source_from_string(const std::string& s) {
  if (s == "synthetic") return DataSource::Synthetic;
  if (s == "file") return DataSource::File;
  if (s == "benchmark") return DataSource::Benchmark;
  throw ConfigError("unknown data source '" + s +
                    "' (synthetic|file|benchmark)");
}

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.adam.k = 8;
  // cold-start calibration needs a hotter head than the library defaults;
  // the sparse embeddings carry the representation and sync every step
  c.adam.alpha = 0.11;
  c.model.hidden = {};
  return c;
}

namespace {

// pulls a field and marks it consumed so unknown keys can be reported
template <typename T>
void take(const json& j, std::set<std::string>& seen, const char* key,
          T& out) {
  if (j.contains(key)) {
    seen.insert(key);
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("config field '") + key +
                        "' has the wrong type");
    }
  }
}

void reject_unknown(const json& j, const std::set<std::string>& seen,
                    const std::string& scope) {
  for (const auto& [key, value] : j.items())
    if (!seen.count(key))
      throw ConfigError("unknown config field '" + scope + key + "'");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid json: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a json object");

  ExperimentConfig c = defaults();
  std::set<std::string> seen;
  take(j, seen, "seed", c.seed);
  take(j, seen, "workers", c.workers);
  take(j, seen, "batch_size", c.batch_size);
  take(j, seen, "minibatch_size", c.minibatch_size);
  take(j, seen, "max_batches", c.max_batches);
  take(j, seen, "sparse_lr", c.sparse_lr);
  take(j, seen, "cache_capacity", c.cache_capacity);
  take(j, seen, "out", c.out_dir);
  take(j, seen, "topology", c.topology_path);
  take(j, seen, "sweep_ks", c.sweep_ks);

  if (j.contains("adam")) {
    seen.insert("adam");
    const json& a = j["adam"];
    std::set<std::string> aseen;
    take(a, aseen, "alpha", c.adam.alpha);
    take(a, aseen, "beta1", c.adam.beta1);
    take(a, aseen, "beta2", c.adam.beta2);
    take(a, aseen, "epsilon", c.adam.epsilon);
    take(a, aseen, "k", c.adam.k);
    take(a, aseen, "reset_local_v", c.adam.reset_local_v);
    reject_unknown(a, aseen, "adam.");
  }
  if (j.contains("model")) {
    seen.insert("model");
    const json& m = j["model"];
    std::set<std::string> mseen;
    take(m, mseen, "vocab", c.model.vocab);
    take(m, mseen, "embedding_dim", c.model.embedding_dim);
    take(m, mseen, "hidden", c.model.hidden);
    std::string act = to_string(c.model.activation);
    std::string pool = to_string(c.model.pooling);
    take(m, mseen, "activation", act);
    take(m, mseen, "pooling", pool);
    c.model.activation = activation_from_string(act);
    c.model.pooling = pooling_from_string(pool);
    reject_unknown(m, mseen, "model.");
  }
  if (j.contains("data")) {
    seen.insert("data");
    const json& d = j["data"];
    std::set<std::string> dseen;
    std::string source = to_string(c.source);
    take(d, dseen, "source", source);
    c.source = source_from_string(source);
    take(d, dseen, "instances", c.instances);
    take(d, dseen, "nnz_mean", c.nnz_mean);
    take(d, dseen, "signal_scale", c.signal_scale);
    take(d, dseen, "path", c.data_path);
    reject_unknown(d, dseen, "data.");
  }
  if (j.contains("benchmark")) {
    seen.insert("benchmark");
    const json& b = j["benchmark"];
    std::set<std::string> bseen;
    take(b, bseen, "dim", c.benchmark_dim);
    take(b, bseen, "steps", c.benchmark_steps);
    take(b, bseen, "noise", c.benchmark_noise);
    reject_unknown(b, bseen, "benchmark.");
  }
  if (j.contains("comm")) {
    seen.insert("comm");
    const json& m = j["comm"];
    std::set<std::string> cseen;
    take(m, cseen, "internode_bandwidth", c.internode_bandwidth);
    take(m, cseen, "internode_latency", c.internode_latency);
    take(m, cseen, "cold_io_bandwidth", c.cold_io_bandwidth);
    take(m, cseen, "dense_round_trip", c.dense_round_trip);
    take(m, cseen, "pipelined_timing", c.pipelined_timing);
    reject_unknown(m, cseen, "comm.");
  }
  reject_unknown(j, seen, "");
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["workers"] = workers;
  j["adam"] = {{"alpha", adam.alpha},     {"beta1", adam.beta1},
               {"beta2", adam.beta2},     {"epsilon", adam.epsilon},
               {"k", adam.k},             {"reset_local_v", adam.reset_local_v}};
  j["model"] = {{"vocab", model.vocab},
                {"embedding_dim", model.embedding_dim},
                {"hidden", model.hidden},
                {"activation", to_string(model.activation)},
                {"pooling", to_string(model.pooling)}};
  j["data"] = {{"source", to_string(source)}, {"instances", instances},
               {"nnz_mean", nnz_mean},        {"signal_scale", signal_scale},
               {"path", data_path}};
  j["benchmark"] = {{"dim", benchmark_dim},
                    {"steps", benchmark_steps},
                    {"noise", benchmark_noise}};
  j["comm"] = {{"internode_bandwidth", internode_bandwidth},
               {"internode_latency", internode_latency},
               {"cold_io_bandwidth", cold_io_bandwidth},
               {"dense_round_trip", dense_round_trip},
               {"pipelined_timing", pipelined_timing}};
  j["batch_size"] = batch_size;
  j["minibatch_size"] = minibatch_size;
  j["max_batches"] = max_batches;
  j["sparse_lr"] = sparse_lr;
  j["cache_capacity"] = cache_capacity;
  j["topology"] = topology_path;
  j["out"] = out_dir;
  j["sweep_ks"] = sweep_ks;
  return j.dump(2);
}

std::vector<std::string> ExperimentConfig::validate() const {
  std::vector<std::string> diags;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) diags.push_back(msg);
  };
  check(workers >= 1, "workers: must be >= 1");
  check(adam.k >= 1, "adam.k: must be >= 1");
  check(adam.alpha > 0.0, "adam.alpha: must be > 0");
  check(adam.beta1 >= 0.0 && adam.beta1 < 1.0, "adam.beta1: must be in [0,1)");
  check(adam.beta2 >= 0.0 && adam.beta2 < 1.0, "adam.beta2: must be in [0,1)");
  check(adam.epsilon > 0.0, "adam.epsilon: must be > 0");
  check(model.vocab >= 1, "model.vocab: must be >= 1");
  check(model.embedding_dim >= 1, "model.embedding_dim: must be >= 1");
  for (std::size_t h : model.hidden)
    check(h >= 1, "model.hidden: widths must be >= 1");
  check(batch_size >= 1, "batch_size: must be >= 1");
  check(minibatch_size >= 1, "minibatch_size: must be >= 1");
  check(sparse_lr > 0.0, "sparse_lr: must be > 0");
  check(cache_capacity >= 1, "cache_capacity: must be >= 1");
  check(internode_bandwidth > 0.0, "comm.internode_bandwidth: must be > 0");
  check(internode_latency >= 0.0, "comm.internode_latency: must be >= 0");
  check(cold_io_bandwidth > 0.0, "comm.cold_io_bandwidth: must be > 0");
  if (source == DataSource::Synthetic) {
    check(instances >= 1, "data.instances: must be >= 1");
    check(nnz_mean >= 1.0 && nnz_mean <= static_cast<double>(model.vocab),
          "data.nnz_mean: must satisfy 1 <= nnz_mean <= model.vocab");
  }
  if (source == DataSource::File) {
    if (data_path.empty())
      diags.push_back("data.path: required when data.source is 'file'");
    else if (!fs::exists(data_path))
      diags.push_back("data.path: file not found: " + data_path);
  }
  if (source == DataSource::Benchmark) {
    check(benchmark_dim >= 1, "benchmark.dim: must be >= 1");
    check(benchmark_steps >= 1, "benchmark.steps: must be >= 1");
    check(benchmark_noise >= 0.0, "benchmark.noise: must be >= 0");
  }
  if (!topology_path.empty()) {
    if (!fs::exists(topology_path)) {
      diags.push_back("topology: file not found: " + topology_path);
    } else {
      std::ifstream in(topology_path);
      std::ostringstream ss;
      ss << in.rdbuf();
      for (const auto& d : lint_topology(ss.str()))
        diags.push_back("topology: line " + std::to_string(d.line) + ": " +
                        d.message);
    }
  }
  for (std::uint64_t k : sweep_ks)
    check(k >= 1, "sweep_ks: every k must be >= 1");
  return diags;
}

TrainerConfig ExperimentConfig::trainer_config() const {
  TrainerConfig t;
  t.seed = seed;
  t.n_workers = workers;
  t.minibatch_size = minibatch_size;
  t.sparse_lr = sparse_lr;
  t.adam = adam;
  t.model = model;
  t.internode_bandwidth = internode_bandwidth;
  t.internode_latency = internode_latency;
  t.cold_io_bandwidth = cold_io_bandwidth;
  t.dense_round_trip = dense_round_trip;
  t.timing = pipelined_timing ? TimingModel::Pipelined
                              : TimingModel::StoreAndForward;
  return t;
}

}  // namespace kpsim
