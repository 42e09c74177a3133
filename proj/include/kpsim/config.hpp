#pragma once

#include <string>
#include <vector>

#include "kpsim/trainer.hpp"

namespace kpsim {

enum class DataSource : std::uint8_t { Synthetic, File, Benchmark };
const char* to_string(DataSource s);

// Everything a run needs, with working defaults: an empty config document
// runs the desk benchmark (synthetic CTR stream, 4 workers, k=8). The
// benchmark hyperparameters are tuned so a cold-started run calibrates
// within the 1e5-instance stream; see defaults().
struct ExperimentConfig {
  std::uint64_t seed = 42;
  std::size_t workers = 4;
  AdamHyper adam;  // k lives here (default 8 for the desk benchmark)
  ModelConfig model;

  DataSource source = DataSource::Synthetic;
  std::uint64_t instances = 100000;
  double nnz_mean = 10.0;
  double signal_scale = 4.0;
  std::string data_path;  // when source == File
  std::uint64_t batch_size = 1024;
  std::uint64_t minibatch_size = 16;
  std::uint64_t max_batches = 0;  // 0 = whole stream

  double sparse_lr = 0.7;
  std::size_t cache_capacity = 65536;

  // benchmark-mode (pure optimizer) settings
  std::size_t benchmark_dim = 20;
  std::uint64_t benchmark_steps = 5000;
  double benchmark_noise = 0.5;

  std::string topology_path;  // empty = the built-in example node
  double internode_bandwidth = 1e9;
  double internode_latency = 1e-4;
  double cold_io_bandwidth = 2e9;
  bool dense_round_trip = true;
  bool pipelined_timing = false;

  std::string out_dir = "out";

  std::vector<std::uint64_t> sweep_ks = {1, 10, 20, 50, 100, 200};

  static ExperimentConfig defaults();
  // Parses the json document, rejecting unknown fields.
  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  std::string to_json() const;  // resolved config echo

  // Empty iff run() would pass its precondition checks. Never mutates state.
  std::vector<std::string> validate() const;

  TrainerConfig trainer_config() const;
};

}  // namespace kpsim
