#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kpsim/common.hpp"
#include "kpsim/store.hpp"

namespace kpsim {

// One sparse CTR record: the non-zero feature ids plus the click label.
struct Instance {
  std::vector<ParameterKey> feature_ids;  // deduplicated, non-empty
  int label = 0;                          // 0 or 1
};

struct Batch {
  std::vector<Instance> instances;
  std::uint64_t id = 0;
};

struct SyntheticSpec {
  std::uint64_t seed = 1;
  std::uint64_t n_instances = 100000;
  std::uint64_t vocab = 10000;
  double nnz_mean = 10.0;
  // planted logit = scale * sum of per-feature weights / sqrt(nnz_mean)
  double signal_scale = 4.0;
};

// Deterministic instance stream with labels drawn from a planted logistic
// model over per-feature weights, so better-than-chance AUC is achievable.
// nnz per instance ~ Poisson(nnz_mean) clamped to [1, vocab].
class SyntheticCtr {
 public:
  explicit SyntheticCtr(const SyntheticSpec& spec);

  Instance next();  // advances the stream
  // The planted score of an instance (used by tests as an achievability
  // oracle: ranking by planted score bounds what a trained model can reach).
  double planted_logit(const Instance& inst) const;

 private:
  SyntheticSpec spec_;
  std::vector<double> feature_weight_;
  std::mt19937_64 rng_;
};

// The full stream of spec.n_instances records, chunked into batches.
std::vector<Batch> generate_synthetic_ctr(const SyntheticSpec& spec,
                                          std::uint64_t batch_size);

// Replayable dataset file: one instance per line, "label<TAB>id,id,...".
std::vector<Instance> read_instances(const std::string& path);
void write_instances(const std::string& path,
                     const std::vector<Instance>& instances);
std::vector<Batch> make_batches(std::vector<Instance> instances,
                                std::uint64_t batch_size);

}  // namespace kpsim
