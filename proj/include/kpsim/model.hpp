#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "kpsim/data.hpp"

namespace kpsim {

enum class Activation : std::uint8_t { Relu, Tanh };
enum class Pooling : std::uint8_t { Sum, Mean };

struct ModelConfig {
  std::uint64_t vocab = 10000;
  std::size_t embedding_dim = 8;
  std::vector<std::size_t> hidden = {16};
  Activation activation = Activation::Relu;
  Pooling pooling = Pooling::Sum;

  void validate() const;
};

// Embedding lookup used by the forward pass; adapts either the tiered store
// or a plain map.
using EmbeddingSource =
    std::function<std::span<const double>(ParameterKey key)>;

// Pooled-embedding MLP with a sigmoid head. Dense parameters (all MLP
// weights and biases) live in one flat vector so the k-step optimizer can
// treat the dense model as a single coordinate block.
class CtrModel {
 public:
  explicit CtrModel(const ModelConfig& config);

  std::size_t dense_dim() const { return dense_dim_; }
  const ModelConfig& config() const { return config_; }

  // Seeded uniform [-0.05, 0.05] dense initializer.
  std::vector<double> init_dense(std::uint64_t seed) const;

  struct Forward {
    std::vector<double> predictions;            // sigmoid outputs, in (0,1)
    std::vector<double> logits;
    std::vector<std::vector<double>> pooled;    // per instance
    // per instance, per layer: pre-activation then activation
    std::vector<std::vector<std::vector<double>>> pre;
    std::vector<std::vector<std::vector<double>>> act;
    const std::vector<Instance>* instances = nullptr;
  };

  Forward forward(std::span<const double> dense,
                  const EmbeddingSource& embeddings,
                  const std::vector<Instance>& minibatch) const;

  struct Backward {
    double loss = 0.0;  // mean binary cross-entropy
    std::vector<double> dense_grad;
    std::map<ParameterKey, std::vector<double>> sparse_grads;
  };

  // Analytic gradients of the mean cross-entropy over the minibatch; sparse
  // gradients are accumulated per feature id across instances.
  Backward backward(std::span<const double> dense, const Forward& cache) const;

  // Mean binary cross-entropy of the forward predictions (used by the
  // finite-difference checks).
  static double mean_bce(const Forward& fwd);

 private:
  ModelConfig config_;
  std::vector<std::size_t> widths_;  // embedding_dim, hidden..., 1
  std::size_t dense_dim_ = 0;
  // offsets into the flat dense vector, per layer: weights then bias
  std::vector<std::size_t> w_off_;
  std::vector<std::size_t> b_off_;
};

Activation activation_from_string(const std::string& s);
Pooling pooling_from_string(const std::string& s);
const char* to_string(Activation a);
const char* to_string(Pooling p);

}  // namespace kpsim
