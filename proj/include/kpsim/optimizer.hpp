#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "kpsim/common.hpp"

namespace kpsim {

// k-step Adam hyperparameters. There is no bias correction; epsilon enters
// only through the second-moment initializer v0 = epsilon * 1.
struct AdamHyper {
  double alpha = 0.01;
  double beta1 = 0.0;
  double beta2 = 0.999;
  double epsilon = 0.01;
  std::uint64_t k = 1;  // merge period, in steps
  bool reset_local_v = true;

  void validate() const;
};

// One worker's local model and moment estimators. v_bar is the frozen global
// second moment used as the update denominator between merges.
struct WorkerState {
  std::vector<double> x;
  std::vector<double> m;
  std::vector<double> v;
  std::vector<double> v_bar;
  std::uint64_t t = 0;  // completed steps

  static WorkerState init(std::span<const double> x0, double epsilon);
  std::size_t dim() const { return x.size(); }
};

// Stochastic gradient source. `evaluate` must be deterministic given the rng
// state; when `true_gradient` is set it must be the mean of `evaluate` over
// the noise.
struct GradientOracle {
  std::size_t dim = 0;
  std::function<void(std::size_t worker, std::span<const double> x,
                     std::mt19937_64& rng, std::span<double> out)>
      evaluate;
  std::function<void(std::span<const double> x, std::span<double> out)>
      true_gradient;  // optional
  std::function<double(std::span<const double> x)> loss;  // optional

  bool has_true_gradient() const { return static_cast<bool>(true_gradient); }
  bool has_loss() const { return static_cast<bool>(loss); }
};

struct StepRecord {
  std::uint64_t step = 0;  // 1-based
  bool merged = false;
  double loss = 0.0;    // NaN when the oracle has no loss
  double metric = 0.0;  // squared v^{1/4}-scaled gradient norm; NaN if n/a
  double a3_increment = 0.0;
  std::vector<double> x_bar;
  std::vector<double> v_bar;
};

struct Trajectory {
  std::size_t dim = 0;
  std::size_t workers = 0;
  std::vector<StepRecord> steps;

  // `step merged loss metric a3` as line-delimited json records
  std::string to_jsonl() const;
};

// Algorithm step t: moment accumulation happens first on every worker, the
// model update is local (frozen v_bar) on non-merge steps and the global
// average on merge steps.
void accumulate_moments(WorkerState& s, std::span<const double> g,
                        const AdamHyper& h);
// Full non-merge step: moments plus x -= alpha * m / sqrt(v_bar), t + 1.
void local_adam_step(WorkerState& s, std::span<const double> g,
                     const AdamHyper& h);
// Merge (moments already accumulated): v_bar <- mean(v_i),
// x_i <- mean_j(x_j - alpha * m_j / sqrt(v_bar)), optional local v reset,
// t + 1. Averages run in ascending worker order.
void global_merge(std::vector<WorkerState>& states, const AdamHyper& h);

// Drives N workers for T steps with per-worker rng streams derived from
// (seed, worker). Returns the per-step diagnostics trajectory.
Trajectory run_kstep_adam(const GradientOracle& oracle, const AdamHyper& h,
                          std::size_t n_workers, std::uint64_t steps,
                          std::span<const double> x0, std::uint64_t seed);

// AdaGrad rule for sparse parameters: acc += g^2, w -= lr * g / sqrt(acc).
void adagrad_sparse_update(std::span<double> weight,
                           std::span<double> accumulator,
                           std::span<const double> g, double lr);

std::mt19937_64 worker_rng(std::uint64_t seed, std::size_t worker);

// Step engine shared by run_kstep_adam and the trainer: owns the worker
// states and the global step counter, applies one synchronized step from
// per-worker gradients.
class KStepEngine {
 public:
  KStepEngine(const AdamHyper& h, std::size_t n_workers,
              std::span<const double> x0);

  struct StepInfo {
    bool merged = false;
    double a3_increment = 0.0;
  };
  // gradients[i] is worker i's stochastic gradient for this step.
  StepInfo step(std::span<const std::vector<double>> gradients);

  std::uint64_t completed_steps() const { return t_; }
  std::size_t workers() const { return states_.size(); }
  std::size_t dim() const { return states_.front().dim(); }
  const std::vector<WorkerState>& states() const { return states_; }
  const std::vector<double>& frozen_v() const { return states_.front().v_bar; }
  std::vector<double> x_bar() const;

 private:
  AdamHyper hyper_;
  std::vector<WorkerState> states_;
  std::uint64_t t_ = 0;
};

}  // namespace kpsim
