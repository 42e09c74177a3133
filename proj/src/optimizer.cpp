#include "kpsim/optimizer.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace kpsim {

void AdamHyper::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("adam: alpha must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0) throw ConfigError("adam: beta1 must be in [0,1)");
  if (beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("adam: beta2 must be in [0,1)");
  if (!(epsilon > 0.0)) throw ConfigError("adam: epsilon must be > 0");
  if (k < 1) throw ConfigError("adam: k must be >= 1");
}

WorkerState WorkerState::init(std::span<const double> x0, double epsilon) {
  WorkerState s;
  s.x.assign(x0.begin(), x0.end());
  s.m.assign(x0.size(), 0.0);
  s.v.assign(x0.size(), epsilon);
  s.v_bar.assign(x0.size(), epsilon);
  s.t = 0;
  return s;
}

static void check_gradient_input(const WorkerState& s,
                                 std::span<const double> g) {
  if (g.size() != s.dim())
    throw Error("gradient dimension " + std::to_string(g.size()) +
                " != state dimension " + std::to_string(s.dim()));
  for (std::size_t j = 0; j < g.size(); ++j)
    if (!std::isfinite(g[j]))
      throw Error("non-finite gradient coordinate " + std::to_string(j));
}

void accumulate_moments(WorkerState& s, std::span<const double> g,
                        const AdamHyper& h) {
  check_gradient_input(s, g);
  for (std::size_t j = 0; j < g.size(); ++j) {
    s.m[j] = h.beta1 * s.m[j] + (1.0 - h.beta1) * g[j];
    s.v[j] = h.beta2 * s.v[j] + (1.0 - h.beta2) * (g[j] * g[j]);
  }
}

void local_adam_step(WorkerState& s, std::span<const double> g,
                     const AdamHyper& h) {
  accumulate_moments(s, g, h);
  for (std::size_t j = 0; j < s.dim(); ++j)
    s.x[j] = s.x[j] - h.alpha * s.m[j] / std::sqrt(s.v_bar[j]);
  s.t += 1;
}

void global_merge(std::vector<WorkerState>& states, const AdamHyper& h) {
  if (states.empty()) throw Error("global_merge: empty worker list");
  const std::size_t d = states.front().dim();
  for (const auto& s : states)
    if (s.dim() != d) throw Error("global_merge: mismatched dimensions");
  const std::size_t n = states.size();

  std::vector<double> v_bar(d);
  centered_mean_vectors(
      n, d, [&](std::size_t i) { return std::span<const double>(states[i].v); },
      v_bar);

  std::vector<std::vector<double>> terms(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      terms[i][j] =
          states[i].x[j] - h.alpha * states[i].m[j] / std::sqrt(v_bar[j]);
  std::vector<double> merged(d);
  centered_mean_vectors(
      n, d, [&](std::size_t i) { return std::span<const double>(terms[i]); },
      merged);

  for (auto& s : states) {
    s.x = merged;
    s.v_bar = v_bar;
    if (h.reset_local_v) s.v = v_bar;
    s.t += 1;
  }
}

void adagrad_sparse_update(std::span<double> weight,
                           std::span<double> accumulator,
                           std::span<const double> g, double lr) {
  if (weight.size() != accumulator.size() || weight.size() != g.size())
    throw Error("adagrad_sparse_update: dimension mismatch");
  for (std::size_t j = 0; j < g.size(); ++j) {
    accumulator[j] += g[j] * g[j];
    weight[j] -= lr * g[j] / std::sqrt(accumulator[j]);
  }
}

std::mt19937_64 worker_rng(std::uint64_t seed, std::size_t worker) {
  return std::mt19937_64(
      splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(worker) + 1)));
}

KStepEngine::KStepEngine(const AdamHyper& h, std::size_t n_workers,
                         std::span<const double> x0)
    : hyper_(h) {
  hyper_.validate();
  if (n_workers < 1) throw Error("KStepEngine: need at least one worker");
  if (x0.empty()) throw Error("KStepEngine: empty initial model");
  states_.reserve(n_workers);
  for (std::size_t i = 0; i < n_workers; ++i)
    states_.push_back(WorkerState::init(x0, hyper_.epsilon));
}

KStepEngine::StepInfo KStepEngine::step(
    std::span<const std::vector<double>> gradients) {
  if (gradients.size() != states_.size())
    throw Error("KStepEngine::step: gradient count != worker count");
  const std::uint64_t t = t_ + 1;
  StepInfo info;
  info.merged = (t % hyper_.k == 0);

  const std::vector<double> v_before = states_.front().v_bar;
  if (!info.merged) {
    for (std::size_t i = 0; i < states_.size(); ++i)
      local_adam_step(states_[i], gradients[i], hyper_);
  } else {
    for (std::size_t i = 0; i < states_.size(); ++i)
      accumulate_moments(states_[i], gradients[i], hyper_);
    global_merge(states_, hyper_);
    for (std::size_t j = 0; j < dim(); ++j)
      info.a3_increment += std::abs(1.0 / std::sqrt(v_before[j]) -
                                    1.0 / std::sqrt(states_.front().v_bar[j]));
  }
  t_ = t;

  for (const auto& s : states_) {
    if (!all_finite(s.x) || !all_finite(s.v))
      throw Error("non-finite worker state after step " + std::to_string(t));
    for (std::size_t j = 0; j < s.v.size(); ++j)
      if (!(s.v[j] > 0.0) || !(s.v_bar[j] > 0.0))
        throw Error("second moment lost positivity at step " +
                    std::to_string(t));
  }
  return info;
}

std::vector<double> KStepEngine::x_bar() const {
  std::vector<double> out(dim());
  centered_mean_vectors(
      states_.size(), dim(),
      [&](std::size_t i) { return std::span<const double>(states_[i].x); },
      out);
  return out;
}

Trajectory run_kstep_adam(const GradientOracle& oracle, const AdamHyper& h,
                          std::size_t n_workers, std::uint64_t steps,
                          std::span<const double> x0, std::uint64_t seed) {
  if (steps < 1) throw Error("run_kstep_adam: T must be >= 1");
  if (oracle.dim != x0.size())
    throw Error("run_kstep_adam: oracle dim != x0 dim");
  KStepEngine engine(h, n_workers, x0);

  std::vector<std::mt19937_64> rngs;
  for (std::size_t i = 0; i < n_workers; ++i)
    rngs.push_back(worker_rng(seed, i));

  Trajectory traj;
  traj.dim = x0.size();
  traj.workers = n_workers;
  traj.steps.reserve(steps);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> grads(n_workers,
                                         std::vector<double>(x0.size()));
  std::vector<double> true_grad(x0.size());
  for (std::uint64_t t = 1; t <= steps; ++t) {
    for (std::size_t i = 0; i < n_workers; ++i)
      oracle.evaluate(i, engine.states()[i].x, rngs[i], grads[i]);
    const auto info = engine.step(grads);

    StepRecord rec;
    rec.step = t;
    rec.merged = info.merged;
    rec.a3_increment = info.a3_increment;
    rec.x_bar = engine.x_bar();
    rec.v_bar = engine.frozen_v();
    rec.loss = oracle.has_loss() ? oracle.loss(rec.x_bar) : nan;
    if (oracle.has_true_gradient()) {
      oracle.true_gradient(rec.x_bar, true_grad);
      double metric = 0.0;
      for (std::size_t j = 0; j < true_grad.size(); ++j) {
        const double s = true_grad[j] / std::pow(rec.v_bar[j], 0.25);
        metric += s * s;
      }
      rec.metric = metric;
    } else {
      rec.metric = nan;
    }
    traj.steps.push_back(std::move(rec));
  }
  return traj;
}

std::string Trajectory::to_jsonl() const {
  std::ostringstream out;
  for (const auto& s : steps) {
    nlohmann::json j;
    j["step"] = s.step;
    j["merged"] = s.merged;
    j["loss"] = s.loss;      // nan serializes as null
    j["metric"] = s.metric;  // likewise
    j["a3"] = s.a3_increment;
    out << j.dump() << "\n";
  }
  return out.str();
}

}  // namespace kpsim
