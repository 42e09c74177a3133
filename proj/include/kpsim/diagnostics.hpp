#pragma once

#include "kpsim/optimizer.hpp"

namespace kpsim {

// Measured stand-ins for the convergence-analysis constants: sup-norm
// gradient bound, per-coordinate noise variance, sampled smoothness, and the
// (M, gamma) fit of the cumulative second-moment drift.
struct AssumptionProfile {
  double g_hat = 0.0;
  double sigma2_hat = 0.0;
  double l_hat = 0.0;
  double m_fit = 0.0;
  double gamma_fit = 0.0;
};

struct MetricCurve {
  std::vector<double> per_step;
  std::vector<double> running_average;
};

// ||grad f(x_bar_t) / v_bar_t^{1/4}||^2 per recorded step plus its running
// average. Requires the oracle's true gradient.
MetricCurve convergence_metric(const Trajectory& traj,
                               const GradientOracle& oracle);

// Samples the oracle along the trajectory to estimate the assumption
// constants; `samples` controls draws per probe point (>= 2).
AssumptionProfile estimate_assumptions(const GradientOracle& oracle,
                                       const Trajectory& traj,
                                       std::size_t samples,
                                       std::uint64_t seed = 0);

// Central-difference check of the oracle's true gradient against its loss.
// Returns the max per-coordinate relative error (denominator floored at 1).
double check_gradient(const GradientOracle& oracle, std::span<const double> x,
                      double h);

// Same check against an externally supplied gradient (used to validate the
// trainer's analytic backward pass).
double check_gradient_against(
    const std::function<double(std::span<const double>)>& loss,
    std::span<const double> x, std::span<const double> analytic, double h);

// Built-in oracles.
//
// Quadratic f(x) = 0.5 * ||x - center||^2 with coordinate-wise uniform
// (-noise, noise) gradient noise.
GradientOracle make_quadratic_oracle(std::vector<double> center, double noise);
// Smooth nonconvex benchmark: f(x) = (1/d) sum_j (x_j - c_j)^2 +
// a * sin^2(b * x_j), with uniform gradient noise. Centers are seeded in
// [-1, 1].
GradientOracle make_benchmark_oracle(std::size_t dim, std::uint64_t seed,
                                     double noise, double bump_amplitude = 0.5,
                                     double bump_frequency = 3.0);

}  // namespace kpsim
