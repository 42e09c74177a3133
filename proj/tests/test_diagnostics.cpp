#include <cmath>

#include "doctest.h"
#include "kpsim/diagnostics.hpp"

using namespace kpsim;

namespace {

// Jacobi eigenvalue sweep for small symmetric matrices; test-side oracle for
// the smoothness estimate.
std::vector<double> symmetric_eigenvalues(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-18) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a[i][i];
  return eig;
}

Trajectory short_run(const GradientOracle& oracle, std::uint64_t k,
                     std::uint64_t steps, std::uint64_t seed) {
  AdamHyper h;
  h.alpha = 0.05;
  h.k = k;
  std::vector<double> x0(oracle.dim, 1.0);
  return run_kstep_adam(oracle, h, 2, steps, x0, seed);
}

}  // namespace

TEST_CASE("convergence_metric") {
  SUBCASE("d=1 scalar value") {
    Trajectory traj;
    traj.dim = 1;
    traj.workers = 1;
    StepRecord rec;
    rec.step = 1;
    rec.x_bar = {3.0};
    rec.v_bar = {16.0};
    traj.steps.push_back(rec);
    GradientOracle o;
    o.dim = 1;
    o.true_gradient = [](std::span<const double>, std::span<double> out) {
      out[0] = 2.0;
    };
    const auto curve = convergence_metric(traj, o);
    CHECK(curve.per_step[0] == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("stationary point scores zero; unit v_bar is the plain norm") {
    auto o = make_quadratic_oracle({0.5, -0.5}, 0.0);
    Trajectory traj;
    traj.dim = 2;
    traj.workers = 1;
    StepRecord at_min;
    at_min.step = 1;
    at_min.x_bar = {0.5, -0.5};
    at_min.v_bar = {1.0, 1.0};
    StepRecord away;
    away.step = 2;
    away.x_bar = {1.5, -0.5};
    away.v_bar = {1.0, 1.0};
    traj.steps = {at_min, away};
    const auto curve = convergence_metric(traj, o);
    CHECK(curve.per_step[0] == 0.0);
    CHECK(curve.per_step[1] == doctest::Approx(1.0));  // ||grad||^2 = 1
    CHECK(curve.running_average[1] == doctest::Approx(0.5));
  }
  SUBCASE("matches the values recorded during the run") {
    const auto o = make_quadratic_oracle({0.0, 0.0, 0.0}, 0.2);
    const auto traj = short_run(o, 3, 50, 4);
    const auto curve = convergence_metric(traj, o);
    for (std::size_t t = 0; t < traj.steps.size(); ++t)
      CHECK(curve.per_step[t] == traj.steps[t].metric);
  }
  SUBCASE("missing true gradient is an error") {
    GradientOracle o;
    o.dim = 1;
    o.evaluate = [](std::size_t, std::span<const double>, std::mt19937_64&,
                    std::span<double> out) { out[0] = 0.0; };
    Trajectory traj;
    traj.dim = 1;
    CHECK_THROWS_AS(convergence_metric(traj, o), Error);
  }
}

TEST_CASE("estimate_assumptions") {
  SUBCASE("noiseless oracle has (near) zero variance") {
    const auto o = make_quadratic_oracle({1.0, 2.0}, 0.0);
    const auto traj = short_run(o, 2, 40, 5);
    const auto prof = estimate_assumptions(o, traj, 8, 5);
    CHECK(prof.sigma2_hat <= 1e-12);
    CHECK(prof.g_hat > 0.0);
  }
  SUBCASE("constant gradient means zero smoothness") {
    GradientOracle o;
    o.dim = 2;
    o.true_gradient = [](std::span<const double>, std::span<double> out) {
      out[0] = 1.0;
      out[1] = -2.0;
    };
    o.evaluate = [g = o.true_gradient](std::size_t, std::span<const double> x,
                                       std::mt19937_64&, std::span<double> out) {
      g(x, out);
    };
    o.loss = [](std::span<const double> x) { return x[0] - 2.0 * x[1]; };
    const auto traj = short_run(o, 1, 30, 6);
    const auto prof = estimate_assumptions(o, traj, 4, 6);
    CHECK(prof.l_hat <= 1e-9);
  }
  SUBCASE("quadratic smoothness is bounded by the top eigenvalue") {
    // f(x) = 0.5 x^T A x for a known symmetric A
    const std::vector<std::vector<double>> a = {
        {2.0, 0.4, 0.0}, {0.4, 1.0, -0.3}, {0.0, -0.3, 3.0}};
    GradientOracle o;
    o.dim = 3;
    o.true_gradient = [a](std::span<const double> x, std::span<double> out) {
      for (std::size_t i = 0; i < 3; ++i) {
        out[i] = 0.0;
        for (std::size_t j = 0; j < 3; ++j) out[i] += a[i][j] * x[j];
      }
    };
    o.evaluate = [g = o.true_gradient](std::size_t, std::span<const double> x,
                                       std::mt19937_64&, std::span<double> out) {
      g(x, out);
    };
    const auto traj = short_run(o, 2, 60, 7);
    const auto prof = estimate_assumptions(o, traj, 8, 7);

    const auto eig = symmetric_eigenvalues(a);
    double top = 0.0;
    for (double e : eig) top = std::max(top, std::abs(e));
    CHECK(prof.l_hat <= top + 1e-6);
    CHECK(prof.l_hat > 0.5 * top);  // the probe pairs actually exercise A
  }
  SUBCASE("gamma fit stays at or below one half on a quadratic run") {
    const auto o = make_quadratic_oracle({0.0, 0.0}, 0.3);
    const auto traj = short_run(o, 4, 400, 8);
    const auto prof = estimate_assumptions(o, traj, 4, 8);
    CHECK(prof.gamma_fit <= 0.6);
  }
  SUBCASE("needs at least two samples") {
    const auto o = make_quadratic_oracle({0.0}, 0.0);
    const auto traj = short_run(o, 1, 5, 9);
    CHECK_THROWS_AS(estimate_assumptions(o, traj, 1, 9), Error);
  }
}

TEST_CASE("check_gradient") {
  SUBCASE("quadratic loss is exact up to roundoff") {
    const auto o = make_quadratic_oracle({0.3, -0.7, 1.1}, 0.0);
    const std::vector<double> x{1.0, 2.0, -0.5};
    CHECK(check_gradient(o, x, 1e-5) <= 1e-6);
  }
  SUBCASE("corrupted coordinate is detected") {
    const auto o = make_quadratic_oracle({0.0, 0.0}, 0.0);
    const std::vector<double> x{1.0, 1.0};
    std::vector<double> g(2);
    o.true_gradient(x, g);
    g[1] *= 2.0;  // negative control
    CHECK(check_gradient_against(o.loss, x, g, 1e-5) > 0.1);
  }
  SUBCASE("bad step size") {
    const auto o = make_quadratic_oracle({0.0}, 0.0);
    CHECK_THROWS_AS(check_gradient(o, std::vector<double>{1.0}, 0.0), Error);
  }
}

TEST_CASE("benchmark oracle is honestly nonconvex and consistent") {
  const auto o = make_benchmark_oracle(6, 13, 0.0);
  // gradient matches finite differences of the loss
  std::vector<double> x{0.2, -0.4, 0.9, -1.3, 0.0, 0.5};
  CHECK(check_gradient(o, x, 1e-6) <= 1e-7);
  // noise is unbiased around the true gradient (single draw, zero noise)
  std::vector<double> g(6), gt(6);
  auto rng = worker_rng(1, 0);
  o.evaluate(0, x, rng, g);
  o.true_gradient(x, gt);
  for (std::size_t j = 0; j < 6; ++j) CHECK(g[j] == gt[j]);
}
