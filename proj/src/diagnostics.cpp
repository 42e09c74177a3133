#include "kpsim/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace kpsim {

MetricCurve convergence_metric(const Trajectory& traj,
                               const GradientOracle& oracle) {
  if (!oracle.has_true_gradient())
    throw Error("convergence_metric: oracle has no true gradient");
  MetricCurve out;
  out.per_step.reserve(traj.steps.size());
  out.running_average.reserve(traj.steps.size());
  std::vector<double> g(traj.dim);
  double sum = 0.0;
  for (const auto& rec : traj.steps) {
    oracle.true_gradient(rec.x_bar, g);
    double metric = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double s = g[j] / std::pow(rec.v_bar[j], 0.25);
      metric += s * s;
    }
    out.per_step.push_back(metric);
    sum += metric;
    out.running_average.push_back(sum /
                                  static_cast<double>(out.per_step.size()));
  }
  return out;
}

AssumptionProfile estimate_assumptions(const GradientOracle& oracle,
                                       const Trajectory& traj,
                                       std::size_t samples,
                                       std::uint64_t seed) {
  if (traj.steps.empty()) throw Error("estimate_assumptions: empty trajectory");
  if (samples < 2)
    throw Error("estimate_assumptions: need at least 2 samples");
  const std::size_t d = traj.dim;
  AssumptionProfile prof;
  std::mt19937_64 rng(splitmix64(seed ^ 0x61C88647u));

  // probe points: up to 32 trajectory records, evenly spaced
  std::vector<const StepRecord*> probes;
  const std::size_t n_probe = std::min<std::size_t>(32, traj.steps.size());
  for (std::size_t i = 0; i < n_probe; ++i)
    probes.push_back(
        &traj.steps[i * (traj.steps.size() - 1) / std::max<std::size_t>(1, n_probe - 1)]);

  std::vector<double> g(d);
  std::vector<std::vector<double>> draws(samples, std::vector<double>(d));
  for (const auto* rec : probes) {
    for (std::size_t s = 0; s < samples; ++s) {
      oracle.evaluate(0, rec->x_bar, rng, draws[s]);
      for (double gj : draws[s])
        prof.g_hat = std::max(prof.g_hat, std::abs(gj));
    }
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (std::size_t s = 0; s < samples; ++s) mean += draws[s][j];
      mean /= static_cast<double>(samples);
      double var = 0.0;
      for (std::size_t s = 0; s < samples; ++s) {
        const double dlt = draws[s][j] - mean;
        var += dlt * dlt;
      }
      var /= static_cast<double>(samples - 1);
      prof.sigma2_hat = std::max(prof.sigma2_hat, var);
    }
  }

  if (oracle.has_true_gradient()) {
    std::uniform_int_distribution<std::size_t> pick(0, traj.steps.size() - 1);
    std::uniform_real_distribution<double> jitter(-0.1, 0.1);
    std::vector<double> gx(d), gy(d), y(d);
    for (std::size_t s = 0; s < samples * 8; ++s) {
      const auto& a = traj.steps[pick(rng)];
      const auto& b = traj.steps[pick(rng)];
      y = b.x_bar;
      for (auto& yj : y) yj += jitter(rng);
      oracle.true_gradient(a.x_bar, gx);
      oracle.true_gradient(y, gy);
      double dg = 0.0, dx = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        dg += (gx[j] - gy[j]) * (gx[j] - gy[j]);
        dx += (a.x_bar[j] - y[j]) * (a.x_bar[j] - y[j]);
      }
      if (dx > 1e-24) prof.l_hat = std::max(prof.l_hat, std::sqrt(dg / dx));
    }
  }

  // least-squares fit of log cumulative drift against log t
  double cum = 0.0;
  std::vector<std::pair<double, double>> pts;  // (log t, log cum)
  for (const auto& rec : traj.steps) {
    cum += rec.a3_increment;
    if (cum > 0.0)
      pts.emplace_back(std::log(static_cast<double>(rec.step)), std::log(cum));
  }
  if (pts.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [px, py] : pts) {
      sx += px;
      sy += py;
      sxx += px * px;
      sxy += px * py;
    }
    const double n = static_cast<double>(pts.size());
    const double denom = n * sxx - sx * sx;
    if (denom > 0.0) {
      prof.gamma_fit = (n * sxy - sx * sy) / denom;
      prof.m_fit = std::exp((sy - prof.gamma_fit * sx) / n) /
                   static_cast<double>(d);
    }
  } else if (pts.size() == 1) {
    prof.m_fit = cum / static_cast<double>(d);
  }
  return prof;
}

double check_gradient_against(
    const std::function<double(std::span<const double>)>& loss,
    std::span<const double> x, std::span<const double> analytic, double h) {
  if (!(h > 0.0)) throw Error("check_gradient: step size must be > 0");
  if (!loss) throw Error("check_gradient: loss function required");
  std::vector<double> probe(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t j = 0; j < probe.size(); ++j) {
    const double save = probe[j];
    probe[j] = save + h;
    const double up = loss(probe);
    probe[j] = save - h;
    const double down = loss(probe);
    probe[j] = save;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max(1.0, std::abs(fd) + std::abs(analytic[j]));
    worst = std::max(worst, std::abs(fd - analytic[j]) / denom);
  }
  return worst;
}

double check_gradient(const GradientOracle& oracle, std::span<const double> x,
                      double h) {
  if (!oracle.has_true_gradient())
    throw Error("check_gradient: oracle has no true gradient");
  std::vector<double> g(x.size());
  oracle.true_gradient(x, g);
  return check_gradient_against(oracle.loss, x, g, h);
}

GradientOracle make_quadratic_oracle(std::vector<double> center,
                                     double noise) {
  GradientOracle o;
  o.dim = center.size();
  auto c = std::make_shared<std::vector<double>>(std::move(center));
  o.loss = [c](std::span<const double> x) {
    double f = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = x[j] - (*c)[j];
      f += 0.5 * d * d;
    }
    return f;
  };
  o.true_gradient = [c](std::span<const double> x, std::span<double> out) {
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] - (*c)[j];
  };
  o.evaluate = [c, noise](std::size_t, std::span<const double> x,
                          std::mt19937_64& rng, std::span<double> out) {
    std::uniform_real_distribution<double> u(-noise, noise);
    for (std::size_t j = 0; j < x.size(); ++j)
      out[j] = x[j] - (*c)[j] + (noise > 0.0 ? u(rng) : 0.0);
  };
  return o;
}

GradientOracle make_benchmark_oracle(std::size_t dim, std::uint64_t seed,
                                     double noise, double bump_amplitude,
                                     double bump_frequency) {
  auto centers = std::make_shared<std::vector<double>>(dim);
  std::mt19937_64 rng(splitmix64(seed ^ 0x9E3779B9u));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& c : *centers) c = u(rng);

  const double a = bump_amplitude, b = bump_frequency;
  const double inv_d = 1.0 / static_cast<double>(dim);
  GradientOracle o;
  o.dim = dim;
  o.loss = [centers, a, b, inv_d](std::span<const double> x) {
    double f = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = x[j] - (*centers)[j];
      const double s = std::sin(b * x[j]);
      f += d * d + a * s * s;
    }
    return f * inv_d;
  };
  o.true_gradient = [centers, a, b, inv_d](std::span<const double> x,
                                           std::span<double> out) {
    for (std::size_t j = 0; j < x.size(); ++j)
      out[j] =
          inv_d * (2.0 * (x[j] - (*centers)[j]) + a * b * std::sin(2.0 * b * x[j]));
  };
  o.evaluate = [o_true = o.true_gradient, noise](
                   std::size_t, std::span<const double> x,
                   std::mt19937_64& rng, std::span<double> out) {
    o_true(x, out);
    if (noise > 0.0) {
      std::uniform_real_distribution<double> u(-noise, noise);
      for (auto& g : out) g += u(rng);
    }
  };
  return o;
}

}  // namespace kpsim
