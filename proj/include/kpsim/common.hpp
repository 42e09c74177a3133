#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kpsim {

// Base error for all component failures surfaced to callers.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Configuration / input-document problems (CLI maps these to exit code 1).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

// Mean of per-worker values in ascending worker order, computed as
// base + sum(v_i - base)/n. On consensus (all inputs equal) the result is
// bit-identical to the input, which the merge-invariance contracts require.
inline double centered_mean(std::span<const double> vals) {
  const double base = vals[0];
  double acc = 0.0;
  for (double v : vals) acc += v - base;
  return base + acc / static_cast<double>(vals.size());
}

// Coordinate-wise centered mean over n vectors of length d.
// `get(i)` must return worker i's vector.
template <typename Get>
void centered_mean_vectors(std::size_t n, std::size_t d, Get&& get,
                           std::span<double> out) {
  for (std::size_t j = 0; j < d; ++j) {
    const double base = get(0)[j];
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += get(i)[j] - base;
    out[j] = base + acc / static_cast<double>(n);
  }
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

// Deterministic 64-bit mix used to derive per-worker RNG streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace kpsim
