#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace ppgl {

// SplitMix64. All randomness in the project flows through this generator so
// that a seed reproduces bit-identical results on any platform; the standard
// <random> distributions are implementation-defined and are not used.
struct SplitMix64 {
  std::uint64_t state = 0;

  std::uint64_t next() {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

// Fixed stream-splitting rule: children of a seed are addressed by salt.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  SplitMix64 m{seed};
  const std::uint64_t mixed = m.next() ^ (salt * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL);
  SplitMix64 n{mixed};
  return n.next();
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_{seed} {}

  std::uint64_t next_u64() { return gen_.next(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_.next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n == 0 is invalid.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
    // Rejection-free would bias; bounded rejection keeps determinism.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = gen_.next();
    while (x >= limit) x = gen_.next();
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; consumes exactly two uniforms per call.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Marsaglia-Tsang for shape >= 1; boost to shape+1 below 1.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be positive");
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0) * std::pow(u > 0.0 ? u : 0x1.0p-53, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * (x * x) * (x * x)) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double beta(double a, double b) {
    const double x = gamma(a);
    const double y = gamma(b);
    return x / (x + y);
  }

  // Index sampled from unnormalized nonnegative weights.
  template <typename Container>
  std::size_t categorical(const Container& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw std::invalid_argument("categorical: weights must sum to a positive value");
    double r = uniform() * total;
    std::size_t last = 0;
    std::size_t i = 0;
    for (double w : weights) {
      if (w > 0.0) {
        if (r < w) return i;
        r -= w;
        last = i;
      }
      ++i;
    }
    return last;  // guard against rounding on the final bucket
  }

 private:
  SplitMix64 gen_;
};

}  // namespace ppgl
