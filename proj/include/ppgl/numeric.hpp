#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace ppgl {

// Kahan compensated summation. Aggregates that feed tolerance-gated checks
// (stain statistics, metric means) accumulate through this in a fixed order.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - comp_;
    const double t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
  }

  double value() const { return sum_; }
  std::size_t count() const { return n_; }

  void add_counted(double x) {
    add(x);
    ++n_;
  }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
  std::size_t n_ = 0;
};

struct MeanVar {
  double mean = 0.0;
  double variance = 0.0;  // population (divide by n)
};

// Two-pass compensated mean/population variance.
inline MeanVar mean_population_variance(const std::vector<double>& xs) {
  KahanSum s;
  for (double x : xs) s.add(x);
  const double mean = s.value() / static_cast<double>(xs.size());
  KahanSum sq;
  for (double x : xs) {
    const double d = x - mean;
    sq.add(d * d);
  }
  return {mean, sq.value() / static_cast<double>(xs.size())};
}

// Pearson correlation; nullopt when either side has (numerically) zero variance.
inline std::optional<double> pearson_r(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) return std::nullopt;
  const auto n = static_cast<double>(xs.size());
  KahanSum sx, sy;
  for (double x : xs) sx.add(x);
  for (double y : ys) sy.add(y);
  const double mx = sx.value() / n;
  const double my = sy.value() / n;
  KahanSum sxx, syy, sxy;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx.add(dx * dx);
    syy.add(dy * dy);
    sxy.add(dx * dy);
  }
  const double denom = std::sqrt(sxx.value()) * std::sqrt(syy.value());
  if (!(denom > 1e-12)) return std::nullopt;
  return sxy.value() / denom;
}

}  // namespace ppgl
