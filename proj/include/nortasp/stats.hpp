#pragma once

// Univariate and bivariate statistical primitives: empirical marginals,
// the standard normal CDF and quantile, Pearson correlation, the
// one-dimensional earth mover's distance and table-style summaries.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "nortasp/errors.hpp"

namespace nortasp {

// ---------------------------------------------------------------------------
// Standard normal distribution
// ---------------------------------------------------------------------------

inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

namespace detail {

// Acklam's rational approximation followed by one Halley step. Only called
// with p in (0, 0.5] so the refinement residual is formed in the tail where
// erfc keeps full relative precision.
inline double lower_normal_quantile(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace detail

// Inverse of normal_cdf on the open unit interval.
inline double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw std::domain_error("normal_quantile: argument must lie in (0, 1), got " +
                            std::to_string(u));
  }
  if (u == 0.5) return 0.0;
  if (u < 0.5) return detail::lower_normal_quantile(u);
  // 1 - u is exact for u in [0.5, 1).
  return -detail::lower_normal_quantile(1.0 - u);
}

// ---------------------------------------------------------------------------
// Empirical marginal
// ---------------------------------------------------------------------------

// Empirical distribution of a finite sample. The CDF is the right-continuous
// step function (# samples <= x) / n and the quantile is the generalized
// inverse inf{x : F(x) >= u}.
class EmpiricalMarginal {
 public:
  EmpiricalMarginal() = default;

  explicit EmpiricalMarginal(std::span<const double> samples)
      : sorted_(samples.begin(), samples.end()) {
    if (sorted_.empty()) {
      throw ContractError("EmpiricalMarginal: at least one sample is required");
    }
    for (double v : sorted_) {
      if (!std::isfinite(v)) throw ContractError("EmpiricalMarginal: non-finite sample");
    }
    std::sort(sorted_.begin(), sorted_.end());
    build_support();
  }

  explicit EmpiricalMarginal(const std::vector<double>& samples)
      : EmpiricalMarginal(std::span<const double>(samples)) {}

  std::size_t size() const { return sorted_.size(); }
  const std::vector<double>& sorted_values() const { return sorted_; }

  // Distinct support points with their CDF levels.
  const std::vector<double>& support() const { return support_; }
  const std::vector<double>& levels() const { return levels_; }

  double min() const { return sorted_.front(); }
  double max() const { return sorted_.back(); }
  bool is_point_mass() const { return support_.size() == 1; }

  double cdf(double x) const {
    const auto count = std::upper_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin();
    return static_cast<double>(count) / static_cast<double>(sorted_.size());
  }

  double quantile(double u) const {
    if (!(u > 0.0 && u <= 1.0)) {
      throw std::domain_error("ecdf_quantile: level must lie in (0, 1], got " +
                              std::to_string(u));
    }
    // Smallest index k with (k + 1) / n >= u, using the same division as cdf()
    // so that quantile(cdf(v)) lands exactly on v's first occurrence.
    const auto n = sorted_.size();
    std::size_t lo = 0, hi = n - 1;
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (static_cast<double>(mid + 1) / static_cast<double>(n) >= u) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    return sorted_[lo];
  }

  // quantile(normal_cdf(z)) evaluated through precomputed normal-score
  // thresholds; used by the correlation-matching quadrature.
  double from_normal_score(double z) const {
    const auto it = std::lower_bound(thresholds_.begin(), thresholds_.end(), z);
    return support_[static_cast<std::size_t>(it - thresholds_.begin())];
  }

  double mean() const {
    double s = 0.0;
    for (double v : sorted_) s += v;
    return s / static_cast<double>(sorted_.size());
  }

 private:
  void build_support() {
    const auto n = static_cast<double>(sorted_.size());
    for (std::size_t i = 0; i < sorted_.size(); ++i) {
      if (i + 1 == sorted_.size() || sorted_[i + 1] != sorted_[i]) {
        support_.push_back(sorted_[i]);
        levels_.push_back(static_cast<double>(i + 1) / n);
      }
    }
    // The last level is 1; every other level is strictly inside (0, 1).
    for (std::size_t k = 0; k + 1 < levels_.size(); ++k) {
      thresholds_.push_back(normal_quantile(levels_[k]));
    }
  }

  std::vector<double> sorted_;
  std::vector<double> support_;
  std::vector<double> levels_;
  std::vector<double> thresholds_;
};

inline double ecdf_eval(const EmpiricalMarginal& m, double x) { return m.cdf(x); }
inline double ecdf_quantile(const EmpiricalMarginal& m, double u) { return m.quantile(u); }

// ---------------------------------------------------------------------------
// Correlation and distances
// ---------------------------------------------------------------------------

inline double pearson_corr(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw ContractError("pearson_corr: length mismatch");
  }
  if (xs.size() < 2) {
    throw ContractError("pearson_corr: need at least two observations");
  }
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedCorrelationError("pearson_corr: constant input vector");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Pearson correlation with the constant-vector convention used throughout
// the pipeline: a constant dimension is uncorrelated with everything.
inline double pearson_corr_or_zero(std::span<const double> xs, std::span<const double> ys) {
  try {
    return pearson_corr(xs, ys);
  } catch (const UndefinedCorrelationError&) {
    return 0.0;
  }
}

// Earth mover's distance between two empirical CDFs: the exact integral of
// |F - G| over the merged breakpoint grid.
inline double emd(const EmpiricalMarginal& f, const EmpiricalMarginal& g) {
  std::vector<double> grid;
  grid.reserve(f.support().size() + g.support().size());
  std::merge(f.support().begin(), f.support().end(), g.support().begin(), g.support().end(),
             std::back_inserter(grid));
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  double total = 0.0;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    total += std::abs(f.cdf(grid[k]) - g.cdf(grid[k])) * (grid[k + 1] - grid[k]);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

// Percentile by linear interpolation between order statistics at position
// p * (n - 1). Input must be sorted ascending.
inline double percentile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ContractError("percentile: empty input");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// The seven rows of the validation and out-of-sample tables.
struct SummaryStats {
  double mean = 0.0;
  double std = 0.0;  // denominator n - 1; zero for a single value
  double min = 0.0;
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
  double max = 0.0;

  static constexpr const char* kRowNames[7] = {"mean", "std", "min", "25%", "50%", "75%", "max"};

  double row(std::size_t i) const {
    const double rows[7] = {mean, std, min, q25, q50, q75, max};
    return rows[i];
  }
};

inline SummaryStats summarize(std::span<const double> values) {
  if (values.empty()) throw ContractError("summarize: empty input");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  SummaryStats s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  s.min = sorted.front();
  s.max = sorted.back();
  s.q25 = percentile_sorted(sorted, 0.25);
  s.q50 = percentile_sorted(sorted, 0.50);
  s.q75 = percentile_sorted(sorted, 0.75);
  // Rounding in the mean must not push it outside the observed range.
  s.mean = std::clamp(s.mean, s.min, s.max);
  return s;
}

}  // namespace nortasp
