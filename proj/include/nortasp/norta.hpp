#pragma once

// NORTA (normal-to-anything) model: fit base-normal correlations that
// reproduce a target correlation under given marginals, repair them to a
// valid correlation matrix, and sample through X_j = F_j^{-1}(Phi(Z_j)).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numbers>
#include <type_traits>
#include <random>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nortasp/correlation.hpp"
#include "nortasp/errors.hpp"
#include "nortasp/quadrature.hpp"
#include "nortasp/random.hpp"
#include "nortasp/scenario.hpp"
#include "nortasp/stats.hpp"

namespace nortasp {

// A marginal is anything with a quantile function on (0, 1]. Marginals may
// additionally expose from_normal_score(z) == quantile(normal_cdf(z)) as a
// faster or more accurate route.
template <class M>
concept Marginal = requires(const M& m, double u) {
  { m.quantile(u) } -> std::convertible_to<double>;
};

template <class M>
concept HasNormalScore = requires(const M& m, double z) {
  { m.from_normal_score(z) } -> std::convertible_to<double>;
};

namespace detail {

template <Marginal M>
double quantile_of_normal(const M& m, double z) {
  const double u = std::max(normal_cdf(z), std::numeric_limits<double>::min());
  return m.quantile(u);
}

template <Marginal M>
double transform_normal_score(const M& m, double z) {
  if constexpr (HasNormalScore<M>) {
    return m.from_normal_score(z);
  } else {
    return quantile_of_normal(m, z);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Correlation-matching function c_ij
// ---------------------------------------------------------------------------

// Continuous marginals: c(rho) = corr(F_a^{-1}(Phi(Z1)), F_b^{-1}(Phi(Z2))) for
// a standard bivariate normal pair with correlation rho, by tensor
// Gauss-Hermite quadrature on the rotated pair Z2 = rho Z1 + sqrt(1 - rho^2) W.
// Moments are taken under the same rule, which makes c(0) = 0 exactly.
template <Marginal MA, Marginal MB>
class QuadratureCorrelationMatcher {
 public:
  QuadratureCorrelationMatcher(const MA& a, const MB& b,
                               const GaussHermiteRule& rule = default_gauss_hermite())
      : b_(&b), rule_(&rule) {
    const std::size_t n = rule.size();
    xa_.resize(n);
    double mean_a = 0.0, mean_b = 0.0;
    std::vector<double> xb(n);
    for (std::size_t i = 0; i < n; ++i) {
      xa_[i] = detail::transform_normal_score(a, rule.nodes[i]);
      xb[i] = detail::transform_normal_score(b, rule.nodes[i]);
      mean_a += rule.weights[i] * xa_[i];
      mean_b += rule.weights[i] * xb[i];
    }
    double var_a = 0.0, var_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      xa_[i] -= mean_a;
      var_a += rule.weights[i] * xa_[i] * xa_[i];
      var_b += rule.weights[i] * (xb[i] - mean_b) * (xb[i] - mean_b);
    }
    mean_b_ = mean_b;
    degenerate_ = !(var_a > 1e-14 * (1.0 + mean_a * mean_a)) ||
                  !(var_b > 1e-14 * (1.0 + mean_b * mean_b));
    norm_ = degenerate_ ? 0.0 : 1.0 / std::sqrt(var_a * var_b);
  }

  bool degenerate() const { return degenerate_; }

  double operator()(double rho) const {
    if (degenerate_) return 0.0;
    if (!(rho >= -1.0 && rho <= 1.0)) throw ContractError("c_of_rho: rho outside [-1, 1]");
    const auto& nodes = rule_->nodes;
    const auto& w = rule_->weights;
    const double s = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    double total = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double base = rho * nodes[i];
      double inner = 0.0;
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        inner += w[j] * detail::transform_normal_score(*b_, base + s * nodes[j]);
      }
      total += w[i] * xa_[i] * (inner - mean_b_);
    }
    return std::clamp(total * norm_, -1.0, 1.0);
  }

 private:
  const MB* b_;
  const GaussHermiteRule* rule_;
  std::vector<double> xa_;  // centred transformed nodes of the first marginal
  double mean_b_ = 0.0;
  double norm_ = 0.0;
  bool degenerate_ = false;
};

// Finite-support marginals exposing their support points and CDF levels.
template <class M>
concept DiscreteMarginal = Marginal<M> && requires(const M& m) {
  { m.support() } -> std::convertible_to<const std::vector<double>&>;
  { m.levels() } -> std::convertible_to<const std::vector<double>&>;
};

// Discrete marginals: F^{-1}(Phi(Z)) = s_1 + sum_k (s_{k+1} - s_k) 1{Z > t_k}
// with t_k = Phi^{-1}(F_k), so the covariance is a weighted sum of indicator
// covariances. Each one is int_0^rho phi2(t_k, t_l; r) dr, integrated in
// theta = asin(r) where the integrand is bounded and smooth. The step-shaped
// integrand defeats tensor Gauss-Hermite here; this route is exact up to the
// Gauss-Legendre error in theta.
class DiscreteCorrelationMatcher {
 public:
  template <DiscreteMarginal MA, DiscreteMarginal MB>
  DiscreteCorrelationMatcher(const MA& a, const MB& b,
                             const GaussHermiteRule& /*unused*/ = default_gauss_hermite())
      : rule_(&default_gauss_legendre()) {
    const double var_a = decompose(a.support(), a.levels(), ta_, da_);
    const double var_b = decompose(b.support(), b.levels(), tb_, db_);
    degenerate_ = ta_.empty() || tb_.empty() || !(var_a > 0.0) || !(var_b > 0.0);
    norm_ = degenerate_ ? 0.0 : 1.0 / std::sqrt(var_a * var_b);
  }

  bool degenerate() const { return degenerate_; }

  double operator()(double rho) const {
    if (degenerate_) return 0.0;
    if (!(rho >= -1.0 && rho <= 1.0)) throw ContractError("c_of_rho: rho outside [-1, 1]");
    if (rho == 0.0) return 0.0;
    const double theta_end = std::asin(rho);
    const double sign = theta_end > 0.0 ? 1.0 : -1.0;
    const double span = std::abs(theta_end);

    // Panels graded towards the end point, where the integrand develops a
    // boundary layer as |rho| -> 1.
    const int panels = span < 1.2 ? 3 : 12;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
      const double u0 = static_cast<double>(p) / panels;
      const double u1 = static_cast<double>(p + 1) / panels;
      const double a0 = span * (1.0 - (1.0 - u0) * (1.0 - u0) * (1.0 - u0));
      const double a1 = span * (1.0 - (1.0 - u1) * (1.0 - u1) * (1.0 - u1));
      const double half = 0.5 * (a1 - a0);
      const double mid = 0.5 * (a1 + a0);
      for (std::size_t q = 0; q < rule_->size(); ++q) {
        const double theta = sign * (mid + half * rule_->nodes[q]);
        total += sign * half * rule_->weights[q] * integrand(theta);
      }
    }
    return std::clamp(total * norm_, -1.0, 1.0);
  }

 private:
  // Thresholds and jump sizes of F^{-1}(Phi(z)); returns the variance.
  static double decompose(const std::vector<double>& support, const std::vector<double>& levels,
                          std::vector<double>& thresholds, std::vector<double>& jumps) {
    double mean = 0.0, prev = 0.0;
    for (std::size_t k = 0; k < support.size(); ++k) {
      mean += (levels[k] - prev) * support[k];
      prev = levels[k];
    }
    double var = 0.0;
    prev = 0.0;
    for (std::size_t k = 0; k < support.size(); ++k) {
      var += (levels[k] - prev) * (support[k] - mean) * (support[k] - mean);
      prev = levels[k];
    }
    for (std::size_t k = 0; k + 1 < support.size(); ++k) {
      thresholds.push_back(normal_quantile(levels[k]));
      jumps.push_back(support[k + 1] - support[k]);
    }
    return var;
  }

  // sum_kl da_k db_l phi2(t_k, t_l; sin theta) cos theta, with the exponent
  // written in a form that stays finite as |theta| -> pi/2.
  double integrand(double theta) const {
    const double s = std::sin(theta);
    const double c2 = std::cos(theta) * std::cos(theta);
    double sum = 0.0;
    for (std::size_t k = 0; k < ta_.size(); ++k) {
      const double h = ta_[k];
      double inner = 0.0;
      for (std::size_t l = 0; l < tb_.size(); ++l) {
        const double t = tb_[l];
        const double e = (s >= 0.0) ? (h - t) * (h - t) / (2.0 * c2) + h * t / (1.0 + s)
                                    : (h + t) * (h + t) / (2.0 * c2) - h * t / (1.0 - s);
        inner += db_[l] * std::exp(-e);
      }
      sum += da_[k] * inner;
    }
    return sum / (2.0 * std::numbers::pi);
  }

  const GaussLegendreRule* rule_;
  std::vector<double> ta_, da_, tb_, db_;
  double norm_ = 0.0;
  bool degenerate_ = false;
};

// The matching function c_ij for a pair of marginals: exact integration for
// discrete marginals, tensor Gauss-Hermite otherwise.
template <Marginal MA, Marginal MB>
using CorrelationMatcher =
    std::conditional_t<DiscreteMarginal<MA> && DiscreteMarginal<MB>, DiscreteCorrelationMatcher,
                       QuadratureCorrelationMatcher<MA, MB>>;

template <class C>
concept MatchingFunction = requires(const C& c, double rho) {
  { c(rho) } -> std::convertible_to<double>;
  { c.degenerate() } -> std::convertible_to<bool>;
};

struct MatchedCorrelation {
  double rho_x = 0.0;
  bool degenerate = false;
};

template <Marginal MA, Marginal MB>
MatchedCorrelation c_of_rho(const MA& a, const MB& b, double rho_z,
                            const GaussHermiteRule& rule = default_gauss_hermite()) {
  const CorrelationMatcher<MA, MB> c(a, b, rule);
  return {c(rho_z), c.degenerate()};
}

struct RhoZSolution {
  double rho_z = 0.0;
  double residual = 0.0;  // c(rho_z) - target
  bool clamped = false;
  bool degenerate = false;
  int iterations = 0;
};

struct MatchingOptions {
  double tolerance = 1e-4;
  int max_iterations = 200;
  double endpoint_margin = 1e-6;
};

// Inverts the non-decreasing matching function by bisection on
// [-1 + margin, 1 - margin]. Targets outside the attainable range snap to the
// nearer endpoint and are reported as clamped.
template <MatchingFunction C>
RhoZSolution solve_rho_z(const C& c, double target, const MatchingOptions& opt = {}) {
  RhoZSolution out;
  if (c.degenerate()) {
    out.degenerate = true;
    out.residual = -target;
    return out;
  }
  double lo = -1.0 + opt.endpoint_margin;
  double hi = 1.0 - opt.endpoint_margin;
  const double c_lo = c(lo);
  const double c_hi = c(hi);
  if (target < c_lo) {
    return {lo, c_lo - target, true, false, 0};
  }
  if (target > c_hi) {
    return {hi, c_hi - target, true, false, 0};
  }

  for (out.iterations = 1; out.iterations <= opt.max_iterations; ++out.iterations) {
    const double mid = 0.5 * (lo + hi);
    const double cm = c(mid);
    if (std::abs(cm - target) <= opt.tolerance) {
      out.rho_z = mid;
      out.residual = cm - target;
      return out;
    }
    if (cm < target) {
      lo = mid;
    } else {
      hi = mid;
    }
    const double next = 0.5 * (lo + hi);
    if (next <= lo || next >= hi) break;  // bracket exhausted at double precision
  }
  out.iterations = std::min(out.iterations, opt.max_iterations);
  out.rho_z = 0.5 * (lo + hi);
  out.residual = c(out.rho_z) - target;
  return out;
}

template <Marginal MA, Marginal MB>
RhoZSolution solve_rho_z(const MA& a, const MB& b, double target, const MatchingOptions& opt = {},
                         const GaussHermiteRule& rule = default_gauss_hermite()) {
  return solve_rho_z(CorrelationMatcher<MA, MB>(a, b, rule), target, opt);
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct PairFit {
  int i = 0;
  int j = 0;
  double rho_x = 0.0;
  double rho_z = 0.0;
  double residual = 0.0;
  bool clamped = false;
  bool degenerate = false;
};

struct FitReport {
  std::vector<PairFit> pairs;  // i < j, row-major order
  int clamped_count = 0;
  int degenerate_count = 0;
  double max_abs_residual = 0.0;
  double repair_distance = 0.0;  // ||Sigma_Z - Y||_F
  double sigma_z_min_eigenvalue = 0.0;
  double cholesky_jitter = 0.0;
};

template <Marginal M>
struct BasicNortaModel {
  std::vector<std::string> labels;
  std::vector<M> marginals;
  CorrelationMatrix sigma_x;  // target
  CorrelationMatrix sigma_z;  // matched, before repair (may be indefinite)
  CorrelationMatrix y;        // repaired, PSD
  Eigen::MatrixXd chol;       // lower triangular, chol * chol^T = y
  FitReport report;

  std::size_t dim() const { return marginals.size(); }
};

using NortaModel = BasicNortaModel<EmpiricalMarginal>;

struct FitOptions {
  MatchingOptions matching;
  NearestCorrelationOptions repair;
  unsigned threads = 1;
};

struct InputEstimates {
  std::vector<EmpiricalMarginal> marginals;
  CorrelationMatrix sigma_x;
};

// Marginals from columns, target correlations from pairwise Pearson with the
// constant-column convention (correlation 0).
inline InputEstimates estimate_inputs(const ScenarioSet& s) {
  if (s.count() < 2) {
    throw InsufficientDataError("NORTA fit needs at least 2 scenarios, got " +
                                std::to_string(s.count()));
  }
  const std::size_t n = s.dim();
  std::vector<std::vector<double>> columns(n);
  InputEstimates out;
  out.marginals.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    columns[i] = s.column(i);
    out.marginals.emplace_back(columns[i]);
  }
  Eigen::MatrixXd sx = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                                 static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double r = pearson_corr_or_zero(columns[i], columns[j]);
      sx(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r;
      sx(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = r;
    }
  }
  out.sigma_x = CorrelationMatrix(std::move(sx));
  return out;
}

// Pairwise matching, PSD repair and Cholesky factorization for arbitrary
// marginals. Pair solves are independent; with threads > 1 they are split
// into contiguous blocks whose results land in fixed slots.
template <Marginal M>
BasicNortaModel<M> fit_from_inputs(std::vector<M> marginals, const CorrelationMatrix& sigma_x,
                                   const FitOptions& opt = {},
                                   const GaussHermiteRule& rule = default_gauss_hermite()) {
  const std::size_t n = marginals.size();
  if (static_cast<std::size_t>(sigma_x.dim()) != n) {
    throw ContractError("fit: correlation matrix dimension does not match marginal count");
  }

  BasicNortaModel<M> model;
  model.marginals = std::move(marginals);
  model.sigma_x = sigma_x;

  std::vector<PairFit> pairs;
  pairs.reserve(n * (n > 0 ? n - 1 : 0) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      pairs.push_back({static_cast<int>(i), static_cast<int>(j),
                       sigma_x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
    }
  }

  auto solve_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      PairFit& pf = pairs[p];
      const auto& mi = model.marginals[static_cast<std::size_t>(pf.i)];
      const auto& mj = model.marginals[static_cast<std::size_t>(pf.j)];
      const RhoZSolution sol = solve_rho_z(CorrelationMatcher<M, M>(mi, mj, rule), pf.rho_x,
                                           opt.matching);
      pf.rho_z = sol.rho_z;
      pf.residual = sol.residual;
      pf.clamped = sol.clamped;
      pf.degenerate = sol.degenerate;
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(opt.threads, 64));
  if (threads == 1 || pairs.size() < 2) {
    solve_range(0, pairs.size());
  } else {
    std::vector<std::jthread> workers;
    const std::size_t chunk = (pairs.size() + threads - 1) / threads;
    for (std::size_t begin = 0; begin < pairs.size(); begin += chunk) {
      workers.emplace_back(solve_range, begin, std::min(pairs.size(), begin + chunk));
    }
  }

  const auto dim = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd sz = Eigen::MatrixXd::Identity(dim, dim);
  FitReport& rep = model.report;
  for (const PairFit& pf : pairs) {
    sz(pf.i, pf.j) = sz(pf.j, pf.i) = pf.rho_z;
    rep.clamped_count += pf.clamped ? 1 : 0;
    rep.degenerate_count += pf.degenerate ? 1 : 0;
    if (!pf.degenerate) rep.max_abs_residual = std::max(rep.max_abs_residual, std::abs(pf.residual));
  }
  model.sigma_z = CorrelationMatrix(std::move(sz));
  rep.sigma_z_min_eigenvalue = model.sigma_z.min_eigenvalue();

  model.y = nearest_correlation(model.sigma_z.matrix(), opt.repair);
  rep.repair_distance = (model.sigma_z.matrix() - model.y.matrix()).norm();

  CholeskyFactor factor = cholesky_with_jitter(model.y);
  model.chol = std::move(factor.lower);
  rep.cholesky_jitter = factor.jitter;
  rep.pairs = std::move(pairs);
  return model;
}

inline NortaModel fit(const ScenarioSet& s, const FitOptions& opt = {}) {
  InputEstimates est = estimate_inputs(s);
  NortaModel model = fit_from_inputs(std::move(est.marginals), est.sigma_x, opt);
  model.labels = s.labels;
  return model;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

// m draws of X_j = F_j^{-1}(Phi(Z_j)), Z = L Zhat, Zhat i.i.d. standard normal
// by inverse transform. Returns an m x n matrix.
template <Marginal M>
Eigen::MatrixXd sample_values(const BasicNortaModel<M>& model, std::size_t m, std::uint64_t seed) {
  if (m == 0) throw ContractError("sample: count must be positive");
  const auto n = static_cast<Eigen::Index>(model.dim());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(m), n);
  Eigen::VectorXd zhat(n);
  for (std::size_t d = 0; d < m; ++d) {
    auto rng = detail::draw_stream(seed, d);
    for (Eigen::Index j = 0; j < n; ++j) zhat(j) = normal_quantile(detail::open_unit(rng()));
    const Eigen::VectorXd z = model.chol.template triangularView<Eigen::Lower>() * zhat;
    for (Eigen::Index j = 0; j < n; ++j) {
      out(static_cast<Eigen::Index>(d), j) =
          detail::quantile_of_normal(model.marginals[static_cast<std::size_t>(j)], z(j));
    }
  }
  return out;
}

// Sampling for a model fit on integer flood heights; every emitted value is a
// support point of the corresponding input marginal.
inline ScenarioSet sample(const NortaModel& model, std::size_t m, std::uint64_t seed) {
  const Eigen::MatrixXd values = sample_values(model, m, seed);
  ScenarioSet s;
  s.labels = model.labels;
  if (s.labels.size() != model.dim()) {
    s.labels.clear();
    for (std::size_t i = 0; i < model.dim(); ++i) s.labels.push_back(std::to_string(i));
  }
  s.heights.assign(m, std::vector<int>(model.dim()));
  for (std::size_t d = 0; d < m; ++d) {
    for (std::size_t j = 0; j < model.dim(); ++j) {
      const double v = values(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(j));
      const double r = std::round(v);
      if (r != v || r < 0.0) {
        throw ContractError("sample: marginal support is not a non-negative integer height");
      }
      s.heights[d][j] = static_cast<int>(r);
    }
  }
  s.probs = ScenarioSet::uniform_probs(m);
  return s;
}

}  // namespace nortasp
