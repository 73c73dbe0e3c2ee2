#pragma once

// Dense bounded-variable revised simplex for small linear programs.
//
//   minimize    c^T x
//   subject to  a_i^T x  {<=, >=, =}  b_i
//               l <= x <= u           (infinite bounds allowed)
//
// Every row gets a slack column so the working system is A x + s = b with
// bounded slacks. Rows whose slack cannot absorb the initial residual get an
// artificial column; phase 1 drives the artificials to zero.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nortasp/errors.hpp"

namespace nortasp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { LessEqual, GreaterEqual, Equal };

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration-limit";
  }
  return "unknown";
}

struct LpRow {
  std::vector<std::pair<int, double>> coeffs;
  Sense sense = Sense::LessEqual;
  double rhs = 0.0;
};

struct LpProblem {
  std::vector<double> objective;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<LpRow> rows;

  int num_vars() const { return static_cast<int>(objective.size()); }
  int num_rows() const { return static_cast<int>(rows.size()); }

  int add_variable(double cost, double lo, double hi) {
    objective.push_back(cost);
    lower.push_back(lo);
    upper.push_back(hi);
    return num_vars() - 1;
  }

  void add_row(std::vector<std::pair<int, double>> coeffs, Sense sense, double rhs) {
    rows.push_back({std::move(coeffs), sense, rhs});
  }

  void validate() const {
    if (lower.size() != objective.size() || upper.size() != objective.size()) {
      throw ContractError("lp: bound vectors do not match the objective length");
    }
    for (std::size_t j = 0; j < objective.size(); ++j) {
      if (!std::isfinite(objective[j])) throw ContractError("lp: non-finite objective coefficient");
      if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] > upper[j]) {
        throw ContractError("lp: invalid bounds on variable " + std::to_string(j));
      }
      if (lower[j] == kInf || upper[j] == -kInf) {
        throw ContractError("lp: variable " + std::to_string(j) + " has an empty domain");
      }
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!std::isfinite(rows[i].rhs)) throw ContractError("lp: non-finite right-hand side");
      for (const auto& [j, a] : rows[i].coeffs) {
        if (j < 0 || j >= num_vars()) {
          throw ContractError("lp: row " + std::to_string(i) + " references unknown variable");
        }
        if (!std::isfinite(a)) throw ContractError("lp: non-finite coefficient");
      }
    }
  }
};

struct LpSolution {
  LpStatus status = LpStatus::IterationLimit;
  std::vector<double> x;
  double objective = 0.0;
  double max_infeasibility = 0.0;
  int iterations = 0;
  bool used_bland = false;
  std::vector<double> phase2_objectives;  // filled when LpOptions::record_trace
};

struct LpOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  int max_iterations = 0;  // 0: 50 * (rows + cols)
  int stall_limit = 100;
  int refactor_every = 64;
  bool record_trace = false;
};

// Largest violation of rows and bounds at x.
inline double max_primal_infeasibility(const LpProblem& p, const std::vector<double>& x) {
  double worst = 0.0;
  for (int j = 0; j < p.num_vars(); ++j) {
    worst = std::max({worst, p.lower[j] - x[j], x[j] - p.upper[j]});
  }
  for (const LpRow& row : p.rows) {
    double act = 0.0;
    for (const auto& [j, a] : row.coeffs) act += a * x[j];
    switch (row.sense) {
      case Sense::LessEqual: worst = std::max(worst, act - row.rhs); break;
      case Sense::GreaterEqual: worst = std::max(worst, row.rhs - act); break;
      case Sense::Equal: worst = std::max(worst, std::abs(act - row.rhs)); break;
    }
  }
  return worst;
}

namespace detail {

class BoundedSimplex {
 public:
  BoundedSimplex(const LpProblem& p, const LpOptions& opt) : p_(p), opt_(opt) {
    m_ = p.num_rows();
    n_ = p.num_vars();
    max_iter_ = opt.max_iterations > 0 ? opt.max_iterations : 50 * (m_ + n_ + 1);
    build();
  }

  LpSolution run() {
    LpSolution sol;
    if (num_artificial_ > 0) {
      std::vector<double> c1(static_cast<std::size_t>(cols_), 0.0);
      for (int j = first_artificial_; j < cols_; ++j) c1[static_cast<std::size_t>(j)] = 1.0;
      const LpStatus s = optimize(c1, nullptr);
      if (s == LpStatus::IterationLimit) return finish(sol, s);
      double infeas = 0.0;
      for (int j = first_artificial_; j < cols_; ++j) infeas += x_[static_cast<std::size_t>(j)];
      if (infeas > 1e-7) return finish(sol, LpStatus::Infeasible);
      for (int j = first_artificial_; j < cols_; ++j) {
        lo_[static_cast<std::size_t>(j)] = hi_[static_cast<std::size_t>(j)] = 0.0;
        if (!is_basic(j)) x_[static_cast<std::size_t>(j)] = 0.0;
      }
    }
    std::vector<double> c2(static_cast<std::size_t>(cols_), 0.0);
    for (int j = 0; j < n_; ++j) c2[static_cast<std::size_t>(j)] = p_.objective[static_cast<std::size_t>(j)];
    bland_ = false;
    stalled_ = 0;
    const LpStatus s = optimize(c2, opt_.record_trace ? &sol.phase2_objectives : nullptr);
    return finish(sol, s);
  }

 private:
  enum class State { Basic, AtLower, AtUpper, FreeZero };

  bool is_basic(int j) const { return state_[static_cast<std::size_t>(j)] == State::Basic; }

  void build() {
    // Column layout: structurals, slacks, artificials.
    first_slack_ = n_;
    first_artificial_ = n_ + m_;

    std::vector<double> lo(p_.lower), hi(p_.upper);
    std::vector<double> x(static_cast<std::size_t>(n_));
    for (int j = 0; j < n_; ++j) {
      const auto u = static_cast<std::size_t>(j);
      if (std::isfinite(lo[u])) {
        x[u] = lo[u];
      } else if (std::isfinite(hi[u])) {
        x[u] = hi[u];
      } else {
        x[u] = 0.0;
      }
    }

    Eigen::VectorXd b(m_);
    std::vector<double> resid(static_cast<std::size_t>(m_));
    for (int i = 0; i < m_; ++i) {
      const LpRow& row = p_.rows[static_cast<std::size_t>(i)];
      b(i) = row.rhs;
      double act = 0.0;
      for (const auto& [j, a] : row.coeffs) act += a * x[static_cast<std::size_t>(j)];
      resid[static_cast<std::size_t>(i)] = row.rhs - act;
    }

    // Slack bounds and which rows need an artificial.
    std::vector<double> slo(static_cast<std::size_t>(m_)), shi(static_cast<std::size_t>(m_));
    std::vector<int> art_rows;
    std::vector<double> art_sign;
    for (int i = 0; i < m_; ++i) {
      const auto u = static_cast<std::size_t>(i);
      switch (p_.rows[u].sense) {
        case Sense::LessEqual: slo[u] = 0.0; shi[u] = kInf; break;
        case Sense::GreaterEqual: slo[u] = -kInf; shi[u] = 0.0; break;
        case Sense::Equal: slo[u] = 0.0; shi[u] = 0.0; break;
      }
      const double r = resid[u];
      const bool fits = r >= slo[u] - opt_.feasibility_tol && r <= shi[u] + opt_.feasibility_tol &&
                        slo[u] != shi[u];
      if (!fits) {
        art_rows.push_back(i);
        const double at = std::clamp(r, slo[u], shi[u]);
        art_sign.push_back(r - at >= 0.0 ? 1.0 : -1.0);
      }
    }
    num_artificial_ = static_cast<int>(art_rows.size());
    cols_ = n_ + m_ + num_artificial_;

    a_ = Eigen::MatrixXd::Zero(m_, cols_);
    for (int i = 0; i < m_; ++i) {
      for (const auto& [j, v] : p_.rows[static_cast<std::size_t>(i)].coeffs) a_(i, j) += v;
      a_(i, first_slack_ + i) = 1.0;
    }
    for (int k = 0; k < num_artificial_; ++k) {
      a_(art_rows[static_cast<std::size_t>(k)], first_artificial_ + k) = art_sign[static_cast<std::size_t>(k)];
    }
    b_ = b;

    lo_.assign(static_cast<std::size_t>(cols_), 0.0);
    hi_.assign(static_cast<std::size_t>(cols_), kInf);
    x_.assign(static_cast<std::size_t>(cols_), 0.0);
    state_.assign(static_cast<std::size_t>(cols_), State::AtLower);
    for (int j = 0; j < n_; ++j) {
      const auto u = static_cast<std::size_t>(j);
      lo_[u] = lo[u];
      hi_[u] = hi[u];
      x_[u] = x[u];
      if (std::isfinite(lo[u])) {
        state_[u] = State::AtLower;
      } else if (std::isfinite(hi[u])) {
        state_[u] = State::AtUpper;
      } else {
        state_[u] = State::FreeZero;
      }
    }

    basis_.assign(static_cast<std::size_t>(m_), -1);
    std::vector<bool> has_art(static_cast<std::size_t>(m_), false);
    for (int r : art_rows) has_art[static_cast<std::size_t>(r)] = true;
    int k = 0;
    for (int i = 0; i < m_; ++i) {
      const auto u = static_cast<std::size_t>(i);
      const int s = first_slack_ + i;
      lo_[static_cast<std::size_t>(s)] = slo[u];
      hi_[static_cast<std::size_t>(s)] = shi[u];
      if (has_art[u]) {
        // Slack rests at the bound nearest the residual; the artificial is basic.
        const double at = std::clamp(resid[u], slo[u], shi[u]);
        x_[static_cast<std::size_t>(s)] = at;
        state_[static_cast<std::size_t>(s)] = (at == slo[u]) ? State::AtLower : State::AtUpper;
        const int art = first_artificial_ + k++;
        basis_[u] = art;
        state_[static_cast<std::size_t>(art)] = State::Basic;
      } else {
        basis_[u] = s;
        state_[static_cast<std::size_t>(s)] = State::Basic;
      }
    }
    refactor();
  }

  void refactor() {
    if (m_ == 0) return;
    Eigen::MatrixXd bmat(m_, m_);
    for (int i = 0; i < m_; ++i) bmat.col(i) = a_.col(basis_[static_cast<std::size_t>(i)]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(bmat);
    binv_ = lu.inverse();
    if (!binv_.allFinite()) throw NumericalError("lp: singular basis");
    recompute_basic_values();
  }

  void recompute_basic_values() {
    Eigen::VectorXd rhs = b_;
    for (int j = 0; j < cols_; ++j) {
      const double v = x_[static_cast<std::size_t>(j)];
      if (!is_basic(j) && v != 0.0) rhs -= v * a_.col(j);
    }
    const Eigen::VectorXd xb = binv_ * rhs;
    for (int i = 0; i < m_; ++i) x_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])] = xb(i);
  }

  double objective(const std::vector<double>& c) const {
    double v = 0.0;
    for (int j = 0; j < cols_; ++j) v += c[static_cast<std::size_t>(j)] * x_[static_cast<std::size_t>(j)];
    return v;
  }

  LpStatus optimize(const std::vector<double>& c, std::vector<double>* trace) {
    int since_refactor = 0;
    while (true) {
      if (iterations_ >= max_iter_) return LpStatus::IterationLimit;
      if (since_refactor >= opt_.refactor_every) {
        refactor();
        since_refactor = 0;
      }
      if (trace) trace->push_back(objective(c));

      // Duals and pricing.
      Eigen::VectorXd cb(m_);
      for (int i = 0; i < m_; ++i) cb(i) = c[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])];
      const Eigen::VectorXd y = binv_.transpose() * cb;

      int enter = -1;
      double enter_dir = 0.0;
      double best = 0.0;
      for (int j = 0; j < cols_; ++j) {
        const auto u = static_cast<std::size_t>(j);
        if (state_[u] == State::Basic || lo_[u] == hi_[u]) continue;
        const double d = c[u] - (m_ > 0 ? y.dot(a_.col(j)) : 0.0);
        double dir = 0.0;
        if (state_[u] == State::AtLower && d < -opt_.optimality_tol) dir = 1.0;
        if (state_[u] == State::AtUpper && d > opt_.optimality_tol) dir = -1.0;
        if (state_[u] == State::FreeZero && std::abs(d) > opt_.optimality_tol) dir = d < 0.0 ? 1.0 : -1.0;
        if (dir == 0.0) continue;
        if (bland_) {
          enter = j;
          enter_dir = dir;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          enter = j;
          enter_dir = dir;
        }
      }
      if (enter < 0) {
        recompute_basic_values();
        return LpStatus::Optimal;
      }

      const Eigen::VectorXd w = m_ > 0 ? Eigen::VectorXd(binv_ * a_.col(enter)) : Eigen::VectorXd();
      const auto eu = static_cast<std::size_t>(enter);

      // Ratio test, Harris-style: find the smallest step with bounds relaxed
      // by the feasibility tolerance, then among rows blocking within that
      // step take the largest pivot (or the smallest index under Bland).
      constexpr double kPivotTol = 1e-9;
      const double tol = opt_.feasibility_tol;
      double relaxed = hi_[eu] - lo_[eu];
      for (int i = 0; i < m_; ++i) {
        const double rate = -enter_dir * w(i);
        if (std::abs(w(i)) <= kPivotTol) continue;
        const auto bu = static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)]);
        if (rate < 0.0 && std::isfinite(lo_[bu])) {
          relaxed = std::min(relaxed, (x_[bu] - lo_[bu] + tol) / -rate);
        } else if (rate > 0.0 && std::isfinite(hi_[bu])) {
          relaxed = std::min(relaxed, (hi_[bu] - x_[bu] + tol) / rate);
        }
      }
      if (!std::isfinite(relaxed)) return LpStatus::Unbounded;

      int leave = -1;
      double step = hi_[eu] - lo_[eu];
      double leave_pivot = 0.0;
      bool leave_to_upper = false;
      for (int i = 0; i < m_; ++i) {
        const double rate = -enter_dir * w(i);
        if (std::abs(w(i)) <= kPivotTol) continue;
        const auto bu = static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)]);
        double limit;
        bool to_upper;
        if (rate < 0.0 && std::isfinite(lo_[bu])) {
          limit = std::max(0.0, (x_[bu] - lo_[bu]) / -rate);
          to_upper = false;
        } else if (rate > 0.0 && std::isfinite(hi_[bu])) {
          limit = std::max(0.0, (hi_[bu] - x_[bu]) / rate);
          to_upper = true;
        } else {
          continue;
        }
        if (limit > relaxed) continue;
        const bool better =
            leave < 0 ||
            (bland_ ? basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)]
                    : std::abs(w(i)) > leave_pivot);
        if (better) {
          leave = i;
          leave_pivot = std::abs(w(i));
          leave_to_upper = to_upper;
          step = limit;
        }
      }
      if (leave >= 0 && step > hi_[eu] - lo_[eu]) {
        // The entering variable's own bound is tighter than the chosen row.
        leave = -1;
        step = hi_[eu] - lo_[eu];
      }

      ++iterations_;
      ++since_refactor;
      stalled_ = (step <= 1e-12) ? stalled_ + 1 : 0;
      if (stalled_ >= opt_.stall_limit) {
        bland_ = true;
        used_bland_ = true;
      }

      x_[eu] += enter_dir * step;
      for (int i = 0; i < m_; ++i) x_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])] -= enter_dir * step * w(i);

      if (leave < 0) {
        // Bound flip.
        if (enter_dir > 0.0) {
          x_[eu] = hi_[eu];
          state_[eu] = State::AtUpper;
        } else {
          x_[eu] = lo_[eu];
          state_[eu] = State::AtLower;
        }
        continue;
      }

      const auto lu = static_cast<std::size_t>(basis_[static_cast<std::size_t>(leave)]);
      x_[lu] = leave_to_upper ? hi_[lu] : lo_[lu];
      state_[lu] = leave_to_upper ? State::AtUpper : State::AtLower;
      basis_[static_cast<std::size_t>(leave)] = enter;
      state_[eu] = State::Basic;

      // Product-form update of the explicit inverse.
      const double piv = w(leave);
      binv_.row(leave) /= piv;
      for (int i = 0; i < m_; ++i) {
        if (i != leave && w(i) != 0.0) binv_.row(i) -= w(i) * binv_.row(leave);
      }
    }
  }

  LpSolution& finish(LpSolution& sol, LpStatus status) {
    sol.status = status;
    sol.iterations = iterations_;
    sol.used_bland = used_bland_;
    sol.x.assign(x_.begin(), x_.begin() + n_);
    if (status == LpStatus::Optimal) {
      // Snap structurals that drifted within tolerance of a bound.
      for (int j = 0; j < n_; ++j) {
        const auto u = static_cast<std::size_t>(j);
        sol.x[u] = std::clamp(sol.x[u], p_.lower[u], p_.upper[u]);
      }
    }
    sol.objective = 0.0;
    for (int j = 0; j < n_; ++j) sol.objective += p_.objective[static_cast<std::size_t>(j)] * sol.x[static_cast<std::size_t>(j)];
    sol.max_infeasibility = max_primal_infeasibility(p_, sol.x);
    return sol;
  }

  const LpProblem& p_;
  const LpOptions& opt_;
  int m_ = 0, n_ = 0, cols_ = 0;
  int first_slack_ = 0, first_artificial_ = 0, num_artificial_ = 0;
  int max_iter_ = 0;
  int iterations_ = 0;
  int stalled_ = 0;
  bool bland_ = false;
  bool used_bland_ = false;
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  Eigen::MatrixXd binv_;
  std::vector<double> lo_, hi_, x_;
  std::vector<State> state_;
  std::vector<int> basis_;
};

}  // namespace detail

inline LpSolution solve_lp(const LpProblem& p, const LpOptions& opt = {}) {
  p.validate();
  detail::BoundedSimplex simplex(p, opt);
  return simplex.run();
}

}  // namespace nortasp
