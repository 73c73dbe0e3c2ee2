#pragma once

// Two-stage flood-hardening program.
//
// First stage: integer barrier heights x over flooded substations within a
// budget. Second stage, per scenario: with bus availability z fixed by
// (x, flood heights), a DC power-flow LP minimizes load shed.
//
//   min  sum_j (D_j - s_j)
//   s.t. 0 <= s_j <= D_j z_j,   0 <= g_j <= Gmax_j z_j
//        |e_r| <= F_r min(z_h, z_t)
//        e_r = B_r (a_h - a_t)               branches with both ends live
//        sum_{head=j} e - sum_{tail=j} e = g_j - s_j
//        |a_j| <= pi, a = 0 at the lowest-id bus of every live island

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "nortasp/errors.hpp"
#include "nortasp/grid.hpp"
#include "nortasp/lp.hpp"
#include "nortasp/scenario.hpp"
#include "nortasp/stats.hpp"

namespace nortasp {

// Largest admissible flow-balance or coupling violation in a recourse solution.
inline constexpr double kRecourseResidualTol = 1e-7;

// Recourse LP did not reach optimality. Never swallowed.
class RecourseError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct RecourseSolution {
  std::vector<std::uint8_t> z;
  std::vector<double> s;
  std::vector<double> g;
  std::vector<std::uint8_t> u;  // == z
  std::vector<double> alpha;
  std::vector<double> e;
  double shed = 0.0;
  double max_residual = 0.0;  // worst violation of balance, coupling and bounds
  int lp_iterations = 0;
};

// Largest violation of the recourse constraints by a candidate solution.
inline double recourse_residual(const GridInstance& g, const RecourseSolution& r) {
  double worst = 0.0;
  const auto& buses = g.buses();
  for (std::size_t j = 0; j < g.num_buses(); ++j) {
    const double z = r.z[j];
    worst = std::max({worst, -r.s[j], r.s[j] - buses[j].demand * z, -r.g[j], r.g[j] - buses[j].gen_max * z,
                      std::abs(r.alpha[j]) - std::numbers::pi});
    double net = 0.0;
    for (std::size_t k : g.out_branches(j)) net += r.e[k];
    for (std::size_t k : g.in_branches(j)) net -= r.e[k];
    worst = std::max(worst, std::abs(net - (r.g[j] - r.s[j])));
  }
  for (std::size_t k = 0; k < g.num_branches(); ++k) {
    const Branch& br = g.branches()[k];
    const double live = std::min(r.z[g.head(k)], r.z[g.tail(k)]);
    worst = std::max(worst, std::abs(r.e[k]) - br.capacity * live);
    if (live > 0.0) {
      const double coupled = br.susceptance * (r.alpha[g.head(k)] - r.alpha[g.tail(k)]);
      worst = std::max(worst, std::abs(r.e[k] - coupled));
    }
  }
  return worst;
}

// Solves the recourse LP for a fixed availability vector z.
inline RecourseSolution recourse_for_availability(const GridInstance& g, std::vector<std::uint8_t> z,
                                                  const LpOptions& lp_opt = {}) {
  const std::size_t nb = g.num_buses();
  const std::size_t nr = g.num_branches();
  const auto& buses = g.buses();

  std::vector<bool> pinned(nb, false);
  for (const auto& comp : connected_components(g, z)) pinned[comp.front()] = true;

  // Only live buses and live branches get columns; everything else is zero.
  LpProblem lp;
  std::vector<int> s_col(nb, -1), g_col(nb, -1), a_col(nb, -1), e_col(nr, -1);
  for (std::size_t j = 0; j < nb; ++j) {
    if (!z[j]) continue;
    s_col[j] = lp.add_variable(-1.0, 0.0, buses[j].demand);
    g_col[j] = lp.add_variable(0.0, 0.0, buses[j].gen_max);
    const double a = pinned[j] ? 0.0 : std::numbers::pi;
    a_col[j] = lp.add_variable(0.0, -a, a);
  }
  for (std::size_t k = 0; k < nr; ++k) {
    if (z[g.head(k)] && z[g.tail(k)]) {
      const double f = g.branches()[k].capacity;
      e_col[k] = lp.add_variable(0.0, -f, f);
    }
  }
  for (std::size_t j = 0; j < nb; ++j) {
    if (!z[j]) continue;
    std::vector<std::pair<int, double>> row;
    for (std::size_t k : g.out_branches(j)) {
      if (e_col[k] >= 0) row.emplace_back(e_col[k], 1.0);
    }
    for (std::size_t k : g.in_branches(j)) {
      if (e_col[k] >= 0) row.emplace_back(e_col[k], -1.0);
    }
    row.emplace_back(g_col[j], -1.0);
    row.emplace_back(s_col[j], 1.0);
    lp.add_row(std::move(row), Sense::Equal, 0.0);
  }
  for (std::size_t k = 0; k < nr; ++k) {
    if (e_col[k] < 0) continue;
    const double b = g.branches()[k].susceptance;
    lp.add_row({{e_col[k], 1.0}, {a_col[g.head(k)], -b}, {a_col[g.tail(k)], b}}, Sense::Equal, 0.0);
  }

  const LpSolution sol = solve_lp(lp, lp_opt);
  if (sol.status != LpStatus::Optimal) {
    std::size_t live = 0;
    for (auto v : z) live += v;
    throw RecourseError(std::string("recourse LP ended with status ") + to_string(sol.status) + " after " +
                        std::to_string(sol.iterations) + " iterations (" + std::to_string(live) + " of " +
                        std::to_string(nb) + " buses live, " + std::to_string(lp.num_rows()) + " rows, " +
                        std::to_string(lp.num_vars()) + " columns)");
  }

  RecourseSolution r;
  r.s.assign(nb, 0.0);
  r.g.assign(nb, 0.0);
  r.alpha.assign(nb, 0.0);
  r.e.assign(nr, 0.0);
  double served = 0.0, demand = 0.0;
  for (std::size_t j = 0; j < nb; ++j) {
    demand += buses[j].demand;
    if (!z[j]) continue;
    r.s[j] = sol.x[static_cast<std::size_t>(s_col[j])];
    r.g[j] = sol.x[static_cast<std::size_t>(g_col[j])];
    r.alpha[j] = sol.x[static_cast<std::size_t>(a_col[j])];
    served += r.s[j];
  }
  for (std::size_t k = 0; k < nr; ++k) {
    if (e_col[k] >= 0) r.e[k] = sol.x[static_cast<std::size_t>(e_col[k])];
  }
  r.shed = std::clamp(demand - served, 0.0, demand);
  r.u = z;
  r.z = std::move(z);
  r.lp_iterations = sol.iterations;
  r.max_residual = recourse_residual(g, r);
  if (r.max_residual > kRecourseResidualTol) {
    throw RecourseError("recourse solution violates flow constraints by " + std::to_string(r.max_residual));
  }
  return r;
}

inline RecourseSolution recourse(const GridInstance& g, const HardeningPlan& plan, std::span<const int> delta,
                                 const LpOptions& lp_opt = {}) {
  return recourse_for_availability(g, operational_topology(g, plan, delta), lp_opt);
}

// Memoizes shed by availability pattern; the recourse value depends on the
// plan and scenario only through z. Not thread-safe: use one per thread.
class ShedCache {
 public:
  explicit ShedCache(const GridInstance& g) : g_(&g) {}

  double shed(std::span<const int> heights, std::span<const int> delta) {
    std::string key(heights.size(), '\0');
    for (std::size_t i = 0; i < heights.size(); ++i) key[i] = heights[i] >= delta[i] ? '1' : '0';
    const auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    const double v = recourse_for_availability(*g_, operational_topology(*g_, heights, delta)).shed;
    memo_.emplace(std::move(key), v);
    return v;
  }

  std::size_t size() const { return memo_.size(); }

 private:
  const GridInstance* g_;
  std::map<std::string, double> memo_;
};

// ---------------------------------------------------------------------------
// SAA objective and first-stage optimization
// ---------------------------------------------------------------------------

struct TwoStageProblem {
  GridInstance grid;
  ScenarioSet scenarios;
  std::vector<double> first_stage_cost;  // per flooded slot; empty means zero

  void validate() const {
    scenarios.validate();
    if (scenarios.dim() != grid.num_flooded()) {
      throw InputError("scenarios have " + std::to_string(scenarios.dim()) + " columns but the grid has " +
                       std::to_string(grid.num_flooded()) + " flooded substations");
    }
    if (!first_stage_cost.empty()) {
      if (first_stage_cost.size() != grid.num_flooded()) {
        throw InputError("first-stage cost vector has wrong length");
      }
      for (double c : first_stage_cost) {
        if (!std::isfinite(c) || c < 0.0) throw InputError("first-stage costs must be finite and >= 0");
      }
    }
  }

  double linear_cost(std::span<const int> heights) const {
    double c = 0.0;
    for (std::size_t i = 0; i < first_stage_cost.size(); ++i) c += first_stage_cost[i] * heights[i];
    return c;
  }
};

namespace detail {

// Sum in fixed scenario order.
inline double expected_shed(const TwoStageProblem& p, ShedCache& cache, std::span<const int> heights) {
  double v = 0.0;
  for (std::size_t k = 0; k < p.scenarios.count(); ++k) {
    v += p.scenarios.probs[k] * cache.shed(heights, p.scenarios.heights[k]);
  }
  return v;
}

inline bool same_value(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

}  // namespace detail

inline double saa_objective(const TwoStageProblem& p, const HardeningPlan& plan, ShedCache& cache) {
  if (plan.height.size() != p.grid.num_flooded()) throw ContractError("saa_objective: plan has wrong length");
  return p.linear_cost(plan.height) + detail::expected_shed(p, cache, plan.height);
}

inline double saa_objective(const TwoStageProblem& p, const HardeningPlan& plan) {
  ShedCache cache(p.grid);
  return saa_objective(p, plan, cache);
}

struct FirstStageOptions {
  std::size_t node_limit = 1'000'000;
};

struct FirstStageResult {
  HardeningPlan plan;
  double value = 0.0;
  std::size_t nodes = 0;
};

// Exact depth-first branch-and-bound over x in prod [0, min(H_i, max_k D_ik)].
// A height strictly between two consecutive scenario levels yields the same
// availability as the lower level at no less cost, so only 0 and the
// distinct scenario levels are branched on. Ties in value go to the
// lexicographically smallest x.
inline FirstStageResult solve_first_stage(const TwoStageProblem& p, double budget,
                                          const FirstStageOptions& opt = {}) {
  p.validate();
  if (!(budget >= 0.0)) throw ContractError("solve_first_stage: budget must be >= 0");
  const GridInstance& g = p.grid;
  const std::size_t n = g.num_flooded();
  ShedCache cache(g);

  // Candidate heights per slot, descending; and slot order by max flood.
  std::vector<std::vector<int>> levels(n);
  std::vector<int> cap(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> lv{0};
    for (const auto& row : p.scenarios.heights) {
      if (row[i] >= 1 && row[i] <= g.flooded_substation(i).max_height) lv.push_back(row[i]);
    }
    std::sort(lv.begin(), lv.end());
    lv.erase(std::unique(lv.begin(), lv.end()), lv.end());
    cap[i] = lv.back();
    std::reverse(lv.begin(), lv.end());
    levels[i] = std::move(lv);
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::vector<int> max_flood(n, 0);
  for (const auto& row : p.scenarios.heights) {
    for (std::size_t i = 0; i < n; ++i) max_flood[i] = std::max(max_flood[i], row[i]);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return max_flood[a] > max_flood[b]; });

  FirstStageResult best;
  best.plan = HardeningPlan::none(n);
  best.value = saa_objective(p, best.plan, cache);

  std::vector<int> x(n, 0);
  std::vector<int> probe(n, 0);
  std::size_t nodes = 0;

  auto lex_less = [](std::span<const int> a, std::span<const int> b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  };

  // depth = number of slots decided, in `order`; spent = hardening cost so far.
  auto dfs = [&](auto&& self, std::size_t depth, double spent) -> void {
    if (++nodes > opt.node_limit) {
      throw ResourceLimitError("solve_first_stage: more than " + std::to_string(opt.node_limit) +
                               " branch-and-bound nodes; use the greedy heuristic for this instance");
    }
    if (depth == n) {
      const double v = saa_objective(p, HardeningPlan::from_heights(x), cache);
      if (v < best.value && !detail::same_value(v, best.value)) {
        best.value = v;
        best.plan = HardeningPlan::from_heights(x);
      } else if (detail::same_value(v, best.value) && lex_less(x, best.plan.height)) {
        best.value = v;
        best.plan = HardeningPlan::from_heights(x);
      }
      return;
    }
    // Bound: undecided slots at their cap (shed), at zero (linear cost).
    for (std::size_t d = 0; d < n; ++d) {
      const std::size_t i = order[d];
      probe[i] = d < depth ? x[i] : cap[i];
    }
    for (std::size_t d = depth; d < n; ++d) x[order[d]] = 0;
    const double bound = p.linear_cost(x) + detail::expected_shed(p, cache, probe);
    if (bound > best.value && !detail::same_value(bound, best.value)) return;
    // On a tie only a lexicographically smaller plan can still win; the
    // smallest plan in this subtree has every undecided slot at zero.
    if (detail::same_value(bound, best.value) && !lex_less(x, best.plan.height)) return;

    const std::size_t i = order[depth];
    const Substation& s = g.flooded_substation(i);
    for (int h : levels[i]) {
      const double c = h >= 1 ? s.fixed_cost + s.var_cost * h : 0.0;
      if (!within_budget(spent + c, budget)) continue;
      x[i] = h;
      self(self, depth + 1, spent + c);
      x[i] = 0;
    }
  };
  dfs(dfs, 0, 0.0);
  best.nodes = nodes;
  return best;
}

// Repeatedly applies the affordable single-substation raise (to any higher
// scenario level) with the largest shed reduction per unit cost; stops when
// nothing affordable reduces the objective.
inline HardeningPlan greedy_first_stage(const TwoStageProblem& p, double budget) {
  p.validate();
  if (!(budget >= 0.0)) throw ContractError("greedy_first_stage: budget must be >= 0");
  const GridInstance& g = p.grid;
  const std::size_t n = g.num_flooded();
  ShedCache cache(g);

  std::vector<std::vector<int>> levels(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& row : p.scenarios.heights) {
      if (row[i] >= 1 && row[i] <= g.flooded_substation(i).max_height) levels[i].push_back(row[i]);
    }
    std::sort(levels[i].begin(), levels[i].end());
    levels[i].erase(std::unique(levels[i].begin(), levels[i].end()), levels[i].end());
  }

  std::vector<int> x(n, 0);
  double value = p.linear_cost(x) + detail::expected_shed(p, cache, x);
  while (true) {
    const double spent = hardening_cost(g, x);
    double best_ratio = 0.0;
    std::size_t best_i = n;
    int best_h = 0;
    double best_value = value;
    for (std::size_t i = 0; i < n; ++i) {
      for (int h : levels[i]) {
        if (h <= x[i]) continue;
        std::vector<int> y = x;
        y[i] = h;
        const double cost = hardening_cost(g, y);
        if (!within_budget(cost, budget)) continue;
        const double v = p.linear_cost(y) + detail::expected_shed(p, cache, y);
        const double gain = value - v;
        if (gain <= 1e-12 * std::max(1.0, std::abs(value))) continue;
        const double dc = cost - spent;
        const double ratio = dc > 0.0 ? gain / dc : std::numeric_limits<double>::infinity();
        if (ratio > best_ratio) {
          best_ratio = ratio;
          best_i = i;
          best_h = h;
          best_value = v;
        }
      }
    }
    if (best_i == n) break;
    x[best_i] = best_h;
    value = best_value;
  }
  return HardeningPlan::from_heights(std::move(x));
}

// Cheapest plan that keeps every flooded substation dry in every training
// scenario (levels above H cannot be protected against).
inline HardeningPlan saturation_plan(const TwoStageProblem& p) {
  p.validate();
  std::vector<int> x(p.grid.num_flooded(), 0);
  for (const auto& row : p.scenarios.heights) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = std::max(x[i], std::min(row[i], p.grid.flooded_substation(i).max_height));
    }
  }
  return HardeningPlan::from_heights(std::move(x));
}

// Budget beyond which more money cannot lower the SAA objective.
inline double saturation_budget(const TwoStageProblem& p) { return hardening_cost(p.grid, saturation_plan(p)); }

// ---------------------------------------------------------------------------
// Out-of-sample evaluation
// ---------------------------------------------------------------------------

struct OosReport {
  double budget = 0.0;
  HardeningPlan plan;
  double so_estimate = 0.0;        // SAA value of the plan on the training scenarios
  double first_stage_cost = 0.0;   // c^T x
  SummaryStats shed;               // over the M out-of-sample scenarios
  double v_oos = 0.0;              // c^T x + mean out-of-sample shed
  std::size_t count = 0;           // M
  std::vector<double> sheds;       // per out-of-sample scenario, input order
};

struct EvaluateOptions {
  unsigned threads = 1;
  bool compute_so_estimate = true;  // false leaves so_estimate at 0
};

inline OosReport evaluate_oos(const TwoStageProblem& p, const HardeningPlan& plan, const ScenarioSet& synthetic,
                              const EvaluateOptions& opt = {}) {
  p.validate();
  if (synthetic.dim() != p.grid.num_flooded()) {
    throw InputError("synthetic scenarios have " + std::to_string(synthetic.dim()) + " columns, expected " +
                     std::to_string(p.grid.num_flooded()));
  }
  if (synthetic.count() == 0) throw InputError("synthetic scenario set is empty");
  if (plan.height.size() != p.grid.num_flooded()) throw ContractError("evaluate_oos: plan has wrong length");

  const std::size_t m = synthetic.count();
  std::vector<double> sheds(m, 0.0);
  const unsigned threads = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(m)));
  std::vector<std::string> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        ShedCache cache(p.grid);
        for (std::size_t k = t; k < m; k += threads) {
          try {
            sheds[k] = cache.shed(plan.height, synthetic.heights[k]);
          } catch (const std::exception& e) {
            errors[t] = "scenario " + std::to_string(k) + ": " + e.what();
            return;
          }
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw RecourseError("evaluate_oos: " + e);
  }

  OosReport r;
  r.plan = plan;
  if (opt.compute_so_estimate) r.so_estimate = saa_objective(p, plan);
  r.first_stage_cost = p.linear_cost(plan.height);
  r.shed = summarize(sheds);
  r.v_oos = r.first_stage_cost + r.shed.mean;
  r.count = m;
  r.sheds = std::move(sheds);
  return r;
}

struct SweepOptions {
  FirstStageOptions first_stage;
  EvaluateOptions evaluate;
  bool greedy = false;
};

// Reports in ascending budget order.
inline std::vector<OosReport> budget_sweep(const TwoStageProblem& p, std::vector<double> budgets,
                                           const ScenarioSet& synthetic, const SweepOptions& opt = {}) {
  if (budgets.empty()) throw ContractError("budget_sweep: no budgets");
  std::stable_sort(budgets.begin(), budgets.end());
  std::vector<OosReport> out;
  for (double b : budgets) {
    const HardeningPlan plan = opt.greedy ? greedy_first_stage(p, b) : solve_first_stage(p, b, opt.first_stage).plan;
    OosReport r = evaluate_oos(p, plan, synthetic, opt.evaluate);
    r.budget = b;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace nortasp
