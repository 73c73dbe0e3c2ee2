#pragma once

// File-to-file pipeline commands. Each command reads and validates every
// input before computing, writes its artifacts, and writes a manifest sidecar
// next to each artifact. JSON artifacts also embed the deterministic part of
// the manifest, so identical inputs and seeds give byte-identical artifacts.

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nortasp/errors.hpp"
#include "nortasp/grid.hpp"
#include "nortasp/io.hpp"
#include "nortasp/manifest.hpp"
#include "nortasp/norta.hpp"
#include "nortasp/twostage.hpp"
#include "nortasp/validation.hpp"

namespace nortasp::cli {

using io::json;

inline constexpr std::size_t kDefaultSyntheticCount = 800;
inline constexpr std::size_t kDefaultSweepPoints = 9;

struct RunContext {
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool quiet = false;
  std::ostream* log = &std::cerr;

  void info(const std::string& msg) const {
    if (!quiet && log) *log << msg << '\n';
  }
};

enum class FirstStageMethod { BranchAndBound, Greedy };

inline std::string to_string(FirstStageMethod m) {
  return m == FirstStageMethod::Greedy ? "greedy" : "branch-and-bound";
}

namespace detail {

inline void add_norta_tolerances(RunManifest& man) {
  const FitOptions d;
  man.add_tolerance("correlation_match", d.matching.tolerance);
  man.add_tolerance("nearest_correlation", d.repair.tolerance);
}

inline void add_recourse_tolerances(RunManifest& man) {
  const LpOptions d;
  man.add_tolerance("lp_feasibility", d.feasibility_tol);
  man.add_tolerance("lp_optimality", d.optimality_tol);
  man.add_tolerance("recourse_residual", kRecourseResidualTol);
  man.add_tolerance("objective_tie", 1e-9);
  man.add_tolerance("budget_relative", 1e-9);
}

inline void write_json(const std::string& path, json j, const RunManifest& man) {
  j["manifest"] = man.embedded();
  io::write_file(path, io::dump(j));
}

inline ScenarioSet scenarios_input(RunManifest& man, const std::string& path) {
  return io::parse_scenarios_csv(man.add_input(path), path);
}

inline GridInstance grid_input(RunManifest& man, const std::string& path) {
  return io::grid_from_json(io::parse_json(man.add_input(path), path), path);
}

inline json budgets_json(const std::vector<double>& budgets) { return json(budgets); }

inline json summary_json(const SummaryStats& s) {
  json j = json::object();
  for (std::size_t r = 0; r < 7; ++r) j[SummaryStats::kRowNames[r]] = s.row(r);
  return j;
}

inline json summary_rows(const SummaryStats& s) {
  json rows = json::array();
  for (std::size_t r = 0; r < 7; ++r) rows.push_back(s.row(r));
  return rows;
}

inline json plan_heights_json(const GridInstance& g, const HardeningPlan& plan) {
  json subs = json::array();
  for (std::size_t i = 0; i < g.num_flooded(); ++i) {
    subs.push_back({{"id", g.flooded_substation(i).id}, {"protect", plan.protect[i]}, {"height", plan.height[i]}});
  }
  return subs;
}

}  // namespace detail

// Budgets 0, S/(n-1), ..., S where S is the saturation budget.
inline std::vector<double> default_budgets(const TwoStageProblem& p, std::size_t n = kDefaultSweepPoints) {
  const double s = saturation_budget(p);
  std::vector<double> b;
  for (std::size_t k = 0; k < n; ++k) b.push_back(n == 1 ? s : s * static_cast<double>(k) / static_cast<double>(n - 1));
  return b;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct ReportColumn {
  std::string method;
  OosReport oos;
};

inline const std::vector<std::string>& report_row_names() {
  static const std::vector<std::string> rows = {"SO estimate", "mean", "std", "min", "25%", "50%", "75%", "max"};
  return rows;
}

inline double report_cell(const ReportColumn& c, std::size_t row) {
  return row == 0 ? c.oos.so_estimate : c.oos.shed.row(row - 1);
}

// Statistic rows x budget columns; "SO estimate" first, then the seven
// summary statistics of out-of-sample shed.
inline json report_to_json(const GridInstance& g, const std::vector<ReportColumn>& cols) {
  json budgets = json::array();
  json table = json::array();
  for (std::size_t r = 0; r < report_row_names().size(); ++r) {
    json row = json::array();
    for (const auto& c : cols) row.push_back(report_cell(c, r));
    table.push_back(std::move(row));
  }
  json columns = json::array();
  for (const auto& c : cols) {
    budgets.push_back(c.oos.budget);
    columns.push_back({{"budget", c.oos.budget},
                       {"method", c.method},
                       {"so_estimate", c.oos.so_estimate},
                       {"hardening_cost", hardening_cost(g, c.oos.plan)},
                       {"first_stage_cost", c.oos.first_stage_cost},
                       {"v_oos", c.oos.v_oos},
                       {"count", c.oos.count},
                       {"shed", detail::summary_json(c.oos.shed)},
                       {"substations", detail::plan_heights_json(g, c.oos.plan)}});
  }
  return {{"format", "nortasp-report"},
          {"version", 1},
          {"statistics", report_row_names()},
          {"budgets", std::move(budgets)},
          {"table", std::move(table)},
          {"columns", std::move(columns)},
          {"conventions",
           {{"shed_units", "instance power units"},
            {"std_denominator", "M - 1"},
            {"quantiles", "linear interpolation between order statistics at position p * (M - 1)"}}}};
}

inline std::string report_to_csv(const std::vector<ReportColumn>& cols) {
  std::string out = "statistic";
  for (const auto& c : cols) out += "," + io::format_double(c.oos.budget);
  out += '\n';
  for (std::size_t r = 0; r < report_row_names().size(); ++r) {
    out += report_row_names()[r];
    for (const auto& c : cols) out += "," + io::format_double(report_cell(c, r));
    out += '\n';
  }
  return out;
}

inline json plans_file_json(const GridInstance& g, const std::vector<io::PlanRecord>& plans) {
  json arr = json::array();
  for (const auto& r : plans) arr.push_back(io::plan_to_json(g, r));
  return {{"format", "nortasp-plans"}, {"version", 1}, {"plans", std::move(arr)}};
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline NortaModel cmd_fit(const std::string& scenarios_path, const std::string& out, const RunContext& ctx = {}) {
  RunManifest man("fit");
  const ScenarioSet s = detail::scenarios_input(man, scenarios_path);
  detail::add_norta_tolerances(man);
  FitOptions opt;
  opt.threads = std::max(1u, ctx.threads);
  NortaModel m = fit(s, opt);
  detail::write_json(out, io::model_to_json(m), man);
  man.write_sidecars({out});
  ctx.info("fit: " + std::to_string(m.dim()) + " marginals from " + std::to_string(s.count()) +
           " scenarios; repair distance " + io::format_double(m.report.repair_distance) + "; wrote " + out);
  return m;
}

inline ScenarioSet cmd_generate(const std::string& model_path, std::size_t count, const std::string& out,
                                const RunContext& ctx = {}) {
  RunManifest man("generate");
  if (count == 0) throw InputError("generate: --count must be positive");
  const NortaModel m = io::model_from_json(io::parse_json(man.add_input(model_path), model_path), model_path);
  const std::uint64_t seed = ctx.seed.value_or(0);
  man.set_seed(seed);
  man.add_parameter("count", count);
  const ScenarioSet s = sample(m, count, seed);
  io::write_file(out, io::scenarios_to_csv(s));
  man.write_sidecars({out});
  ctx.info("generate: " + std::to_string(count) + " scenarios (seed " + std::to_string(seed) + "); wrote " + out);
  return s;
}

inline ValidationReport cmd_validate(const std::string& scenarios_path, const std::string& synth_path,
                                     const std::string& out, const RunContext& ctx = {}) {
  RunManifest man("validate");
  const ScenarioSet a = detail::scenarios_input(man, scenarios_path);
  const ScenarioSet b = detail::scenarios_input(man, synth_path);
  const ValidationReport r = validate_synthetic(a, b);

  json dims = json::array();
  for (std::size_t i = 0; i < r.labels.size(); ++i) dims.push_back({{"label", r.labels[i]}, {"emd", r.emd[i]}});
  json pairs = json::array();
  for (const auto& p : r.pairs) {
    pairs.push_back({{"i", r.labels[p.i]},
                     {"j", r.labels[p.j]},
                     {"original", p.original},
                     {"synthetic", p.synthetic},
                     {"abs_error", p.abs_error}});
  }
  json summary = {{"statistics", std::vector<std::string>(std::begin(SummaryStats::kRowNames),
                                                          std::end(SummaryStats::kRowNames))},
                  {"emd", detail::summary_rows(r.emd_summary)},
                  {"correlation_error", r.corr_summary ? detail::summary_rows(*r.corr_summary) : json(nullptr)}};
  json j = {{"format", "nortasp-validation"},
            {"version", 1},
            {"original_count", a.count()},
            {"synthetic_count", b.count()},
            {"summary", std::move(summary)},
            {"dimensions", std::move(dims)},
            {"pairs", std::move(pairs)}};
  detail::write_json(out, std::move(j), man);
  man.write_sidecars({out});
  ctx.info("validate: mean EMD " + io::format_double(r.emd_summary.mean) + ", mean |corr error| " +
           (r.corr_summary ? io::format_double(r.corr_summary->mean) : std::string("n/a")) + "; wrote " + out);
  return r;
}

struct SolveOptions {
  std::vector<double> budgets;  // empty: the grid's budget
  FirstStageMethod method = FirstStageMethod::BranchAndBound;
  FirstStageOptions first_stage;
};

inline std::vector<io::PlanRecord> solve_plans(const TwoStageProblem& p, std::vector<double> budgets,
                                               const SolveOptions& opt) {
  std::stable_sort(budgets.begin(), budgets.end());
  std::vector<io::PlanRecord> out;
  for (double b : budgets) {
    io::PlanRecord r;
    r.budget = b;
    r.method = to_string(opt.method);
    if (opt.method == FirstStageMethod::Greedy) {
      r.plan = greedy_first_stage(p, b);
      r.so_estimate = saa_objective(p, r.plan);
    } else {
      const FirstStageResult f = solve_first_stage(p, b, opt.first_stage);
      r.plan = f.plan;
      r.so_estimate = f.value;
      r.nodes = f.nodes;
    }
    r.cost = hardening_cost(p.grid, r.plan);
    out.push_back(std::move(r));
  }
  return out;
}

namespace detail {

inline void check_budgets(const std::vector<double>& budgets) {
  for (double b : budgets) {
    if (!std::isfinite(b) || b < 0.0) throw InputError("budget " + io::format_double(b) + " must be finite and >= 0");
  }
}

inline void add_solve_parameters(RunManifest& man, const SolveOptions& opt, const std::vector<double>& budgets) {
  man.add_parameter("budgets", budgets);
  man.add_parameter("method", to_string(opt.method));
  man.add_parameter("node_limit", opt.first_stage.node_limit);
}

}  // namespace detail

inline std::vector<io::PlanRecord> cmd_solve(const std::string& grid_path, const std::string& scenarios_path,
                                             const std::string& out, const SolveOptions& opt,
                                             const RunContext& ctx = {}) {
  RunManifest man("solve");
  const GridInstance g = detail::grid_input(man, grid_path);
  const ScenarioSet s = detail::scenarios_input(man, scenarios_path);
  io::check_scenario_labels(g, s, scenarios_path);
  std::vector<double> budgets = opt.budgets.empty() ? std::vector<double>{g.budget()} : opt.budgets;
  detail::check_budgets(budgets);
  std::stable_sort(budgets.begin(), budgets.end());
  detail::add_recourse_tolerances(man);
  detail::add_solve_parameters(man, opt, budgets);

  const TwoStageProblem p{g, s, {}};
  const auto plans = solve_plans(p, budgets, opt);
  detail::write_json(out, plans_file_json(g, plans), man);
  man.write_sidecars({out});
  for (const auto& r : plans) {
    ctx.info("solve: budget " + io::format_double(r.budget) + " -> SO estimate " + io::format_double(r.so_estimate) +
             " at cost " + io::format_double(r.cost));
  }
  ctx.info("solve: wrote " + out);
  return plans;
}

struct EvaluateOutputs {
  std::string json_path;
  std::string csv_path;
};

inline std::vector<ReportColumn> cmd_evaluate(const std::string& grid_path, const std::string& plan_path,
                                              const std::string& synth_path, const EvaluateOutputs& out,
                                              const RunContext& ctx = {}) {
  RunManifest man("evaluate");
  const GridInstance g = detail::grid_input(man, grid_path);
  const json pj = io::parse_json(man.add_input(plan_path), plan_path);
  const auto plans = io::plans_from_json(g, pj, plan_path);
  const ScenarioSet synth = detail::scenarios_input(man, synth_path);
  io::check_scenario_labels(g, synth, synth_path);
  detail::add_recourse_tolerances(man);

  // The SO estimates come from the plan file; the synthetic set stands in as
  // the problem's scenario set only to satisfy its shape checks.
  const TwoStageProblem p{g, synth, {}};
  EvaluateOptions eo;
  eo.threads = std::max(1u, ctx.threads);
  eo.compute_so_estimate = false;
  std::vector<ReportColumn> cols;
  for (const auto& r : plans) {
    ReportColumn c{r.method, evaluate_oos(p, r.plan, synth, eo)};
    c.oos.budget = r.budget;
    c.oos.so_estimate = r.so_estimate;
    cols.push_back(std::move(c));
  }
  detail::write_json(out.json_path, report_to_json(g, cols), man);
  io::write_file(out.csv_path, report_to_csv(cols));
  man.write_sidecars({out.json_path, out.csv_path});
  ctx.info("evaluate: " + std::to_string(cols.size()) + " plan(s) on " + std::to_string(synth.count()) +
           " scenarios; wrote " + out.json_path + " and " + out.csv_path);
  return cols;
}

struct SweepOutputs {
  std::string json_path;
  std::string csv_path;
  std::string plans_path;  // optional
};

// solve + evaluate across budgets; with no budgets given, nine evenly spaced
// budgets from 0 to the saturation budget.
inline std::vector<ReportColumn> cmd_sweep(const std::string& grid_path, const std::string& scenarios_path,
                                           const std::string& synth_path, const SweepOutputs& out,
                                           const SolveOptions& opt, const RunContext& ctx = {}) {
  RunManifest man("sweep");
  const GridInstance g = detail::grid_input(man, grid_path);
  const ScenarioSet s = detail::scenarios_input(man, scenarios_path);
  io::check_scenario_labels(g, s, scenarios_path);
  const ScenarioSet synth = detail::scenarios_input(man, synth_path);
  io::check_scenario_labels(g, synth, synth_path);
  const TwoStageProblem p{g, s, {}};
  std::vector<double> budgets = opt.budgets.empty() ? default_budgets(p) : opt.budgets;
  detail::check_budgets(budgets);
  std::stable_sort(budgets.begin(), budgets.end());
  detail::add_recourse_tolerances(man);
  detail::add_solve_parameters(man, opt, budgets);

  const auto plans = solve_plans(p, budgets, opt);
  EvaluateOptions eo;
  eo.threads = std::max(1u, ctx.threads);
  eo.compute_so_estimate = false;
  std::vector<ReportColumn> cols;
  for (const auto& r : plans) {
    ReportColumn c{r.method, evaluate_oos(p, r.plan, synth, eo)};
    c.oos.budget = r.budget;
    c.oos.so_estimate = r.so_estimate;
    ctx.info("sweep: budget " + io::format_double(r.budget) + " -> SO estimate " +
             io::format_double(r.so_estimate) + ", OOS mean " + io::format_double(c.oos.shed.mean));
    cols.push_back(std::move(c));
  }
  std::vector<std::string> written{out.json_path, out.csv_path};
  detail::write_json(out.json_path, report_to_json(g, cols), man);
  io::write_file(out.csv_path, report_to_csv(cols));
  if (!out.plans_path.empty()) {
    detail::write_json(out.plans_path, plans_file_json(g, plans), man);
    written.push_back(out.plans_path);
  }
  man.write_sidecars(written);
  ctx.info("sweep: wrote " + out.json_path + " and " + out.csv_path);
  return cols;
}

namespace detail {

inline InstanceSpec instance_spec_from_json(const json& j, const std::string& name) {
  if (!j.is_object()) throw InputError(name + ": expected a JSON object");
  static const std::set<std::string> known = {"n_substations", "n_flooded", "buses_per_substation", "topology",
                                              "scenarios",     "max_height", "budget",              "seed"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw InputError(name + "." + key + ": unknown field");
  }
  InstanceSpec s;
  if (j.contains("n_substations")) s.n_substations = io::detail::integer(j, "n_substations", name);
  if (j.contains("n_flooded")) s.n_flooded = io::detail::integer(j, "n_flooded", name);
  if (j.contains("buses_per_substation")) s.buses_per_substation = io::detail::integer(j, "buses_per_substation", name);
  if (j.contains("scenarios")) s.scenarios = io::detail::integer(j, "scenarios", name);
  if (j.contains("max_height")) s.max_height = io::detail::integer(j, "max_height", name);
  if (j.contains("budget")) s.budget = io::detail::number(j, "budget", name);
  if (j.contains("topology")) {
    if (!j["topology"].is_string()) throw InputError(name + ".topology: expected a string");
    try {
      s.topology = parse_topology(j["topology"].get<std::string>());
    } catch (const InputError& e) {
      throw InputError(name + ".topology: " + e.what());
    }
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw InputError(name + ".seed: expected a non-negative integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  try {
    s.validate();
  } catch (const InputError& e) {
    throw InputError(name + ": " + e.what());
  }
  return s;
}

}  // namespace detail

// --seed overrides the spec's seed.
inline GeneratedInstance cmd_make_instance(const std::string& spec_path, const std::string& grid_out,
                                           const std::string& scenarios_out, const RunContext& ctx = {}) {
  RunManifest man("make-instance");
  InstanceSpec spec = detail::instance_spec_from_json(io::parse_json(man.add_input(spec_path), spec_path), spec_path);
  if (ctx.seed) spec.seed = *ctx.seed;
  man.set_seed(spec.seed);
  GeneratedInstance inst = generate_instance(spec);
  detail::write_json(grid_out, io::grid_to_json(inst.grid), man);
  io::write_file(scenarios_out, io::scenarios_to_csv(inst.scenarios));
  man.write_sidecars({grid_out, scenarios_out});
  ctx.info("make-instance: " + std::to_string(inst.grid.substations().size()) + " substations (" +
           std::to_string(inst.grid.num_flooded()) + " flooded), " + std::to_string(inst.scenarios.count()) +
           " scenarios; wrote " + grid_out + " and " + scenarios_out);
  return inst;
}

}  // namespace nortasp::cli
