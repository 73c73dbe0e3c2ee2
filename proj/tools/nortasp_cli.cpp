// nortasp_cli: scenario fitting, generation, validation, hardening and
// out-of-sample evaluation from the command line.
//
// Exit codes: 0 success, 2 input validation, 3 numerical failure,
// 4 resource limit.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nortasp/pipeline.hpp"

namespace {

using namespace nortasp;

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitResource = 4;

// "report.json" -> {"report.json", "report.csv"}; other names get both suffixes.
cli::EvaluateOutputs report_paths(const std::string& out) {
  const std::string ext = ".json";
  if (out.size() > ext.size() && out.compare(out.size() - ext.size(), ext.size(), ext) == 0) {
    return {out, out.substr(0, out.size() - ext.size()) + ".csv"};
  }
  return {out + ".json", out + ".csv"};
}

cli::FirstStageMethod parse_method(const std::string& s) {
  if (s == "bnb" || s == "branch-and-bound") return cli::FirstStageMethod::BranchAndBound;
  if (s == "greedy") return cli::FirstStageMethod::Greedy;
  throw InputError("--method must be bnb or greedy (got '" + s + "')");
}

int run(int argc, char** argv) {
  CLI::App app{"NORTA scenario generation and two-stage substation hardening"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool quiet = false;
  app.add_option("--seed", seed, "Random seed for generate and make-instance");
  app.add_option("--threads", threads, "Worker threads for fit and evaluation")->check(CLI::PositiveNumber);
  app.add_flag("--quiet,-q", quiet, "Suppress progress messages");

  std::string in_a, in_b, in_c, out;
  std::vector<std::string> outs;
  std::size_t count = cli::kDefaultSyntheticCount;
  std::optional<double> budget;
  std::vector<double> budgets;
  std::string method = "bnb";
  std::size_t node_limit = FirstStageOptions{}.node_limit;
  std::string plans_out;

  auto* fit = app.add_subcommand("fit", "Fit a NORTA model to a scenario CSV");
  fit->add_option("scenarios", in_a, "Scenario CSV")->required();
  fit->add_option("--out", out, "Model JSON")->required();

  auto* gen = app.add_subcommand("generate", "Sample synthetic scenarios from a model");
  gen->add_option("model", in_a, "Model JSON")->required();
  gen->add_option("--count,-m", count, "Number of scenarios")->capture_default_str();
  gen->add_option("--out", out, "Synthetic scenario CSV")->required();

  auto* val = app.add_subcommand("validate", "Compare synthetic scenarios with the originals");
  val->add_option("scenarios", in_a, "Original scenario CSV")->required();
  val->add_option("synthetic", in_b, "Synthetic scenario CSV")->required();
  val->add_option("--out", out, "Validation JSON")->required();

  auto add_solver_options = [&](CLI::App* c) {
    auto* b1 = c->add_option("--budget", budget, "Single budget");
    auto* b2 = c->add_option("--budgets", budgets, "Comma-separated budgets")->delimiter(',');
    b1->excludes(b2);
    c->add_option("--method", method, "bnb (exact) or greedy")->capture_default_str();
    c->add_option("--node-limit", node_limit, "Branch-and-bound node limit")->capture_default_str();
  };

  auto* solve = app.add_subcommand("solve", "Choose hardening plans for one or more budgets");
  solve->add_option("grid", in_a, "Grid JSON")->required();
  solve->add_option("scenarios", in_b, "Training scenario CSV")->required();
  solve->add_option("--out", out, "Plan JSON")->required();
  add_solver_options(solve);

  auto* eval = app.add_subcommand("evaluate", "Evaluate plans on out-of-sample scenarios");
  eval->add_option("grid", in_a, "Grid JSON")->required();
  eval->add_option("plans", in_b, "Plan JSON")->required();
  eval->add_option("synthetic", in_c, "Out-of-sample scenario CSV")->required();
  eval->add_option("--out", out, "Report path; writes <out>.json and <out>.csv")->required();

  auto* mk = app.add_subcommand("make-instance", "Generate a synthetic grid and flood scenarios");
  mk->add_option("--spec", in_a, "Instance spec JSON")->required();
  mk->add_option("--out", outs, "Grid JSON and scenario CSV")->expected(2)->required();

  auto* sweep = app.add_subcommand("sweep", "Solve and evaluate across budgets");
  sweep->add_option("grid", in_a, "Grid JSON")->required();
  sweep->add_option("scenarios", in_b, "Training scenario CSV")->required();
  sweep->add_option("synthetic", in_c, "Out-of-sample scenario CSV")->required();
  sweep->add_option("--out", out, "Report path; writes <out>.json and <out>.csv")->required();
  sweep->add_option("--plans-out", plans_out, "Also write the plans JSON");
  add_solver_options(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  cli::RunContext ctx;
  ctx.seed = seed;
  ctx.threads = threads;
  ctx.quiet = quiet;

  cli::SolveOptions so;
  if (budget) so.budgets = {*budget};
  if (!budgets.empty()) so.budgets = budgets;
  so.method = parse_method(method);
  so.first_stage.node_limit = node_limit;

  if (fit->parsed()) {
    cli::cmd_fit(in_a, out, ctx);
  } else if (gen->parsed()) {
    cli::cmd_generate(in_a, count, out, ctx);
  } else if (val->parsed()) {
    cli::cmd_validate(in_a, in_b, out, ctx);
  } else if (solve->parsed()) {
    cli::cmd_solve(in_a, in_b, out, so, ctx);
  } else if (eval->parsed()) {
    cli::cmd_evaluate(in_a, in_b, in_c, report_paths(out), ctx);
  } else if (mk->parsed()) {
    cli::cmd_make_instance(in_a, outs[0], outs[1], ctx);
  } else if (sweep->parsed()) {
    const auto paths = report_paths(out);
    cli::cmd_sweep(in_a, in_b, in_c, {paths.json_path, paths.csv_path, plans_out}, so, ctx);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const nortasp::ResourceLimitError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitResource;
  } catch (const nortasp::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const nortasp::ContractError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}
