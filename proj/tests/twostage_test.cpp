#include "nortasp/twostage.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "twostage_oracles.hpp"

namespace nortasp {
namespace {

// Generator bus 1 (substation 1, dry) feeding load bus 2 (substation 2,
// flooded) over one branch.
GridInstance two_bus(double capacity, double susceptance = 1.0, double demand = 5.0) {
  std::vector<Substation> subs{{1, false, 0, 0, 0}, {2, true, 1.0, 1.0, 3}};
  std::vector<Bus> buses{{1, 1, 0.0, 0.0, 10.0}, {2, 2, demand, 0.0, 0.0}};
  std::vector<Branch> branches{{1, 1, 2, susceptance, capacity}};
  return GridInstance(subs, buses, branches, 1, 10.0);
}

ScenarioSet scenarios(std::vector<std::vector<int>> rows, std::vector<std::string> labels) {
  ScenarioSet s;
  s.labels = std::move(labels);
  s.heights = std::move(rows);
  s.probs = ScenarioSet::uniform_probs(s.heights.size());
  return s;
}

void expect_physical(const GridInstance& g, const RecourseSolution& r) {
  EXPECT_LE(recourse_residual(g, r), 1e-7);
  EXPECT_GE(r.shed, 0.0);
  EXPECT_LE(r.shed, g.total_demand() + 1e-12);
  EXPECT_EQ(r.u, r.z);
}

TEST(RecourseTest, TwoBusServesAllDemand) {
  const GridInstance g = two_bus(10.0, 10.0);
  const auto r = recourse(g, HardeningPlan::none(1), std::vector<int>{0});
  EXPECT_NEAR(r.shed, 0.0, 1e-12);
  EXPECT_NEAR(r.e[0], 5.0, 1e-12);
  EXPECT_NEAR(r.g[0], 5.0, 1e-12);
  expect_physical(g, r);
}

TEST(RecourseTest, DeadLoadBusShedsEverything) {
  const GridInstance g = two_bus(10.0, 10.0);
  const auto r = recourse(g, HardeningPlan::none(1), std::vector<int>{1});
  EXPECT_EQ(r.z, (std::vector<std::uint8_t>{1, 0}));
  EXPECT_NEAR(r.shed, 5.0, 1e-12);
  EXPECT_EQ(r.e[0], 0.0);
  expect_physical(g, r);
  // A barrier at the flood height keeps it alive.
  EXPECT_NEAR(recourse(g, HardeningPlan::from_heights({1}), std::vector<int>{1}).shed, 0.0, 1e-12);
}

TEST(RecourseTest, BranchCapacityLimitsDelivery) {
  const GridInstance g = two_bus(3.0, 10.0);
  const auto r = recourse(g, HardeningPlan::none(1), std::vector<int>{0});
  EXPECT_NEAR(r.shed, 2.0, 1e-12);
  EXPECT_NEAR(std::abs(r.e[0]), 3.0, 1e-12);
  expect_physical(g, r);
}

TEST(RecourseTest, AngleLimitBindsWithWeakBranch) {
  // e = B (a_1 - a_2) with a_1 pinned at 0 and |a_2| <= pi.
  const GridInstance g = two_bus(10.0, 1.0);
  const auto r = recourse(g, HardeningPlan::none(1), std::vector<int>{0});
  EXPECT_NEAR(r.shed, 5.0 - std::numbers::pi, 1e-9);
  EXPECT_EQ(r.alpha[0], 0.0);
  EXPECT_NEAR(r.alpha[1], -std::numbers::pi, 1e-9);
  expect_physical(g, r);
}

TEST(RecourseTest, IslandWithoutGenerationIsShed) {
  // gen(1) - mid(2, flooded) - load(3): losing the middle isolates the load.
  std::vector<Substation> subs{{1, false, 0, 0, 0}, {2, true, 1, 1, 2}, {3, false, 0, 0, 0}};
  std::vector<Bus> buses{{1, 1, 0.0, 0.0, 10.0}, {2, 2, 1.0, 0.0, 0.0}, {3, 3, 4.0, 0.0, 0.0}};
  std::vector<Branch> branches{{1, 1, 2, 50.0, 10.0}, {2, 2, 3, 50.0, 10.0}};
  const GridInstance g(subs, buses, branches, 1, 5.0);
  const auto r = recourse(g, HardeningPlan::none(1), std::vector<int>{2});
  EXPECT_NEAR(r.shed, 5.0, 1e-12);
  expect_physical(g, r);
  EXPECT_NEAR(recourse(g, HardeningPlan::from_heights({2}), std::vector<int>{2}).shed, 0.0, 1e-12);
}

TEST(RecourseTest, EveryIslandGetsItsOwnAngleReference) {
  // Two generator-load pairs joined through a flooded hub; both islands stay
  // served once the hub dies.
  std::vector<Substation> subs{{1, false, 0, 0, 0}, {2, true, 1, 1, 2}, {3, false, 0, 0, 0}};
  std::vector<Bus> buses{{1, 1, 2.0, 0.0, 5.0}, {2, 1, 1.0, 0.0, 0.0}, {3, 2, 0.0, 0.0, 0.0},
                         {4, 3, 1.0, 0.0, 5.0}, {5, 3, 2.0, 0.0, 0.0}};
  std::vector<Branch> branches{{1, 1, 2, 20.0, 10.0}, {2, 2, 3, 20.0, 10.0}, {3, 3, 4, 20.0, 10.0},
                               {4, 4, 5, 20.0, 10.0}};
  const GridInstance g(subs, buses, branches, 1, 5.0);
  const auto r = recourse(g, HardeningPlan::none(1), std::vector<int>{1});
  EXPECT_NEAR(r.shed, 0.0, 1e-12);
  EXPECT_EQ(r.alpha[0], 0.0);  // bus 1 leads its island
  EXPECT_EQ(r.alpha[3], 0.0);  // bus 4 leads the other
  expect_physical(g, r);
}

TEST(RecourseTest, ShedNeverIncreasesWhenRaisingABarrier) {
  std::mt19937_64 rng(10);
  int trials = 0;
  while (trials < 300) {
    double budget = 0.0;
    const TwoStageProblem p = oracle::random_small_problem(rng, budget);
    const std::size_t n = p.grid.num_flooded();
    for (int t = 0; t < 10; ++t, ++trials) {
      std::vector<int> x(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::uniform_int_distribution<int>(0, p.grid.flooded_substation(i).max_height)(rng);
      }
      const std::size_t i = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
      auto raised = x;
      raised[i] += 1;
      const auto& delta = p.scenarios.heights[std::uniform_int_distribution<std::size_t>(
          0, p.scenarios.count() - 1)(rng)];
      const auto a = recourse(p.grid, HardeningPlan::from_heights(x), delta);
      const auto b = recourse(p.grid, HardeningPlan::from_heights(raised), delta);
      EXPECT_LE(b.shed, a.shed + 1e-9);
      expect_physical(p.grid, a);
      expect_physical(p.grid, b);
    }
  }
}

TEST(SaaObjectiveTest, Examples) {
  const GridInstance g = two_bus(10.0, 10.0);
  const TwoStageProblem same{g, scenarios({{1}, {1}, {1}}, {"2"}), {}};
  EXPECT_NEAR(saa_objective(same, HardeningPlan::none(1)), 5.0, 1e-12);
  const TwoStageProblem dry{g, scenarios({{0}, {0}}, {"2"}), {}};
  EXPECT_NEAR(saa_objective(dry, HardeningPlan::none(1)), 0.0, 1e-12);
  const TwoStageProblem mixed{two_bus(10.0, 10.0, 4.0), scenarios({{1}, {0}}, {"2"}), {}};
  EXPECT_NEAR(saa_objective(mixed, HardeningPlan::none(1)), 2.0, 1e-12);
  // Linear first-stage cost is added on top.
  const TwoStageProblem priced{g, scenarios({{0}}, {"2"}), {0.5}};
  EXPECT_NEAR(saa_objective(priced, HardeningPlan::from_heights({2})), 1.0, 1e-12);
}

TEST(SaaObjectiveTest, NoFloodedSubstationsMeansNoShed) {
  InstanceSpec spec;
  spec.n_flooded = 0;
  spec.topology = Topology::Grid;
  auto gi = generate_instance(spec);
  const TwoStageProblem p{gi.grid, gi.scenarios, {}};
  EXPECT_NEAR(saa_objective(p, HardeningPlan::none(0)), 0.0, 1e-9);
}

TEST(FirstStageTest, ZeroBudgetBuildsNothing) {
  std::mt19937_64 rng(1);
  double budget = 0.0;
  const TwoStageProblem p = oracle::random_small_problem(rng, budget);
  const auto r = solve_first_stage(p, 0.0);
  EXPECT_EQ(r.plan, HardeningPlan::none(p.grid.num_flooded()));
  EXPECT_EQ(r.value, saa_objective(p, HardeningPlan::none(p.grid.num_flooded())));
}

TEST(FirstStageTest, SaturationBudgetRemovesAllShed) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 10; ++t) {
    double budget = 0.0;
    const TwoStageProblem p = oracle::random_small_problem(rng, budget);
    double full = 0.0;
    std::vector<int> top(p.grid.num_flooded(), 0);
    for (const auto& row : p.scenarios.heights) {
      for (std::size_t i = 0; i < row.size(); ++i) top[i] = std::max(top[i], row[i]);
    }
    full = hardening_cost(p.grid, top);
    const auto r = solve_first_stage(p, full);
    EXPECT_NEAR(r.value, 0.0, 1e-9);
    EXPECT_EQ(solve_first_stage(p, full * 2 + 10).value, r.value);
  }
}

TEST(FirstStageTest, MatchesExhaustiveEnumeration) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 40; ++t) {
    double budget = 0.0;
    const TwoStageProblem p = oracle::random_small_problem(rng, budget);
    const auto bb = solve_first_stage(p, budget);
    const auto ex = oracle::enumerate_first_stage(p, budget);
    EXPECT_EQ(bb.value, ex.value) << "trial " << t;
    EXPECT_EQ(bb.plan.height, ex.heights) << "trial " << t;
    EXPECT_NO_THROW(validate_plan(p.grid, bb.plan, budget));
  }
}

TEST(FirstStageTest, SoEstimateNonIncreasingInBudget) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 8; ++t) {
    double budget = 0.0;
    const TwoStageProblem p = oracle::random_small_problem(rng, budget);
    double prev = std::numeric_limits<double>::infinity();
    for (double b = 0.0; b <= 40.0; b += 5.0) {
      const double v = solve_first_stage(p, b).value;
      EXPECT_LE(v, prev + 1e-12);
      prev = v;
    }
  }
}

TEST(FirstStageTest, NodeLimitIsAResourceError) {
  std::mt19937_64 rng(6);
  double budget = 0.0;
  TwoStageProblem p = oracle::random_small_problem(rng, budget);
  FirstStageOptions opt;
  opt.node_limit = 1;
  // The root alone fits; any branching exceeds the limit unless the root prunes.
  try {
    const auto r = solve_first_stage(p, 1e6, opt);
    EXPECT_LE(r.nodes, 1u);
  } catch (const ResourceLimitError& e) {
    EXPECT_NE(std::string(e.what()).find("greedy"), std::string::npos);
  }
  InstanceSpec spec;
  spec.n_substations = 30;
  spec.n_flooded = 30;
  spec.max_height = 6;
  spec.scenarios = 12;
  spec.seed = 9;
  auto gi = generate_instance(spec);
  const TwoStageProblem big{gi.grid, gi.scenarios, {}};
  opt.node_limit = 200;
  EXPECT_THROW(solve_first_stage(big, 40.0, opt), ResourceLimitError);
}

TEST(GreedyTest, Examples) {
  std::mt19937_64 rng(12);
  double budget = 0.0;
  const TwoStageProblem p = oracle::random_small_problem(rng, budget);
  EXPECT_EQ(greedy_first_stage(p, 0.0), HardeningPlan::none(p.grid.num_flooded()));

  const TwoStageProblem single{two_bus(10.0, 10.0), scenarios({{1}, {3}, {0}, {2}}, {"2"}), {}};
  for (double b : {0.0, 1.5, 2.0, 3.0, 4.0, 10.0}) {
    EXPECT_EQ(saa_objective(single, greedy_first_stage(single, b)), solve_first_stage(single, b).value)
        << "budget " << b;
  }
}

TEST(GreedyTest, FeasibleAndNeverBetterThanExact) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 30; ++t) {
    double budget = 0.0;
    const TwoStageProblem p = oracle::random_small_problem(rng, budget);
    const HardeningPlan h = greedy_first_stage(p, budget);
    EXPECT_NO_THROW(validate_plan(p.grid, h, budget));
    EXPECT_GE(saa_objective(p, h), solve_first_stage(p, budget).value - 1e-12);
  }
}

TEST(OosTest, TrainingScenariosReproduceSaaAverage) {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 20; ++t) {
    double budget = 0.0;
    const TwoStageProblem p = oracle::random_small_problem(rng, budget);
    std::vector<int> x(p.grid.num_flooded());
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = std::uniform_int_distribution<int>(0, p.grid.flooded_substation(i).max_height)(rng);
    }
    const auto plan = HardeningPlan::from_heights(x);
    const OosReport r = evaluate_oos(p, plan, p.scenarios);
    EXPECT_NEAR(r.shed.mean, saa_objective(p, plan), 1e-9);
    EXPECT_EQ(r.count, p.scenarios.count());
  }
}

TEST(OosTest, SingleScenarioAndSaturatedPlan) {
  const TwoStageProblem p{two_bus(10.0, 10.0), scenarios({{2}, {1}}, {"2"}), {}};
  const OosReport one = evaluate_oos(p, HardeningPlan::none(1), scenarios({{2}}, {"2"}));
  EXPECT_EQ(one.shed.std, 0.0);
  for (std::size_t row = 0; row < 7; ++row) {
    if (row != 1) {
      EXPECT_NEAR(one.shed.row(row), 5.0, 1e-12);
    }
  }
  const OosReport saturated = evaluate_oos(p, HardeningPlan::from_heights({2}), p.scenarios);
  for (std::size_t row = 0; row < 7; ++row) EXPECT_EQ(saturated.shed.row(row), 0.0);
}

TEST(OosTest, ReportInvariantsAndThreadIndependence) {
  std::mt19937_64 rng(15);
  double budget = 0.0;
  const TwoStageProblem p = oracle::random_small_problem(rng, budget);
  ScenarioSet synth = p.scenarios;
  for (int rep = 0; rep < 20; ++rep) {
    for (const auto& row : p.scenarios.heights) {
      auto r = row;
      for (auto& v : r) v = std::uniform_int_distribution<int>(0, 3)(rng);
      synth.heights.push_back(r);
    }
  }
  synth.probs = ScenarioSet::uniform_probs(synth.count());
  const auto plan = solve_first_stage(p, budget).plan;
  const OosReport a = evaluate_oos(p, plan, synth, {1});
  const OosReport b = evaluate_oos(p, plan, synth, {4});
  EXPECT_EQ(a.sheds, b.sheds);
  EXPECT_EQ(a.shed.mean, b.shed.mean);
  const SummaryStats& s = a.shed;
  EXPECT_LE(s.min, s.q25);
  EXPECT_LE(s.q25, s.q50);
  EXPECT_LE(s.q50, s.q75);
  EXPECT_LE(s.q75, s.max);
  EXPECT_GE(s.std, 0.0);
  EXPECT_GE(s.mean, s.min);
  EXPECT_LE(s.mean, s.max);
  EXPECT_EQ(a.v_oos, a.first_stage_cost + a.shed.mean);
}

TEST(OosTest, DimensionMismatchIsInputError) {
  const TwoStageProblem p{two_bus(10.0), scenarios({{1}}, {"2"}), {}};
  EXPECT_THROW(evaluate_oos(p, HardeningPlan::none(1), scenarios({{1, 2}}, {"2", "3"})), InputError);
}

TEST(SweepTest, OrderedReportsWithMonotoneSoEstimates) {
  std::mt19937_64 rng(16);
  double budget = 0.0;
  const TwoStageProblem p = oracle::random_small_problem(rng, budget);
  const std::vector<double> budgets{40, 0, 5, 10, 15, 20, 25, 30, 35};
  const auto reports = budget_sweep(p, budgets, p.scenarios);
  ASSERT_EQ(reports.size(), 9u);
  for (std::size_t i = 1; i < reports.size(); ++i) {
    EXPECT_LT(reports[i - 1].budget, reports[i].budget);
    EXPECT_LE(reports[i].so_estimate, reports[i - 1].so_estimate + 1e-12);
  }
  EXPECT_EQ(budget_sweep(p, {0.0}, p.scenarios).size(), 1u);
  EXPECT_THROW(budget_sweep(p, {}, p.scenarios), ContractError);
}

}  // namespace
}  // namespace nortasp
