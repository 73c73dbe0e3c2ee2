#pragma once

// Transmission-network data model, flood application, and a synthetic
// desk-scale instance generator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nortasp/errors.hpp"
#include "nortasp/random.hpp"
#include "nortasp/scenario.hpp"
#include "nortasp/stats.hpp"

namespace nortasp {

struct Substation {
  int id = 0;
  bool flooded = false;
  double fixed_cost = 0.0;
  double var_cost = 0.0;
  int max_height = 0;
};

struct Bus {
  int id = 0;
  int substation_id = 0;
  double demand = 0.0;
  double gen_min = 0.0;
  double gen_max = 0.0;
};

struct Branch {
  int id = 0;
  int head = 0;  // bus id
  int tail = 0;  // bus id
  double susceptance = 1.0;
  double capacity = 0.0;
};

// Immutable after construction. Ids are user-facing; everything else is
// addressed by position. Flooded substations keep their file order, which is
// also the column order of scenario rows and the index order of plans.
class GridInstance {
 public:
  GridInstance() = default;

  GridInstance(std::vector<Substation> subs, std::vector<Bus> buses, std::vector<Branch> branches,
               int reference_bus, double budget)
      : subs_(std::move(subs)),
        buses_(std::move(buses)),
        branches_(std::move(branches)),
        reference_bus_(reference_bus),
        budget_(budget) {
    index();
  }

  const std::vector<Substation>& substations() const { return subs_; }
  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Branch>& branches() const { return branches_; }
  int reference_bus() const { return reference_bus_; }
  double budget() const { return budget_; }

  std::size_t num_buses() const { return buses_.size(); }
  std::size_t num_branches() const { return branches_.size(); }
  std::size_t num_flooded() const { return flooded_.size(); }

  // Substation positions of the flooded set, in file order.
  const std::vector<std::size_t>& flooded() const { return flooded_; }
  const Substation& flooded_substation(std::size_t slot) const { return subs_[flooded_[slot]]; }
  // Flooded slot of a substation, or -1.
  int flood_slot(std::size_t sub) const { return flood_slot_[sub]; }

  std::size_t bus_substation(std::size_t bus) const { return bus_sub_[bus]; }
  std::size_t head(std::size_t branch) const { return head_[branch]; }
  std::size_t tail(std::size_t branch) const { return tail_[branch]; }
  const std::vector<std::size_t>& out_branches(std::size_t bus) const { return out_[bus]; }
  const std::vector<std::size_t>& in_branches(std::size_t bus) const { return in_[bus]; }
  std::size_t reference_index() const { return bus_pos_.at(reference_bus_); }

  std::size_t bus_index(int id) const {
    const auto it = bus_pos_.find(id);
    if (it == bus_pos_.end()) throw ContractError("grid: unknown bus id " + std::to_string(id));
    return it->second;
  }

  std::vector<std::string> flooded_labels() const {
    std::vector<std::string> out;
    for (std::size_t s : flooded_) out.push_back(std::to_string(subs_[s].id));
    return out;
  }

  double total_demand() const {
    double d = 0.0;
    for (const Bus& b : buses_) d += b.demand;
    return d;
  }

 private:
  static void require(bool ok, const std::string& what) {
    if (!ok) throw InputError("grid: " + what);
  }

  void index() {
    std::unordered_map<int, std::size_t> sub_pos;
    for (std::size_t i = 0; i < subs_.size(); ++i) {
      const Substation& s = subs_[i];
      const std::string where = "substation " + std::to_string(s.id);
      require(sub_pos.emplace(s.id, i).second, "duplicate substation id " + std::to_string(s.id));
      require(std::isfinite(s.fixed_cost) && s.fixed_cost >= 0.0, where + ": fixed_cost must be >= 0");
      require(std::isfinite(s.var_cost) && s.var_cost >= 0.0, where + ": var_cost must be >= 0");
      require(s.max_height >= 0, where + ": max_height must be >= 0");
    }
    flood_slot_.assign(subs_.size(), -1);
    for (std::size_t i = 0; i < subs_.size(); ++i) {
      if (subs_[i].flooded) {
        flood_slot_[i] = static_cast<int>(flooded_.size());
        flooded_.push_back(i);
      }
    }

    for (std::size_t j = 0; j < buses_.size(); ++j) {
      const Bus& b = buses_[j];
      const std::string where = "bus " + std::to_string(b.id);
      require(bus_pos_.emplace(b.id, j).second, "duplicate bus id " + std::to_string(b.id));
      const auto it = sub_pos.find(b.substation_id);
      require(it != sub_pos.end(), where + ": unknown substation_id " + std::to_string(b.substation_id));
      bus_sub_.push_back(it->second);
      require(std::isfinite(b.demand) && b.demand >= 0.0, where + ": demand must be >= 0");
      require(std::isfinite(b.gen_max) && b.gen_min >= 0.0 && b.gen_min <= b.gen_max,
              where + ": need 0 <= gen_min <= gen_max");
      require(b.gen_min == 0.0, where + ": gen_min must be 0 (positive minimum generation would need "
                                        "integer commitment in the recourse)");
    }
    require(bus_pos_.count(reference_bus_) == 1,
            "reference_bus " + std::to_string(reference_bus_) + " is not a bus id");
    require(std::isfinite(budget_) && budget_ >= 0.0, "budget must be >= 0");

    out_.assign(buses_.size(), {});
    in_.assign(buses_.size(), {});
    std::unordered_map<int, bool> branch_ids;
    for (std::size_t r = 0; r < branches_.size(); ++r) {
      const Branch& br = branches_[r];
      const std::string where = "branch " + std::to_string(br.id);
      require(branch_ids.emplace(br.id, true).second, "duplicate branch id " + std::to_string(br.id));
      const auto h = bus_pos_.find(br.head);
      const auto t = bus_pos_.find(br.tail);
      require(h != bus_pos_.end(), where + ": unknown head bus " + std::to_string(br.head));
      require(t != bus_pos_.end(), where + ": unknown tail bus " + std::to_string(br.tail));
      require(h->second != t->second, where + ": head equals tail");
      require(std::isfinite(br.capacity) && br.capacity > 0.0, where + ": capacity must be > 0");
      require(std::isfinite(br.susceptance) && br.susceptance > 0.0, where + ": susceptance must be > 0");
      head_.push_back(h->second);
      tail_.push_back(t->second);
      out_[h->second].push_back(r);
      in_[t->second].push_back(r);
    }
  }

  std::vector<Substation> subs_;
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  int reference_bus_ = 0;
  double budget_ = 0.0;

  std::vector<std::size_t> flooded_;
  std::vector<int> flood_slot_;
  std::unordered_map<int, std::size_t> bus_pos_;
  std::vector<std::size_t> bus_sub_;
  std::vector<std::size_t> head_, tail_;
  std::vector<std::vector<std::size_t>> out_, in_;
};

// First-stage decision over the flooded substations (slot order).
// protect[i] = 1 exactly when height[i] >= 1.
struct HardeningPlan {
  std::vector<int> protect;
  std::vector<int> height;

  static HardeningPlan from_heights(std::vector<int> x) {
    HardeningPlan p;
    p.protect.reserve(x.size());
    for (int h : x) p.protect.push_back(h >= 1 ? 1 : 0);
    p.height = std::move(x);
    return p;
  }

  static HardeningPlan none(std::size_t n) { return from_heights(std::vector<int>(n, 0)); }

  friend bool operator==(const HardeningPlan&, const HardeningPlan&) = default;
};

inline double hardening_cost(const GridInstance& g, std::span<const int> heights) {
  double c = 0.0;
  for (std::size_t i = 0; i < heights.size(); ++i) {
    if (heights[i] >= 1) {
      const Substation& s = g.flooded_substation(i);
      c += s.fixed_cost + s.var_cost * heights[i];
    }
  }
  return c;
}

inline double hardening_cost(const GridInstance& g, const HardeningPlan& plan) {
  return hardening_cost(g, plan.height);
}

// Budget comparison with a relative slack for accumulated rounding.
inline bool within_budget(double cost, double budget) {
  return cost <= budget + 1e-9 * std::max(1.0, std::abs(budget));
}

// Throws InputError naming the first violated plan constraint.
inline void validate_plan(const GridInstance& g, const HardeningPlan& plan, double budget) {
  const std::size_t n = g.num_flooded();
  if (plan.height.size() != n || plan.protect.size() != n) {
    throw InputError("plan: expected " + std::to_string(n) + " flooded substations, got " +
                     std::to_string(plan.height.size()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Substation& s = g.flooded_substation(i);
    const std::string where = "plan: substation " + std::to_string(s.id);
    if (plan.protect[i] != 0 && plan.protect[i] != 1) throw InputError(where + ": protect must be 0 or 1");
    if (plan.height[i] < 0) throw InputError(where + ": negative height");
    if (plan.height[i] > s.max_height * plan.protect[i]) {
      throw InputError(where + ": height exceeds max_height * protect");
    }
    if (plan.protect[i] == 1 && plan.height[i] < 1) throw InputError(where + ": protected with zero height");
  }
  const double cost = hardening_cost(g, plan);
  if (!within_budget(cost, budget)) {
    throw InputError("plan: cost " + std::to_string(cost) + " exceeds budget " + std::to_string(budget));
  }
}

// z_j = 1 iff bus j's substation is not flooded or its barrier is at least
// the flood height. Depends on heights only.
inline std::vector<std::uint8_t> operational_topology(const GridInstance& g, std::span<const int> heights,
                                                      std::span<const int> delta) {
  if (heights.size() != g.num_flooded() || delta.size() != g.num_flooded()) {
    throw ContractError("operational_topology: expected " + std::to_string(g.num_flooded()) +
                        " flooded substations");
  }
  std::vector<std::uint8_t> z(g.num_buses(), 1);
  for (std::size_t j = 0; j < g.num_buses(); ++j) {
    const int slot = g.flood_slot(g.bus_substation(j));
    if (slot >= 0) {
      const auto u = static_cast<std::size_t>(slot);
      z[j] = heights[u] >= delta[u] ? 1 : 0;
    }
  }
  return z;
}

inline std::vector<std::uint8_t> operational_topology(const GridInstance& g, const HardeningPlan& plan,
                                                      std::span<const int> delta) {
  return operational_topology(g, std::span<const int>(plan.height), delta);
}

// Islands of operational buses joined by branches with both ends
// operational. Each component is sorted by bus id; components are ordered by
// their smallest bus id.
inline std::vector<std::vector<std::size_t>> connected_components(const GridInstance& g,
                                                                  std::span<const std::uint8_t> z) {
  if (z.size() != g.num_buses()) throw ContractError("connected_components: z has wrong length");
  const std::size_t n = g.num_buses();
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < n; ++j) order[j] = j;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return g.buses()[a].id < g.buses()[b].id; });

  std::vector<int> label(n, -1);
  std::vector<std::vector<std::size_t>> comps;
  std::vector<std::size_t> stack;
  for (std::size_t start : order) {
    if (!z[start] || label[start] >= 0) continue;
    const int c = static_cast<int>(comps.size());
    comps.emplace_back();
    label[start] = c;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t j = stack.back();
      stack.pop_back();
      comps.back().push_back(j);
      auto visit = [&](std::size_t other) {
        if (z[other] && label[other] < 0) {
          label[other] = c;
          stack.push_back(other);
        }
      };
      for (std::size_t r : g.out_branches(j)) visit(g.tail(r));
      for (std::size_t r : g.in_branches(j)) visit(g.head(r));
    }
    std::sort(comps.back().begin(), comps.back().end(),
              [&](std::size_t a, std::size_t b) { return g.buses()[a].id < g.buses()[b].id; });
  }
  return comps;
}

// ---------------------------------------------------------------------------
// Synthetic instances
// ---------------------------------------------------------------------------

enum class Topology { Ring, Tree, Grid };

inline Topology parse_topology(const std::string& s) {
  if (s == "ring") return Topology::Ring;
  if (s == "tree") return Topology::Tree;
  if (s == "grid") return Topology::Grid;
  throw InputError("instance spec: topology must be ring, tree or grid (got '" + s + "')");
}

inline const char* to_string(Topology t) {
  switch (t) {
    case Topology::Ring: return "ring";
    case Topology::Tree: return "tree";
    case Topology::Grid: return "grid";
  }
  return "ring";
}

struct InstanceSpec {
  int n_substations = 12;
  int n_flooded = 6;
  int buses_per_substation = 2;
  Topology topology = Topology::Ring;
  int scenarios = 16;
  int max_height = 3;
  double budget = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    auto fail = [](const std::string& m) { throw InputError("instance spec: " + m); };
    if (n_substations < 1) fail("n_substations must be positive");
    if (n_flooded < 0) fail("n_flooded must be non-negative");
    if (n_flooded > n_substations) fail("n_flooded exceeds n_substations");
    if (buses_per_substation < 1) fail("buses_per_substation must be positive");
    if (scenarios < 1) fail("scenarios must be positive");
    if (max_height < 0) fail("max_height must be non-negative");
    if (!(budget >= 0.0) || !std::isfinite(budget)) fail("budget must be non-negative");
  }
};

struct GeneratedInstance {
  GridInstance grid;
  ScenarioSet scenarios;
};

namespace detail {

inline double round_to(double v, double step) { return std::round(v / step) * step; }

}  // namespace detail

// Substations are placed in the unit square; the n_flooded lowest ones form
// the coast. Flood heights come from a latent Gaussian field with
// exponential spatial covariance, a per-scenario storm severity, and decay
// away from the coast, so nearby coastal sites flood together. Generation is
// placed inland where possible and totals 1.5x demand; branch capacities
// exceed total demand, so an intact grid sheds nothing.
inline GeneratedInstance generate_instance(const InstanceSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(detail::mix64(spec.seed));
  auto unit = [&] { return detail::open_unit(rng()); };

  const auto n = static_cast<std::size_t>(spec.n_substations);
  std::vector<std::pair<double, double>> pos(n);
  std::vector<std::pair<std::size_t, std::size_t>> links;
  switch (spec.topology) {
    case Topology::Ring:
      for (std::size_t i = 0; i < n; ++i) {
        const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
        pos[i] = {0.5 + 0.5 * std::cos(t), 0.5 + 0.5 * std::sin(t)};
      }
      for (std::size_t i = 0; n > 1 && i < n; ++i) {
        if (n == 2 && i == 1) break;
        links.emplace_back(i, (i + 1) % n);
      }
      break;
    case Topology::Grid: {
      const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
      const std::size_t rows = (n + cols - 1) / cols;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = i / cols, c = i % cols;
        pos[i] = {cols > 1 ? static_cast<double>(c) / static_cast<double>(cols - 1) : 0.5,
                  rows > 1 ? static_cast<double>(r) / static_cast<double>(rows - 1) : 0.5};
        if (c + 1 < cols && i + 1 < n) links.emplace_back(i, i + 1);
        if (i + cols < n) links.emplace_back(i, i + cols);
      }
      break;
    }
    case Topology::Tree:
      for (std::size_t i = 0; i < n; ++i) pos[i] = {unit(), unit()};
      for (std::size_t i = 1; i < n; ++i) {
        std::size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < i; ++k) {
          const double d = std::hypot(pos[i].first - pos[k].first, pos[i].second - pos[k].second);
          if (d < bd) {
            bd = d;
            best = k;
          }
        }
        links.emplace_back(best, i);
      }
      break;
  }

  // Coast: lowest y, ties by index.
  std::vector<std::size_t> by_height(n);
  for (std::size_t i = 0; i < n; ++i) by_height[i] = i;
  std::stable_sort(by_height.begin(), by_height.end(),
                   [&](std::size_t a, std::size_t b) { return pos[a].second < pos[b].second; });
  std::vector<bool> coastal(n, false);
  for (int k = 0; k < spec.n_flooded; ++k) coastal[by_height[static_cast<std::size_t>(k)]] = true;

  std::vector<Substation> subs(n);
  for (std::size_t i = 0; i < n; ++i) {
    subs[i].id = static_cast<int>(i) + 1;
    subs[i].flooded = coastal[i];
    subs[i].fixed_cost = detail::round_to(2.0 + 4.0 * unit(), 0.1);
    subs[i].var_cost = detail::round_to(1.0 + 2.0 * unit(), 0.1);
    subs[i].max_height = spec.max_height;
  }

  const auto bps = static_cast<std::size_t>(spec.buses_per_substation);
  std::vector<Bus> buses;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 0; b < bps; ++b) {
      Bus bus;
      bus.id = static_cast<int>(i * bps + b) + 1;
      bus.substation_id = subs[i].id;
      bus.demand = detail::round_to(1.0 + 4.0 * unit(), 0.1);
      buses.push_back(bus);
    }
  }
  double demand = 0.0;
  for (const Bus& b : buses) demand += b.demand;

  // Generators on the hub bus of inland substations (all substations when
  // everything is coastal).
  std::vector<std::size_t> gen_subs;
  for (std::size_t i = 0; i < n; ++i) {
    if (!coastal[i]) gen_subs.push_back(i);
  }
  if (gen_subs.empty()) {
    for (std::size_t i = 0; i < n; ++i) gen_subs.push_back(i);
  }
  const double per_gen = std::ceil(1.5 * demand / static_cast<double>(gen_subs.size()) * 10.0) / 10.0;
  for (std::size_t i : gen_subs) buses[i * bps].gen_max = per_gen;

  const double cap = std::ceil(demand * 1.25);
  std::vector<Branch> branches;
  auto add_branch = [&](std::size_t hbus, std::size_t tbus) {
    Branch br;
    br.id = static_cast<int>(branches.size()) + 1;
    br.head = buses[hbus].id;
    br.tail = buses[tbus].id;
    br.susceptance = detail::round_to(cap * (1.0 + unit()), 1.0);
    br.capacity = cap;
    branches.push_back(br);
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 1; b < bps; ++b) add_branch(i * bps, i * bps + b);
  }
  for (const auto& [a, b] : links) add_branch(a * bps, b * bps);

  // Reference bus: hub of the first generator substation.
  const int reference = buses[gen_subs.front() * bps].id;
  GridInstance grid(std::move(subs), std::move(buses), std::move(branches), reference, spec.budget);

  // Flood heights.
  ScenarioSet sc;
  sc.labels = grid.flooded_labels();
  const std::size_t nf = grid.num_flooded();
  Eigen::MatrixXd cov(static_cast<Eigen::Index>(nf), static_cast<Eigen::Index>(nf));
  double ymax = 0.0;
  for (std::size_t a = 0; a < nf; ++a) ymax = std::max(ymax, pos[grid.flooded()[a]].second);
  for (std::size_t a = 0; a < nf; ++a) {
    for (std::size_t b = 0; b < nf; ++b) {
      const auto& pa = pos[grid.flooded()[a]];
      const auto& pb = pos[grid.flooded()[b]];
      cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          std::exp(-std::hypot(pa.first - pb.first, pa.second - pb.second) / 0.3);
    }
  }
  cov.diagonal().array() += 1e-9;
  const Eigen::MatrixXd chol = cov.llt().matrixL();
  Eigen::VectorXd w(static_cast<Eigen::Index>(nf));
  const double top = static_cast<double>(spec.max_height) + 1.0;
  for (int k = 0; k < spec.scenarios; ++k) {
    const double severity = 0.3 + 0.7 * unit();
    for (std::size_t a = 0; a < nf; ++a) w(static_cast<Eigen::Index>(a)) = normal_quantile(unit());
    const Eigen::VectorXd z = chol * w;
    std::vector<int> row(nf);
    for (std::size_t a = 0; a < nf; ++a) {
      const double y = pos[grid.flooded()[a]].second;
      const double inland = ymax > 0.0 ? y / ymax : 0.0;
      const double u = normal_cdf(z(static_cast<Eigen::Index>(a)));
      const double level = top * severity * std::pow(u, 1.5) * (1.0 - 0.5 * inland);
      row[a] = std::min(spec.max_height, static_cast<int>(std::floor(level)));
    }
    sc.heights.push_back(std::move(row));
  }
  sc.probs = ScenarioSet::uniform_probs(sc.heights.size());
  return {std::move(grid), std::move(sc)};
}

}  // namespace nortasp
