#pragma once

// File formats: scenario matrices as CSV; grid, model, plans and reports as
// JSON. Parse errors name the file, line and column (or JSON field path).

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "nortasp/errors.hpp"
#include "nortasp/grid.hpp"
#include "nortasp/norta.hpp"
#include "nortasp/scenario.hpp"

namespace nortasp::io {

using json = nlohmann::json;

inline constexpr std::string_view kProbColumn = "#prob";

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError(path + ": cannot open for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw InputError(path + ": write failed");
}

// 17 significant digits: doubles round-trip exactly.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Scenario CSV
// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

// Header row of column labels, one row per scenario of non-negative integer
// heights. An optional "#prob" column carries scenario probabilities;
// without it scenarios are equally likely.
inline ScenarioSet parse_scenarios_csv(std::string_view text, const std::string& name) {
  auto fail = [&](std::size_t line, std::size_t col, const std::string& msg) -> void {
    std::string where = name + ":" + std::to_string(line);
    if (col > 0) where += ":" + std::to_string(col);
    throw InputError(where + ": " + msg);
  };

  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    lines.push_back(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  std::size_t first = 0;
  while (first < lines.size() && detail::trim(lines[first]).empty()) ++first;
  if (first == lines.size()) fail(1, 0, "missing header row");

  ScenarioSet s;
  const auto header = detail::split_fields(lines[first]);
  int prob_col = -1;
  std::unordered_set<std::string> seen;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string label(header[c]);
    if (label.empty()) fail(first + 1, c + 1, "empty column label");
    if (!seen.insert(label).second) fail(first + 1, c + 1, "duplicate column label '" + label + "'");
    if (label == kProbColumn) {
      prob_col = static_cast<int>(c);
    } else {
      s.labels.push_back(label);
    }
  }

  for (std::size_t ln = first + 1; ln < lines.size(); ++ln) {
    if (detail::trim(lines[ln]).empty()) continue;
    const auto fields = detail::split_fields(lines[ln]);
    if (fields.size() != header.size()) {
      fail(ln + 1, 0, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    std::vector<int> row;
    row.reserve(s.labels.size());
    double prob = 0.0;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string_view f = fields[c];
      if (static_cast<int>(c) == prob_col) {
        const auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), prob);
        if (ec != std::errc() || end != f.data() + f.size() || f.empty() || !std::isfinite(prob) || prob < 0.0) {
          fail(ln + 1, c + 1, "invalid probability '" + std::string(f) + "'");
        }
        continue;
      }
      int v = 0;
      const auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || end != f.data() + f.size() || f.empty()) {
        fail(ln + 1, c + 1, "expected an integer flood height, found '" + std::string(f) + "'");
      }
      if (v < 0) fail(ln + 1, c + 1, "negative flood height " + std::to_string(v));
      row.push_back(v);
    }
    s.heights.push_back(std::move(row));
    if (prob_col >= 0) s.probs.push_back(prob);
  }

  if (prob_col < 0) {
    s.probs = ScenarioSet::uniform_probs(s.count());
  } else if (!s.heights.empty()) {
    double total = 0.0;
    for (double p : s.probs) total += p;
    if (std::abs(total - 1.0) > 1e-6) {
      throw InputError(name + ": probabilities sum to " + format_double(total) + ", expected 1");
    }
    for (double& p : s.probs) p /= total;
    double renorm = 0.0;
    for (double p : s.probs) renorm += p;
    s.probs.back() += 1.0 - renorm;
  }
  s.validate();
  return s;
}

inline ScenarioSet read_scenarios_csv(const std::string& path) { return parse_scenarios_csv(read_file(path), path); }

inline std::string scenarios_to_csv(const ScenarioSet& s) {
  const auto uniform = ScenarioSet::uniform_probs(s.count());
  const bool with_probs = s.probs != uniform;
  std::string out;
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    if (i) out += ',';
    out += s.labels[i];
  }
  if (with_probs) out += (s.labels.empty() ? "" : ",") + std::string(kProbColumn);
  out += '\n';
  for (std::size_t k = 0; k < s.count(); ++k) {
    for (std::size_t i = 0; i < s.heights[k].size(); ++i) {
      if (i) out += ',';
      out += std::to_string(s.heights[k][i]);
    }
    if (with_probs) out += (s.heights[k].empty() ? "" : ",") + format_double(s.probs[k]);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON field access with path diagnostics
// ---------------------------------------------------------------------------

namespace detail {

inline const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw InputError(where + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw InputError(where + "." + key + ": missing field");
  return *it;
}

inline double number(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number()) throw InputError(where + "." + key + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw InputError(where + "." + key + ": not finite");
  return d;
}

inline int integer(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::floor(d) == d && std::abs(d) < 2e9) return static_cast<int>(d);
  }
  throw InputError(where + "." + key + ": expected an integer");
}

inline bool boolean(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) return v.get<int>() == 1;
  throw InputError(where + "." + key + ": expected true/false");
}

inline const json& array(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_array()) throw InputError(where + "." + key + ": expected an array");
  return v;
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& v, Eigen::Index n, const std::string& where) {
  if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != n) {
    throw InputError(where + ": expected " + std::to_string(n) + " rows");
  }
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json& row = v[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
      throw InputError(where + "[" + std::to_string(i) + "]: expected " + std::to_string(n) + " columns");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const json& x = row[static_cast<std::size_t>(j)];
      if (!x.is_number()) {
        throw InputError(where + "[" + std::to_string(i) + "][" + std::to_string(j) + "]: expected a number");
      }
      m(i, j) = x.get<double>();
    }
  }
  return m;
}

}  // namespace detail

inline json parse_json(const std::string& text, const std::string& name) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(name + ": invalid JSON (" + e.what() + ")");
  }
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

inline json grid_to_json(const GridInstance& g) {
  json j;
  json subs = json::array();
  for (const Substation& s : g.substations()) {
    subs.push_back({{"id", s.id},
                    {"flooded_flag", s.flooded},
                    {"fixed_cost", s.fixed_cost},
                    {"var_cost", s.var_cost},
                    {"max_height", s.max_height}});
  }
  json buses = json::array();
  for (const Bus& b : g.buses()) {
    buses.push_back({{"id", b.id},
                     {"substation_id", b.substation_id},
                     {"demand", b.demand},
                     {"gen_min", b.gen_min},
                     {"gen_max", b.gen_max}});
  }
  json branches = json::array();
  for (const Branch& r : g.branches()) {
    branches.push_back({{"id", r.id},
                        {"head", r.head},
                        {"tail", r.tail},
                        {"susceptance", r.susceptance},
                        {"capacity", r.capacity}});
  }
  j["substations"] = std::move(subs);
  j["buses"] = std::move(buses);
  j["branches"] = std::move(branches);
  j["budget"] = g.budget();
  j["reference_bus"] = g.reference_bus();
  return j;
}

inline GridInstance grid_from_json(const json& j, const std::string& name) {
  using namespace detail;
  std::vector<Substation> subs;
  const json& js = array(j, "substations", name);
  for (std::size_t i = 0; i < js.size(); ++i) {
    const std::string w = name + ".substations[" + std::to_string(i) + "]";
    subs.push_back({integer(js[i], "id", w), boolean(js[i], "flooded_flag", w), number(js[i], "fixed_cost", w),
                    number(js[i], "var_cost", w), integer(js[i], "max_height", w)});
  }
  std::vector<Bus> buses;
  const json& jb = array(j, "buses", name);
  for (std::size_t i = 0; i < jb.size(); ++i) {
    const std::string w = name + ".buses[" + std::to_string(i) + "]";
    buses.push_back({integer(jb[i], "id", w), integer(jb[i], "substation_id", w), number(jb[i], "demand", w),
                     number(jb[i], "gen_min", w), number(jb[i], "gen_max", w)});
  }
  std::vector<Branch> branches;
  const json& jr = array(j, "branches", name);
  for (std::size_t i = 0; i < jr.size(); ++i) {
    const std::string w = name + ".branches[" + std::to_string(i) + "]";
    branches.push_back({integer(jr[i], "id", w), integer(jr[i], "head", w), integer(jr[i], "tail", w),
                        number(jr[i], "susceptance", w), number(jr[i], "capacity", w)});
  }
  try {
    return GridInstance(std::move(subs), std::move(buses), std::move(branches), integer(j, "reference_bus", name),
                        number(j, "budget", name));
  } catch (const InputError& e) {
    throw InputError(name + ": " + e.what());
  }
}

inline GridInstance read_grid(const std::string& path) {
  return grid_from_json(parse_json(read_file(path), path), path);
}

// Scenario columns must be the grid's flooded substations in file order.
inline void check_scenario_labels(const GridInstance& g, const ScenarioSet& s, const std::string& name) {
  const auto expected = g.flooded_labels();
  if (s.labels == expected) return;
  std::string msg = name + ": scenario columns do not match the grid's flooded substations";
  if (s.labels.size() != expected.size()) {
    msg += " (" + std::to_string(s.labels.size()) + " columns, " + std::to_string(expected.size()) + " flooded)";
  } else {
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (s.labels[i] != expected[i]) {
        msg += " (column " + std::to_string(i + 1) + " is '" + s.labels[i] + "', expected '" + expected[i] + "')";
        break;
      }
    }
  }
  throw InputError(msg);
}

// ---------------------------------------------------------------------------
// NORTA model
// ---------------------------------------------------------------------------

inline json fit_report_to_json(const FitReport& r) {
  json pairs = json::array();
  for (const PairFit& p : r.pairs) {
    pairs.push_back({{"i", p.i},
                     {"j", p.j},
                     {"rho_x", p.rho_x},
                     {"rho_z", p.rho_z},
                     {"residual", p.residual},
                     {"clamped", p.clamped},
                     {"degenerate", p.degenerate}});
  }
  return {{"clamped_count", r.clamped_count},
          {"degenerate_count", r.degenerate_count},
          {"max_abs_residual", r.max_abs_residual},
          {"repair_distance_frobenius", r.repair_distance},
          {"sigma_z_min_eigenvalue", r.sigma_z_min_eigenvalue},
          {"cholesky_jitter", r.cholesky_jitter},
          {"pairs", std::move(pairs)}};
}

inline json model_to_json(const NortaModel& m) {
  json marginals = json::array();
  for (const auto& f : m.marginals) marginals.push_back(f.sorted_values());
  return {{"format", "nortasp-model"},
          {"version", 1},
          {"labels", m.labels},
          {"marginals", std::move(marginals)},
          {"sigma_x", detail::matrix_to_json(m.sigma_x.matrix())},
          {"sigma_z", detail::matrix_to_json(m.sigma_z.matrix())},
          {"y", detail::matrix_to_json(m.y.matrix())},
          {"cholesky", detail::matrix_to_json(m.chol)},
          {"fit_report", fit_report_to_json(m.report)}};
}

inline NortaModel model_from_json(const json& j, const std::string& name) {
  using namespace detail;
  if (!j.is_object() || j.value("format", "") != "nortasp-model") {
    throw InputError(name + ": not a NORTA model file");
  }
  NortaModel m;
  const json& labels = array(j, "labels", name);
  for (const auto& l : labels) {
    if (!l.is_string()) throw InputError(name + ".labels: expected strings");
    m.labels.push_back(l.get<std::string>());
  }
  const json& marg = array(j, "marginals", name);
  if (marg.size() != m.labels.size()) throw InputError(name + ".marginals: one list per label expected");
  for (std::size_t i = 0; i < marg.size(); ++i) {
    const std::string w = name + ".marginals[" + std::to_string(i) + "]";
    if (!marg[i].is_array() || marg[i].empty()) throw InputError(w + ": expected a non-empty array");
    std::vector<double> v;
    for (const auto& x : marg[i]) {
      if (!x.is_number()) throw InputError(w + ": expected numbers");
      v.push_back(x.get<double>());
    }
    m.marginals.emplace_back(v);
  }
  const auto n = static_cast<Eigen::Index>(m.labels.size());
  try {
    m.sigma_x = CorrelationMatrix(matrix_from_json(field(j, "sigma_x", name), n, name + ".sigma_x"));
    m.sigma_z = CorrelationMatrix(matrix_from_json(field(j, "sigma_z", name), n, name + ".sigma_z"));
    m.y = CorrelationMatrix(matrix_from_json(field(j, "y", name), n, name + ".y"), 1e-9);
  } catch (const ContractError& e) {
    throw InputError(name + ": " + e.what());
  }
  m.chol = matrix_from_json(field(j, "cholesky", name), n, name + ".cholesky");
  const double err = n > 0 ? (m.chol * m.chol.transpose() - m.y.matrix()).cwiseAbs().maxCoeff() : 0.0;
  if (!(err <= 1e-8)) throw InputError(name + ".cholesky: does not factor y");
  if (j.contains("fit_report")) {
    const json& r = j["fit_report"];
    m.report.clamped_count = r.value("clamped_count", 0);
    m.report.degenerate_count = r.value("degenerate_count", 0);
    m.report.max_abs_residual = r.value("max_abs_residual", 0.0);
    m.report.repair_distance = r.value("repair_distance_frobenius", 0.0);
    m.report.sigma_z_min_eigenvalue = r.value("sigma_z_min_eigenvalue", 0.0);
    m.report.cholesky_jitter = r.value("cholesky_jitter", 0.0);
    for (const auto& p : r.value("pairs", json::array())) {
      PairFit f;
      f.i = p.value("i", 0);
      f.j = p.value("j", 0);
      f.rho_x = p.value("rho_x", 0.0);
      f.rho_z = p.value("rho_z", 0.0);
      f.residual = p.value("residual", 0.0);
      f.clamped = p.value("clamped", false);
      f.degenerate = p.value("degenerate", false);
      m.report.pairs.push_back(f);
    }
  }
  return m;
}

inline NortaModel read_model(const std::string& path) {
  return model_from_json(parse_json(read_file(path), path), path);
}

// ---------------------------------------------------------------------------
// Plans
// ---------------------------------------------------------------------------

struct PlanRecord {
  double budget = 0.0;
  HardeningPlan plan;
  double so_estimate = 0.0;
  double cost = 0.0;
  std::string method;
  std::size_t nodes = 0;
};

inline json plan_to_json(const GridInstance& g, const PlanRecord& r) {
  json subs = json::array();
  for (std::size_t i = 0; i < g.num_flooded(); ++i) {
    subs.push_back({{"id", g.flooded_substation(i).id}, {"protect", r.plan.protect[i]}, {"height", r.plan.height[i]}});
  }
  return {{"budget", r.budget}, {"so_estimate", r.so_estimate}, {"cost", r.cost},
          {"method", r.method}, {"nodes", r.nodes},            {"substations", std::move(subs)}};
}

inline std::vector<PlanRecord> plans_from_json(const GridInstance& g, const json& j, const std::string& name) {
  using namespace detail;
  if (!j.is_object() || j.value("format", "") != "nortasp-plans") throw InputError(name + ": not a plan file");
  const json& arr = array(j, "plans", name);
  if (arr.empty()) throw InputError(name + ".plans: empty");
  std::vector<PlanRecord> out;
  for (std::size_t p = 0; p < arr.size(); ++p) {
    const std::string w = name + ".plans[" + std::to_string(p) + "]";
    PlanRecord r;
    r.budget = number(arr[p], "budget", w);
    r.so_estimate = arr[p].value("so_estimate", 0.0);
    r.method = arr[p].value("method", "");
    const json& subs = array(arr[p], "substations", w);
    if (subs.size() != g.num_flooded()) {
      throw InputError(w + ".substations: expected " + std::to_string(g.num_flooded()) + " flooded substations");
    }
    r.plan.protect.resize(subs.size());
    r.plan.height.resize(subs.size());
    for (std::size_t i = 0; i < subs.size(); ++i) {
      const std::string ws = w + ".substations[" + std::to_string(i) + "]";
      if (integer(subs[i], "id", ws) != g.flooded_substation(i).id) {
        throw InputError(ws + ".id: expected substation " + std::to_string(g.flooded_substation(i).id));
      }
      r.plan.protect[i] = integer(subs[i], "protect", ws);
      r.plan.height[i] = integer(subs[i], "height", ws);
    }
    try {
      validate_plan(g, r.plan, r.budget);
    } catch (const InputError& e) {
      throw InputError(w + ": " + e.what());
    }
    r.cost = hardening_cost(g, r.plan);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace nortasp::io
