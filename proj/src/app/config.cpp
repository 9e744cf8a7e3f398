#include "ocpsens/app/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace ocpsens::app {

using nlohmann::json;

std::string to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::max_downrange: return "max-downrange";
    case ProblemKind::tracking: return "tracking";
    case ProblemKind::toy_lq: return "toy-lq";
  }
  return "unknown";
}

ProblemKind parse_problem_kind(const std::string& name) {
  if (name == "max-downrange") return ProblemKind::max_downrange;
  if (name == "tracking") return ProblemKind::tracking;
  if (name == "toy-lq") return ProblemKind::toy_lq;
  throw ConfigError("problem must be max-downrange, tracking or toy-lq, got '" + name + "'");
}

void RunConfig::validate() const {
  if (intervals < 1 || nodes < 1) throw ConfigError("grid counts must be >= 1");
  if (eps.empty()) throw ConfigError("eps list is empty");
  for (double e : eps) {
    if (!(e >= 0.0) || !std::isfinite(e)) {
      throw ConfigError(fmt::format("eps entries must be finite and >= 0, got {}", e));
    }
  }
  if (output_dir.empty()) throw ConfigError("output_dir is empty");
  try {
    solver.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

CollocationGrid RunConfig::grid() const {
  return CollocationGrid::uniform(intervals, nodes, 0.0, 1.0);
}

std::string RunConfig::grid_label() const { return fmt::format("{}x{}", intervals, nodes); }

namespace {

template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known,
                    const std::string& where) {
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* name : known) ok = ok || k == name;
    if (!ok) throw ConfigError("unknown config key '" + where + k + "'");
  }
}

void read_solver(const json& j, SolverConfig& s) {
  if (!j.is_object()) throw ConfigError("config key 'solver' must be an object");
  reject_unknown(j,
                 {"kkt_tolerance", "max_iterations", "mu_initial", "mu_linear_factor",
                  "mu_superlinear_power", "barrier_tolerance_factor", "backtracking_factor",
                  "sufficient_decrease", "max_backtracks", "regularization_floor"},
                 "solver.");
  auto num = [&](const char* key, double& out) {
    if (j.contains(key)) out = get_as<double>(j.at(key), std::string("solver.") + key);
  };
  auto integer = [&](const char* key, int& out) {
    if (j.contains(key)) out = get_as<int>(j.at(key), std::string("solver.") + key);
  };
  num("kkt_tolerance", s.kkt_tolerance);
  integer("max_iterations", s.max_iterations);
  num("mu_initial", s.mu_initial);
  num("mu_linear_factor", s.mu_linear_factor);
  num("mu_superlinear_power", s.mu_superlinear_power);
  num("barrier_tolerance_factor", s.barrier_tolerance_factor);
  num("backtracking_factor", s.backtracking_factor);
  num("sufficient_decrease", s.sufficient_decrease);
  integer("max_backtracks", s.max_backtracks);
  num("regularization_floor", s.regularization_floor);
}

json to_json(const RunConfig& c) {
  const SolverConfig& s = c.solver;
  return json{
      {"problem", to_string(c.problem)},
      {"grid", {{"intervals", c.intervals}, {"nodes", c.nodes}}},
      {"units", hypersonic::to_string(c.units)},
      {"eps", c.eps},
      {"output_dir", c.output_dir},
      {"seed", c.seed},
      {"solver",
       {{"kkt_tolerance", s.kkt_tolerance},
        {"max_iterations", s.max_iterations},
        {"mu_initial", s.mu_initial},
        {"mu_linear_factor", s.mu_linear_factor},
        {"mu_superlinear_power", s.mu_superlinear_power},
        {"barrier_tolerance_factor", s.barrier_tolerance_factor},
        {"backtracking_factor", s.backtracking_factor},
        {"sufficient_decrease", s.sufficient_decrease},
        {"max_backtracks", s.max_backtracks},
        {"regularization_floor", s.regularization_floor}}},
  };
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j, {"problem", "grid", "units", "eps", "output_dir", "seed", "solver"}, "");

  RunConfig c;
  if (j.contains("problem")) c.problem = parse_problem_kind(get_as<std::string>(j["problem"], "problem"));
  if (j.contains("grid")) {
    const json& g = j["grid"];
    if (!g.is_object()) throw ConfigError("config key 'grid' must be an object");
    reject_unknown(g, {"intervals", "nodes"}, "grid.");
    if (g.contains("intervals")) c.intervals = get_as<int>(g["intervals"], "grid.intervals");
    if (g.contains("nodes")) c.nodes = get_as<int>(g["nodes"], "grid.nodes");
  }
  if (j.contains("units")) {
    try {
      c.units = hypersonic::parse_unit_scheme(get_as<std::string>(j["units"], "units"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("eps")) c.eps = get_as<std::vector<double>>(j["eps"], "eps");
  if (j.contains("output_dir")) c.output_dir = get_as<std::string>(j["output_dir"], "output_dir");
  if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j["seed"], "seed");
  if (j.contains("solver")) read_solver(j["solver"], c.solver);
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::vector<double> parse_eps_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError("bad eps entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty eps list");
  return out;
}

std::pair<int, int> parse_grid(const std::string& text) {
  int a = 0, b = 0;
  char x = 0, extra = 0;
  std::istringstream ss(text);
  if (!(ss >> a >> x >> b) || x != 'x' || (ss >> extra) || a < 1 || b < 1) {
    throw ConfigError("grid must look like <intervals>x<nodes>, got '" + text + "'");
  }
  return {a, b};
}

std::string canonical_json(const RunConfig& cfg) {
  json j = to_json(cfg);
  j.erase("output_dir");
  return j.dump();
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : canonical_json(cfg)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace ocpsens::app
