#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ocpsens/hypersonic/vehicle.hpp"
#include "ocpsens/nlp/interior_point.hpp"

namespace ocpsens::app {

/// Malformed or out-of-range configuration. The CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ProblemKind { max_downrange, tracking, toy_lq };

std::string to_string(ProblemKind k);
ProblemKind parse_problem_kind(const std::string& name);

struct RunConfig {
  ProblemKind problem = ProblemKind::max_downrange;
  int intervals = 16;
  int nodes = 4;
  SolverConfig solver;
  std::vector<double> eps{0.01, 0.02, 0.03, 0.04, 0.05};
  hypersonic::UnitScheme units = hypersonic::UnitScheme::kgkms;
  std::string output_dir = "out";
  std::uint64_t seed = 20240611;

  /// Throws ConfigError.
  void validate() const;
  CollocationGrid grid() const;
  std::string grid_label() const;  // "16x4"
};

/// Parses a JSON config. Every key is optional; unknown keys, wrong types
/// and out-of-range values throw ConfigError naming the key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// "0.01,0.02" -> {0.01, 0.02}. Throws ConfigError.
std::vector<double> parse_eps_list(const std::string& text);
/// "16x4" -> (16, 4). Throws ConfigError.
std::pair<int, int> parse_grid(const std::string& text);

/// Canonical JSON of the effective config (sorted keys, round-trip doubles).
/// output_dir is left out, so runs into different directories hash alike.
std::string canonical_json(const RunConfig& cfg);
/// FNV-1a 64 of canonical_json, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

}  // namespace ocpsens::app
