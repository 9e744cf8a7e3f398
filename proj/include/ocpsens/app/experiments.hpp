#pragma once

#include <string>
#include <vector>

#include "ocpsens/adjoint/qoi.hpp"
#include "ocpsens/app/config.hpp"
#include "ocpsens/hypersonic/vehicle.hpp"

namespace ocpsens::app {

inline constexpr int kDenseSamples = 201;

/// Trajectory sampled at kDenseSamples uniform normalized times, in kg/km/s
/// and radians. Columns t, x1, x2, v, gamma, alpha, q, delta; t = T * tau.
Matrix dense_samples(const CollocationGrid& grid, const DiscreteTrajectory& physical);

/// Columnwise max |a - b| over the state and control columns (skips t).
Vector deviation_norms(const Matrix& a, const Matrix& b);

/// Metadata lines shared by every output file.
struct Metadata {
  std::string command;
  std::string config_hash;
  std::string grid;
  std::string units;
  double kkt_tolerance = 0.0;
  int max_iterations = 0;

  static Metadata from(const RunConfig& cfg, const std::string& command);
};

/// CSV text: "# key: value" metadata lines, then the header, then rows
/// with 17 significant digits. The first `shortest_columns` columns use the
/// shortest round-trip form instead, so 0.03 stays 0.03.
std::string format_csv(const Metadata& meta, const std::string& header, const Matrix& rows,
                       int shortest_columns = 0);
std::string trajectory_csv(const Metadata& meta, const Matrix& samples);

void write_text(const std::string& path, const std::string& text);

/// Reference storage: grid layout and SI node values, JSON with round-trip
/// doubles. read_reference throws ConfigError on a malformed file.
void write_reference(const std::string& path, const hypersonic::Reference& ref,
                     const Metadata& meta);
hypersonic::Reference read_reference(const std::string& path);

struct SolveReport {
  std::string problem;
  std::string status;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  double duration_T = 0.0;
};

std::string report_json(const Metadata& meta, const SolveReport& r);

/// Reference from <output_dir>/reference.json when present (its grid must
/// match the config), otherwise solved and written there. `solved` tells
/// which happened. Throws std::runtime_error if the solve fails.
hypersonic::Reference obtain_reference(const RunConfig& cfg, bool* solved = nullptr);

/// Everything the prediction and QoI commands share: the surrogate tracking
/// solution (the reference itself), its LQ data, and the QoI adjoint.
struct StudyBase {
  RunConfig cfg;
  hypersonic::VehicleParams vp;
  hypersonic::Reference reference;
  hypersonic::VehicleSolve base;
  LqData lq;
  QoiFunctions qoi;  // downrange in km, scaled variables
  AdjointSolution adjoint;
  double base_qoi = 0.0;  // km
};

/// Throws std::runtime_error if the surrogate tracking solve fails, and
/// ActiveBoundError / SsocViolationError from the LQ assembly.
StudyBase prepare_study(const RunConfig& cfg, const hypersonic::Reference& reference);

struct EpsResult {
  double eps = 0.0;
  hypersonic::VehicleSolve truth;
  PerturbationData pert;  // g_true - g_hat along the base trajectory
  SensitivitySolution dz;
  double estimate = 0.0;
  double forward = 0.0;  // the same derivative from the forward sensitivity
  double true_error = 0.0;
  double bound = 0.0;
  DiscreteTrajectory predicted;  // SI
  Matrix reference_samples;
  Matrix predicted_samples;
  Matrix truth_samples;
};

/// Truth re-solve, sensitivity prediction, estimate and bound for each eps;
/// the solves run concurrently. Results are in input order. Throws
/// std::runtime_error naming eps when a truth solve fails.
std::vector<EpsResult> run_eps_sweep(const StudyBase& study, const std::vector<double>& eps);

/// Study table rows (eps, estimate, true_error, bound).
Matrix study_table(const std::vector<EpsResult>& rows);

/// Plain file names for an eps value: 0.05 -> "0.05".
std::string eps_label(double eps);

/// Solution-space Taylor remainders || z(g_hat + h dg) - z(g_hat) - h dz ||_inf
/// in scaled variables for dg = g_hat - g_true(eps).
struct TaylorStudy {
  std::vector<double> steps;
  std::vector<double> remainders;
  std::vector<double> ratios;
  std::vector<std::string> statuses;
};

TaylorStudy sensitivity_taylor(const StudyBase& study, double eps, const std::vector<double>& steps);

/// Seeded random perturbation (dg and dg_y entries uniform in [-1, 1]).
PerturbationData random_perturbation(const LqData& lq, std::uint64_t seed);

}  // namespace ocpsens::app
