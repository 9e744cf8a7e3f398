#pragma once

#include <string>
#include <vector>

#include "ocpsens/core/linalg.hpp"
#include "ocpsens/nlp/nlp.hpp"

namespace ocpsens {

enum class MeritFunction { l1_penalty, augmented_lagrangian };

struct SolverConfig {
  double kkt_tolerance = 1e-8;
  int max_iterations = 200;

  double mu_initial = 0.1;
  double mu_linear_factor = 0.2;      // kappa_mu
  double mu_superlinear_power = 1.5;  // theta_mu
  double barrier_tolerance_factor = 10.0;

  double backtracking_factor = 0.5;
  double sufficient_decrease = 1e-4;
  int max_backtracks = 40;

  double regularization_floor = 1e-8;
  double regularization_max = 1e20;
  double regularization_growth = 8.0;
  // Scale objective and constraint rows so no gradient entry exceeds 100 at
  // the starting point. Off by default: on the vehicle problems it hurt more
  // often than it helped.
  bool scale_problem = false;
  MeritFunction merit = MeritFunction::augmented_lagrangian;

  double bound_push = 1e-2;
  double fraction_to_boundary_min = 0.99;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

enum class SolveStatus {
  converged,
  max_iterations,
  line_search_failure,
  singular_kkt,
};

std::string to_string(SolveStatus s);

struct IterationRecord {
  double mu = 0.0;
  double objective = 0.0;
  double stationarity = 0.0;
  double infeasibility = 0.0;
  double complementarity = 0.0;
  double regularization = 0.0;
  double step = 0.0;
  /// Line-search merit before and after the accepted step, both evaluated
  /// with the same mu and rho.
  double merit_before = 0.0;
  double merit_after = 0.0;
};

struct NlpSolution {
  Vector x;
  Vector multipliers;  // equality multipliers nu, L = f + nu^T c
  Vector z_lower;      // >= 0, zero where the lower bound is infinite
  Vector z_upper;
  double objective = 0.0;
  double stationarity = 0.0;   // ||grad f + J^T nu - z_L + z_U||_inf
  double infeasibility = 0.0;  // ||c||_inf
  double complementarity = 0.0;
  double kkt_residual = 0.0;   // max of the three above
  int iterations = 0;
  SolveStatus status = SolveStatus::max_iterations;
  std::vector<IterationRecord> history;

  bool converged() const { return status == SolveStatus::converged; }
};

/// Primal-dual interior-point method with an l1 merit line search and
/// inertia-corrected Newton steps. Deterministic; holds no global state.
/// Throws ModelEvaluationError when the model is non-finite at x_init.
NlpSolution solve(const Nlp& nlp, const Vector& x_init, const SolverConfig& config = {});

}  // namespace ocpsens
