#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ocpsens/core/linalg.hpp"

namespace ocpsens {

using VectorFunction = std::function<Vector(const Vector&)>;
using JacobianFunction = std::function<Matrix(const Vector&)>;

/// Taylor-remainder sequence for one direction d:
///   r(h) = || F(z + h d) - F(z) - h J(z) d ||_inf.
/// A correct first derivative gives r(h) = O(h^2), so successive ratios
/// r(h_k) / r(h_{k+1}) approach 4 when the steps halve.
struct TaylorSequence {
  std::vector<double> steps;
  std::vector<double> remainders;
  std::vector<double> ratios;      // size steps.size() - 1
  std::vector<bool> finite;        // per step
  bool exact = false;              // all remainders at round-off level
};

struct TaylorReport {
  std::vector<TaylorSequence> directions;

  /// Every ratio within target*(1 +- rel_tol), or the direction is exact.
  bool passes(double target = 4.0, double rel_tol = 0.1) const;
  /// Largest |ratio/target - 1| over non-exact directions.
  double worst_deviation(double target = 4.0) const;
};

/// Remainder ratios for each direction. Non-finite evaluations are recorded
/// per step instead of throwing. `steps` must be positive and decreasing.
TaylorReport check_derivatives(const VectorFunction& fn,
                               const JacobianFunction& jacobian,
                               const Vector& point,
                               const std::vector<Vector>& directions,
                               const std::vector<double>& steps);

struct JacobianEntryDefect {
  int row = 0;
  int col = 0;
  double claimed = 0.0;
  double estimated = 0.0;
};

struct JacobianComparison {
  Matrix finite_difference;
  double max_abs_deviation = 0.0;
  std::vector<JacobianEntryDefect> flagged;
};

/// Entrywise comparison of a claimed Jacobian against central differences.
/// Entries deviating by more than `tolerance` are flagged.
JacobianComparison compare_jacobian_fd(const VectorFunction& fn,
                                       const JacobianFunction& jacobian,
                                       const Vector& point, double step,
                                       double tolerance);

/// max_ij |H_ij - H_ji|
double max_asymmetry(const Matrix& h);

}  // namespace ocpsens
