#pragma once

#include "ocpsens/core/linalg.hpp"
#include "ocpsens/core/problem.hpp"

namespace ocpsens {

/// Rewrites physical-time functions for the normalized horizon tau in [0, 1]
/// with the duration T = p[duration_index]: dynamics become T * f and, when
/// `scale_running_cost` is set, the running cost becomes T * l. The wrapped
/// callables receive normalized time as their t argument.
ProblemFunctions normalize_time(const ProblemFunctions& funcs, const Dims& dims,
                                int duration_index, bool scale_running_cost);

/// Diagonal change of variables x_phys = Sx * x, u_phys = Su * u,
/// p_phys = Sp * p, with the objective multiplied by `objective`.
struct VariableScaling {
  Vector x;
  Vector u;
  Vector p;
  double objective = 1.0;

  static VariableScaling identity(const Dims& dims);
};

/// Problem in scaled variables. g keeps its physical outputs; only its
/// arguments are rescaled.
OcpProblem scale_problem(const OcpProblem& physical, const VariableScaling& s);

/// Same rescaling for a QoI defined in physical variables.
QoiFunctions scale_qoi(const QoiFunctions& physical, const Dims& dims,
                       const VariableScaling& s, double qoi_scale);

}  // namespace ocpsens
