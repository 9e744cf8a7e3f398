#pragma once

#include <vector>

#include "ocpsens/core/linalg.hpp"
#include "ocpsens/core/problem.hpp"

namespace ocpsens {

/// g and its partials evaluated at one (t, y).
struct ComponentSample {
  Vector value;
  Matrix jacobian;              // n_g x n_y
  std::vector<Matrix> hessians;  // empty unless requested
};

ComponentSample sample_component(const ComponentFunction& g, double t,
                                 const Vector& y, bool with_hessians);

/// f(t, y, g(t, y)). Throws ModelEvaluationError on non-finite output.
Vector eval_composed_dynamics(const OcpProblem& prob, double t, const Vector& y);

/// Total Jacobian d/dy F(y, g(y)) = F_y + F_g g_y for a Jacobian over (y, g).
Matrix chain_jacobian(const Matrix& jac_yg, const Matrix& g_y);

/// Total gradient of a scalar s(y, g(y)).
Vector chain_gradient(const Vector& grad_yg, const Matrix& g_y);

/// Total Hessian of a scalar s(y, g(y)):
///   S_yy + S_yg G + (S_yg G)^T + G^T S_gg G + sum_k (dS/dg_k) hess(g_k)
/// with G = g_y.
Matrix chain_hessian(const Matrix& hess_yg, const Vector& grad_g,
                     const Matrix& g_y, const std::vector<Matrix>& g_hessians);

}  // namespace ocpsens
