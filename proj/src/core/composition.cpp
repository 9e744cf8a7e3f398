#include "ocpsens/core/composition.hpp"

#include "ocpsens/core/errors.hpp"

namespace ocpsens {

ComponentSample sample_component(const ComponentFunction& g, double t,
                                 const Vector& y, bool with_hessians) {
  ComponentSample s;
  s.value = g.value(t, y);
  s.jacobian = g.jacobian(t, y);
  if (with_hessians) {
    if (!g.has_hessians()) {
      throw MissingDerivativeError("component function has no second derivatives");
    }
    s.hessians = g.hessians(t, y);
  }
  if (!s.value.allFinite() || !s.jacobian.allFinite()) {
    throw ModelEvaluationError("non-finite component function", t, y);
  }
  return s;
}

Vector eval_composed_dynamics(const OcpProblem& prob, double t, const Vector& y) {
  const Vector g = prob.g.value(t, y);
  Vector f = prob.funcs.dynamics.value(t, y, g);
  if (!f.allFinite()) throw ModelEvaluationError("non-finite dynamics", t, y);
  return f;
}

Matrix chain_jacobian(const Matrix& jac_yg, const Matrix& g_y) {
  const auto n_y = g_y.cols();
  const auto n_g = g_y.rows();
  return jac_yg.leftCols(n_y) + jac_yg.middleCols(n_y, n_g) * g_y;
}

Vector chain_gradient(const Vector& grad_yg, const Matrix& g_y) {
  const auto n_y = g_y.cols();
  const auto n_g = g_y.rows();
  return grad_yg.head(n_y) + g_y.transpose() * grad_yg.segment(n_y, n_g);
}

Matrix chain_hessian(const Matrix& hess_yg, const Vector& grad_g,
                     const Matrix& g_y, const std::vector<Matrix>& g_hessians) {
  const auto n_y = g_y.cols();
  const auto n_g = g_y.rows();
  const auto s_yy = hess_yg.topLeftCorner(n_y, n_y);
  const auto s_yg = hess_yg.block(0, n_y, n_y, n_g);
  const auto s_gg = hess_yg.block(n_y, n_y, n_g, n_g);

  Matrix cross = s_yg * g_y;
  Matrix h = s_yy + cross + cross.transpose() + g_y.transpose() * s_gg * g_y;
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(g_hessians.size()); ++k) {
    if (grad_g[k] != 0.0) h += grad_g[k] * g_hessians[k];
  }
  return h;
}

}  // namespace ocpsens
