#pragma once

#include <functional>

#include "ocpsens/core/linalg.hpp"

namespace ocpsens {

/// min f(z) s.t. c(z) = 0, lower <= z <= upper.
///
/// Multiplier convention: L(z, nu) = sigma * f(z) + nu^T c(z). hessian()
/// returns the full symmetric Hessian of L; its sparsity pattern, like the
/// Jacobian's, does not depend on z.
struct Nlp {
  int num_variables = 0;
  int num_constraints = 0;
  Vector lower;
  Vector upper;
  std::function<double(const Vector&)> objective;
  std::function<Vector(const Vector&)> gradient;
  std::function<Vector(const Vector&)> constraints;
  std::function<SparseMatrix(const Vector&)> jacobian;
  std::function<SparseMatrix(const Vector& z, double sigma, const Vector& nu)>
      hessian;
};

}  // namespace ocpsens
