#include "ocpsens/core/problem.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "ocpsens/core/errors.hpp"

namespace ocpsens {

namespace {

void expect_size(const Vector& v, int n, const char* name) {
  if (v.size() != n) {
    throw DimensionError(std::string(name) + " has size " +
                         std::to_string(v.size()) + ", expected " +
                         std::to_string(n));
  }
}

}  // namespace

void Dims::validate() const {
  if (n_x < 1 || n_u < 0 || n_p < 0 || n_g < 0) {
    throw DimensionError("invalid dimensions: n_x must be >= 1, others >= 0");
  }
}

Vector pack_y(const Vector& x, const Vector& u, const Vector& p) {
  Vector y(x.size() + u.size() + p.size());
  y << x, u, p;
  return y;
}

bool ProblemFunctions::has_second_derivatives() const {
  if (!dynamics.weighted_hessian) return false;
  if (running_cost && !running_cost->hessian) return false;
  if (terminal_cost && !terminal_cost->hessian) return false;
  return true;
}

Bounds Bounds::unbounded(const Dims& dims) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  Bounds b;
  b.x_lower = Vector::Constant(dims.n_x, -inf);
  b.x_upper = Vector::Constant(dims.n_x, inf);
  b.u_lower = Vector::Constant(dims.n_u, -inf);
  b.u_upper = Vector::Constant(dims.n_u, inf);
  b.p_lower = Vector::Constant(dims.n_p, -inf);
  b.p_upper = Vector::Constant(dims.n_p, inf);
  return b;
}

bool Bounds::any_finite() const {
  auto finite = [](const Vector& v) {
    for (double e : v) {
      if (std::isfinite(e)) return true;
    }
    return false;
  };
  return finite(x_lower) || finite(x_upper) || finite(u_lower) ||
         finite(u_upper) || finite(p_lower) || finite(p_upper);
}

void OcpProblem::validate() const {
  dims.validate();
  if (dims.n_g < 1) throw DimensionError("a component function needs n_g >= 1");
  if (g.n_g != dims.n_g) throw DimensionError("component function n_g mismatch");
  if (!g.value || !g.jacobian) {
    throw MissingDerivativeError("component function needs value and jacobian");
  }
  if (!funcs.dynamics.value || !funcs.dynamics.jacobian) {
    throw MissingDerivativeError("dynamics need value and jacobian");
  }
  if (!(t0 < tf)) throw std::invalid_argument("horizon requires t0 < tf");
  expect_size(x0, dims.n_x, "x0");
  if (!x0.allFinite()) throw std::invalid_argument("x0 must be finite");
  expect_size(bounds.x_lower, dims.n_x, "x_lower");
  expect_size(bounds.x_upper, dims.n_x, "x_upper");
  expect_size(bounds.u_lower, dims.n_u, "u_lower");
  expect_size(bounds.u_upper, dims.n_u, "u_upper");
  expect_size(bounds.p_lower, dims.n_p, "p_lower");
  expect_size(bounds.p_upper, dims.n_p, "p_upper");
  if (duration_index) {
    int k = *duration_index;
    if (k < 0 || k >= dims.n_p) {
      throw DimensionError("duration index outside parameter vector");
    }
    if (!(bounds.p_lower[k] > 0.0 || !std::isfinite(bounds.p_lower[k]))) {
      throw std::invalid_argument("duration lower bound must be positive");
    }
  }
}

void Trajectory::validate() const {
  const auto n = static_cast<Eigen::Index>(times.size());
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw std::invalid_argument("trajectory times must be strictly increasing");
    }
  }
  if (x.cols() != n || (u.size() > 0 && u.cols() != n)) {
    throw DimensionError("trajectory sample counts disagree with times");
  }
  if (lambda && lambda->cols() != n) {
    throw DimensionError("costate sample count disagrees with times");
  }
}

}  // namespace ocpsens
