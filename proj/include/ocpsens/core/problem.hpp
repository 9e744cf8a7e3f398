#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ocpsens/core/linalg.hpp"

namespace ocpsens {

/// Problem dimensions. The packed argument y = (x, u, p) has length n_y and
/// the augmented argument (y, g) used by f and l has length n_y + n_g.
struct Dims {
  int n_x = 1;
  int n_u = 0;
  int n_p = 0;
  int n_g = 1;

  int n_y() const { return n_x + n_u + n_p; }
  int n_yg() const { return n_y() + n_g; }

  int x_offset() const { return 0; }
  int u_offset() const { return n_x; }
  int p_offset() const { return n_x + n_u; }
  int g_offset() const { return n_y(); }

  /// Throws DimensionError on negative sizes or n_x < 1.
  void validate() const;
};

/// Packs (x, u, p) into y.
Vector pack_y(const Vector& x, const Vector& u, const Vector& p);

/// The perturbable sub-model g(t, y) with first and second partials in y.
///
/// The Jacobian is n_g x n_y with column blocks (g_x, g_u, g_p). hessians()
/// returns one symmetric n_y x n_y matrix per output component.
struct ComponentFunction {
  int n_g = 0;
  std::function<Vector(double t, const Vector& y)> value;
  std::function<Matrix(double t, const Vector& y)> jacobian;
  std::function<std::vector<Matrix>(double t, const Vector& y)> hessians;

  bool has_hessians() const { return static_cast<bool>(hessians); }
};

/// State equation right-hand side f(t, y, g).
///
/// jacobian() is n_x x (n_y + n_g) with columns ordered (x, u, p, g);
/// weighted_hessian(t, y, g, w) returns sum_i w_i * hess(f_i) over the same
/// ordering.
struct DynamicsFunction {
  std::function<Vector(double t, const Vector& y, const Vector& g)> value;
  std::function<Matrix(double t, const Vector& y, const Vector& g)> jacobian;
  std::function<Matrix(double t, const Vector& y, const Vector& g,
                       const Vector& w)>
      weighted_hessian;
};

/// Scalar integrand l(t, y, g); gradient/Hessian over (x, u, p, g).
struct RunningCostFunction {
  std::function<double(double t, const Vector& y, const Vector& g)> value;
  std::function<Vector(double t, const Vector& y, const Vector& g)> gradient;
  std::function<Matrix(double t, const Vector& y, const Vector& g)> hessian;
};

/// Mayer term phi(x_f, p); gradient/Hessian over (x_f, p).
struct TerminalCostFunction {
  std::function<double(const Vector& xf, const Vector& p)> value;
  std::function<Vector(const Vector& xf, const Vector& p)> gradient;
  std::function<Matrix(const Vector& xf, const Vector& p)> hessian;
};

struct ProblemFunctions {
  DynamicsFunction dynamics;
  std::optional<RunningCostFunction> running_cost;
  std::optional<TerminalCostFunction> terminal_cost;

  bool has_second_derivatives() const;
};

/// Quantity of interest in Bolza form; only first derivatives are needed.
struct QoiFunctions {
  std::optional<TerminalCostFunction> terminal;
  std::optional<RunningCostFunction> running;
};

/// Elementwise box bounds; infinite entries mean "no bound".
struct Bounds {
  Vector x_lower, x_upper;
  Vector u_lower, u_upper;
  Vector p_lower, p_upper;

  static Bounds unbounded(const Dims& dims);
  bool any_finite() const;
};

struct OcpProblem {
  Dims dims;
  double t0 = 0.0;
  double tf = 1.0;
  Vector x0;
  ProblemFunctions funcs;
  ComponentFunction g;
  Bounds bounds;

  /// Index into p of the duration T when the horizon is the normalized
  /// interval [0, 1] and the dynamics are already multiplied by T.
  std::optional<int> duration_index;

  void validate() const;
};

/// Sampled trajectory. Columns of x and u correspond to entries of times.
struct Trajectory {
  std::vector<double> times;
  Matrix x;
  Matrix u;
  Vector p;
  std::optional<Matrix> lambda;

  /// Throws on non-increasing times or inconsistent sample counts.
  void validate() const;
};

}  // namespace ocpsens
