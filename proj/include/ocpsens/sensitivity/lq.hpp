#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ocpsens/collocation/ocp_solve.hpp"
#include "ocpsens/core/problem.hpp"
#include "ocpsens/nlp/kkt_linear.hpp"

namespace ocpsens {

/// A bound multiplier at the base solution is not negligible; the
/// sensitivity system assumes no active inequality constraints.
class ActiveBoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The LQ KKT matrix has the wrong inertia (second-order sufficiency fails
/// numerically) or is singular.
class SsocViolationError : public std::runtime_error {
 public:
  SsocViolationError(const std::string& what, Inertia inertia)
      : std::runtime_error(what), inertia_{inertia} {}
  const Inertia& inertia() const { return inertia_; }

 private:
  Inertia inertia_;
};

/// Linearization data at one collocation node. Blocks of H are over
/// y = (x, u, p) and already include the chain rule through g(t, y).
struct LqSample {
  double t = 0.0;
  double weight = 0.0;  // quadrature weight W_j
  Vector y;
  Vector g;
  Vector lambda;
  Matrix g_y;                    // n_g x n_y
  Matrix f_y;                    // n_x x n_y, total: (A, B, C)
  Matrix f_g;                    // n_x x n_g
  Vector d;                      // f_g^T lambda + grad_g l
  Matrix h_yy;                   // n_y x n_y
  Matrix h_yg;                   // n_y x n_g
};

/// LQ data of the sensitivity and adjoint systems at a converged solution,
/// with the shared KKT matrix factored once.
class LqData {
 public:
  const OcpProblem& problem() const { return problem_; }
  const CollocationGrid& grid() const { return grid_; }
  const DiscreteTrajectory& base() const { return base_; }
  const std::vector<LqSample>& samples() const { return samples_; }
  /// grad^2 phi over (x_f, p) at the base solution.
  const Matrix& terminal_hessian() const { return terminal_hessian_; }

  Matrix a(int j) const { return samples_[j].f_y.leftCols(dims().n_x); }
  Matrix b(int j) const { return samples_[j].f_y.middleCols(dims().n_x, dims().n_u); }
  Matrix c(int j) const { return samples_[j].f_y.rightCols(dims().n_p); }
  const Vector& d(int j) const { return samples_[j].d; }
  /// Block (r, c) of H_yy with r, c in {'x', 'u', 'p'}, or of H_yg with c == 'g'.
  Matrix h(int j, char r, char c) const;

  const Dims& dims() const { return problem_.dims; }
  int num_nodes() const { return static_cast<int>(samples_.size()); }

  /// The assembled KKT matrix over [X_1..X_N | U | p | defect multipliers].
  const SparseMatrix& kkt() const { return kkt_; }
  const Inertia& inertia() const { return factor_->inertia(); }

  /// Solves kkt() * s = rhs; the normwise backward error
  /// |K s - rhs| / (|K| |s| + |rhs|) is checked against 1e-10.
  Vector solve(const Vector& rhs) const;

  int num_primal() const;
  int x_col(int point, int comp) const;  // point in 1..N
  int u_col(int node, int comp) const;
  int p_col(int comp) const;
  int defect_row(int node, int comp) const;

 private:
  friend LqData assemble_lq_data(const OcpProblem&, const KktSolution&);
  OcpProblem problem_;
  CollocationGrid grid_{CollocationGrid::uniform(1, 1, 0.0, 1.0)};
  DiscreteTrajectory base_;
  std::vector<LqSample> samples_;
  Matrix terminal_hessian_;
  SparseMatrix kkt_;
  Vector equil_;  // symmetric scaling applied before factoring
  double kkt_norm_ = 0.0;  // 1-norm
  std::shared_ptr<const SymmetricFactorization> factor_;
};

/// Assemble at a solution of `problem` on sol.grid. Throws ActiveBoundError
/// if any bound multiplier exceeds 1e-6, SsocViolationError if the KKT
/// matrix lacks the inertia (n_primal, n_defects, 0), and
/// MissingDerivativeError without second derivatives.
LqData assemble_lq_data(const OcpProblem& problem, const KktSolution& sol);

/// Samples of a perturbation dg and its y-partials at the nodes of a base
/// trajectory.
struct PerturbationData {
  std::vector<Vector> dg;    // n_g
  std::vector<Matrix> dg_y;  // n_g x n_y, columns (x, u, p)

  int size() const { return static_cast<int>(dg.size()); }
  PerturbationData scaled(double alpha) const;
};

PerturbationData zero_perturbation(const LqData& lq);

/// Samples of a - b along the base trajectory of `lq`.
PerturbationData perturbation_between(const ComponentFunction& a, const ComponentFunction& b,
                                      const LqData& lq);

/// Per-node variations: dx has N + 1 columns with dx(:, 0) = 0.
struct SensitivitySolution {
  Matrix dx;
  Matrix du;
  Vector dp;
  Matrix dlambda;
  double residual = 0.0;  // relative KKT residual of the linear solve
};

/// Solution of the linearized discrete optimality system for the direction
/// `pert`; one solve with the factored KKT matrix.
SensitivitySolution solve_sensitivity(const LqData& lq, const PerturbationData& pert);

/// Directional QoI derivative from a forward sensitivity solution.
double forward_qoi_derivative(const LqData& lq, const SensitivitySolution& dz,
                              const PerturbationData& pert, const QoiFunctions& qoi);

/// QoI first derivatives at the base solution. l_y is the total gradient
/// grad_y l + g_y^T grad_g l at each node.
struct QoiGradients {
  Vector phi_x;
  Vector phi_p;
  std::vector<Vector> l_y;
  std::vector<Vector> l_g;
};

QoiGradients qoi_gradients(const LqData& lq, const QoiFunctions& qoi);

/// Splits a raw solution of lq.kkt() into per-node variations.
SensitivitySolution unpack_lq_solution(const LqData& lq, const Vector& sol);

/// Flattened (x_1..x_N, u, p) of a solution, for norms and comparisons.
Vector stack(const SensitivitySolution& s);

}  // namespace ocpsens
