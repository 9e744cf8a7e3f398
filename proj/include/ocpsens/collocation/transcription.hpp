#pragma once

#include <memory>

#include "ocpsens/collocation/grid.hpp"
#include "ocpsens/core/problem.hpp"
#include "ocpsens/nlp/nlp.hpp"

namespace ocpsens {

/// Discrete values on a collocation grid.
struct DiscreteTrajectory {
  Matrix x;       // n_x x (N + 1), state points
  Matrix u;       // n_u x N, nodes
  Vector p;
  Matrix lambda;  // n_x x N costate at nodes; empty when unknown
};

/// Flipped-Radau transcription of an OcpProblem.
///
/// Variables: [X_0 .. X_N | U_1 .. U_N | p]. Constraints: the initial
/// condition X_0 - x0 (n_x rows) followed by the defects
///   sum_m D_im X_{start+m} - (h_k / 2) f(t_j, y_j, g(t_j, y_j))
/// node by node. Objective: phi(X_N, p) + sum_j W_j l(t_j, y_j, g_j).
/// State bounds apply to X_1 .. X_N; X_0 is fixed by its equality rows.
class Transcription {
 public:
  Transcription(OcpProblem problem, CollocationGrid grid);

  const OcpProblem& problem() const;
  const CollocationGrid& grid() const;
  const Nlp& nlp() const;

  int x_index(int point, int comp) const;
  int u_index(int node, int comp) const;
  int p_index(int comp) const;
  /// Row of component `comp` of the defect at node j.
  int defect_row(int node, int comp) const;

  Vector pack(const DiscreteTrajectory& traj) const;
  DiscreteTrajectory unpack(const Vector& z) const;

  /// Discrete costate lambda_j = -nu_j / w_i from the defect multipliers.
  Matrix costate(const Vector& multipliers) const;

  /// y = (x, u, p) at node j.
  Vector node_y(const Vector& z, int node) const;

 private:
  struct Data;
  std::shared_ptr<const Data> data_;
};

inline Transcription transcribe(const OcpProblem& problem,
                                const CollocationGrid& grid) {
  return Transcription(problem, grid);
}

/// Samples at the state points; the control at t0 is extrapolated from the
/// first interval's control polynomial.
Trajectory to_trajectory(const CollocationGrid& grid, const DiscreteTrajectory& traj);

}  // namespace ocpsens
