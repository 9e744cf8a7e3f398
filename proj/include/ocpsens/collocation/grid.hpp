#pragma once

#include <vector>

#include "ocpsens/collocation/lgr.hpp"
#include "ocpsens/core/linalg.hpp"

namespace ocpsens {

/// Mesh of intervals on [t0, tf], each carrying the same flipped-Radau rule.
///
/// State values live at the N + 1 "state points" {t0} U nodes, controls at the
/// N = num_intervals * nodes_per_interval collocation nodes. Node j (0-based)
/// belongs to interval j / n and its interval starts at state point
/// (j / n) * n; node j itself is state point j + 1.
class CollocationGrid {
 public:
  /// `mesh` holds increasing breakpoints on [0, 1] including both ends.
  CollocationGrid(std::vector<double> mesh, int nodes_per_interval, double t0,
                  double tf);

  static CollocationGrid uniform(int num_intervals, int nodes_per_interval,
                                 double t0, double tf);

  int num_intervals() const { return static_cast<int>(breakpoints_.size()) - 1; }
  int nodes_per_interval() const { return n_; }
  int num_nodes() const { return num_intervals() * n_; }
  int num_state_points() const { return num_nodes() + 1; }
  double t0() const { return breakpoints_.front(); }
  double tf() const { return breakpoints_.back(); }

  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& mesh() const { return mesh_; }
  const RadauRule& rule() const { return rule_; }

  /// Reference differentiation rows: n x (n + 1), mapping values at
  /// {-1} U nodes to derivatives (w.r.t. the reference variable) at nodes.
  const Matrix& reference_differentiation() const { return d_ref_; }

  int interval_of_node(int j) const { return j / n_; }
  int local_index(int j) const { return j % n_; }
  /// State point index of the first support point of interval k.
  int interval_start(int k) const { return k * n_; }
  double interval_length(int k) const { return breakpoints_[k + 1] - breakpoints_[k]; }

  const Vector& state_times() const { return state_times_; }
  Vector node_times() const { return state_times_.tail(num_nodes()); }
  /// Physical quadrature weights W_j = w_i * h_k / 2; sum = tf - t0.
  const Vector& quadrature_weights() const { return weights_; }

  /// Index of the interval containing t: (t_a, t_b], with t0 in interval 0.
  /// Throws std::out_of_range outside [t0, tf].
  int locate(double t) const;

  bool same_layout(const CollocationGrid& other) const;

 private:
  std::vector<double> mesh_;
  std::vector<double> breakpoints_;
  int n_;
  RadauRule rule_;
  Vector support_;      // {-1} U nodes
  Vector bary_state_;   // barycentric weights on support_
  Vector bary_control_; // barycentric weights on nodes
  Matrix d_ref_;
  Vector state_times_;
  Vector weights_;

  friend Vector interpolate_states(const CollocationGrid&, const Matrix&, double);
  friend Vector interpolate_controls(const CollocationGrid&, const Matrix&, double);
};

/// Lagrange interpolation of values at the state points (n_x x (N + 1))
/// within the interval containing t. Exact at support points.
Vector interpolate_states(const CollocationGrid& grid, const Matrix& values,
                          double t);

/// Interpolation of node values (rows x N) with the degree n - 1 polynomial
/// of the containing interval (extrapolated on (t_a, first node)).
Vector interpolate_controls(const CollocationGrid& grid, const Matrix& values,
                            double t);

}  // namespace ocpsens
