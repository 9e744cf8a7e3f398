#include "ocpsens/collocation/grid.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace ocpsens {

CollocationGrid::CollocationGrid(std::vector<double> mesh, int nodes_per_interval,
                                 double t0, double tf)
    : mesh_{std::move(mesh)}, n_{nodes_per_interval}, rule_{lgr_nodes(nodes_per_interval)} {
  if (mesh_.size() < 2 || mesh_.front() != 0.0 || mesh_.back() != 1.0) {
    throw std::invalid_argument("mesh must start at 0 and end at 1");
  }
  for (std::size_t i = 1; i < mesh_.size(); ++i) {
    if (!(mesh_[i] > mesh_[i - 1])) {
      throw std::invalid_argument("mesh breakpoints must be increasing");
    }
  }
  if (!(t0 < tf)) throw std::invalid_argument("grid horizon requires t0 < tf");

  breakpoints_.resize(mesh_.size());
  for (std::size_t i = 0; i < mesh_.size(); ++i) {
    breakpoints_[i] = t0 + (tf - t0) * mesh_[i];
  }
  breakpoints_.front() = t0;
  breakpoints_.back() = tf;

  support_.resize(n_ + 1);
  support_[0] = -1.0;
  support_.tail(n_) = rule_.nodes;
  bary_state_ = barycentric_weights(support_);
  bary_control_ = barycentric_weights(rule_.nodes);
  d_ref_ = differentiation_matrix(support_).bottomRows(n_);

  const int nn = num_nodes();
  state_times_.resize(nn + 1);
  weights_.resize(nn);
  state_times_[0] = t0;
  for (int k = 0; k < num_intervals(); ++k) {
    const double a = breakpoints_[k];
    const double h = interval_length(k);
    for (int i = 0; i < n_; ++i) {
      const int j = k * n_ + i;
      state_times_[j + 1] = (i == n_ - 1) ? breakpoints_[k + 1]
                                          : a + 0.5 * h * (rule_.nodes[i] + 1.0);
      weights_[j] = 0.5 * h * rule_.weights[i];
    }
  }
}

CollocationGrid CollocationGrid::uniform(int num_intervals, int nodes_per_interval,
                                         double t0, double tf) {
  if (num_intervals < 1) throw std::invalid_argument("need at least one interval");
  std::vector<double> mesh(num_intervals + 1);
  for (int k = 0; k <= num_intervals; ++k) {
    mesh[k] = static_cast<double>(k) / num_intervals;
  }
  return CollocationGrid(std::move(mesh), nodes_per_interval, t0, tf);
}

int CollocationGrid::locate(double t) const {
  if (!(t >= t0() && t <= tf())) {
    throw std::out_of_range("time " + std::to_string(t) + " outside horizon");
  }
  // First breakpoint >= t closes the containing interval (t_a, t_b].
  auto it = std::lower_bound(breakpoints_.begin() + 1, breakpoints_.end(), t);
  return static_cast<int>(it - breakpoints_.begin()) - 1;
}

bool CollocationGrid::same_layout(const CollocationGrid& other) const {
  return n_ == other.n_ && breakpoints_ == other.breakpoints_;
}

namespace {

double to_reference(const CollocationGrid& grid, int k, double t) {
  const double a = grid.breakpoints()[k];
  return 2.0 * (t - a) / grid.interval_length(k) - 1.0;
}

}  // namespace

Vector interpolate_states(const CollocationGrid& grid, const Matrix& values,
                          double t) {
  if (values.cols() != grid.num_state_points()) {
    throw std::invalid_argument("state samples do not match the grid");
  }
  const int k = grid.locate(t);
  const int n = grid.nodes_per_interval();
  const int start = grid.interval_start(k);
  // Stored samples at support points are returned exactly.
  for (int m = 0; m <= n; ++m) {
    if (grid.state_times()[start + m] == t) return values.col(start + m);
  }
  return barycentric_interpolate(grid.support_, grid.bary_state_,
                                 values.middleCols(start, n + 1),
                                 to_reference(grid, k, t));
}

Vector interpolate_controls(const CollocationGrid& grid, const Matrix& values,
                            double t) {
  if (values.cols() != grid.num_nodes()) {
    throw std::invalid_argument("node samples do not match the grid");
  }
  const int k = grid.locate(t);
  const int n = grid.nodes_per_interval();
  for (int i = 0; i < n; ++i) {
    if (grid.state_times()[k * n + i + 1] == t) return values.col(k * n + i);
  }
  if (n == 1) return values.col(k);
  return barycentric_interpolate(grid.rule_.nodes, grid.bary_control_,
                                 values.middleCols(k * n, n),
                                 to_reference(grid, k, t));
}

}  // namespace ocpsens
