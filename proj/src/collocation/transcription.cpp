#include "ocpsens/collocation/transcription.hpp"

#include <limits>
#include <vector>

#include "ocpsens/core/composition.hpp"
#include "ocpsens/core/errors.hpp"

namespace ocpsens {

struct Transcription::Data {
  OcpProblem prob;
  CollocationGrid grid;
  Nlp nlp;
  int n_x, n_u, n_p, n_y;
  int num_nodes;
  int u_offset, p_offset;

  Data(OcpProblem p, CollocationGrid g) : prob{std::move(p)}, grid{std::move(g)} {
    const Dims& d = prob.dims;
    n_x = d.n_x;
    n_u = d.n_u;
    n_p = d.n_p;
    n_y = d.n_y();
    num_nodes = grid.num_nodes();
    u_offset = n_x * (num_nodes + 1);
    p_offset = u_offset + n_u * num_nodes;
  }

  int num_vars() const { return p_offset + n_p; }

  // Variable indices of y_j = (x at state point j + 1, u_j, p).
  std::vector<int> y_indices(int j) const {
    std::vector<int> idx(n_y);
    for (int c = 0; c < n_x; ++c) idx[c] = (j + 1) * n_x + c;
    for (int c = 0; c < n_u; ++c) idx[n_x + c] = u_offset + j * n_u + c;
    for (int c = 0; c < n_p; ++c) idx[n_x + n_u + c] = p_offset + c;
    return idx;
  }

  Vector y_at(const Vector& z, int j) const {
    Vector y(n_y);
    y.head(n_x) = z.segment((j + 1) * n_x, n_x);
    y.segment(n_x, n_u) = z.segment(u_offset + j * n_u, n_u);
    y.tail(n_p) = z.segment(p_offset, n_p);
    return y;
  }

  Vector xf(const Vector& z) const { return z.segment(num_nodes * n_x, n_x); }
  Vector p(const Vector& z) const { return z.segment(p_offset, n_p); }

  double node_time(int j) const { return grid.state_times()[j + 1]; }

  // Terminal-cost indices: (X_N, p).
  std::vector<int> terminal_indices() const {
    std::vector<int> idx(n_x + n_p);
    for (int c = 0; c < n_x; ++c) idx[c] = num_nodes * n_x + c;
    for (int c = 0; c < n_p; ++c) idx[n_x + c] = p_offset + c;
    return idx;
  }

  double objective(const Vector& z) const {
    double f = 0.0;
    if (prob.funcs.terminal_cost) f += prob.funcs.terminal_cost->value(xf(z), p(z));
    if (prob.funcs.running_cost) {
      const Vector& w = grid.quadrature_weights();
      for (int j = 0; j < num_nodes; ++j) {
        const double t = node_time(j);
        const Vector y = y_at(z, j);
        f += w[j] * prob.funcs.running_cost->value(t, y, prob.g.value(t, y));
      }
    }
    if (!std::isfinite(f)) throw ModelEvaluationError("non-finite objective", 0.0, z);
    return f;
  }

  Vector gradient(const Vector& z) const {
    Vector grad = Vector::Zero(num_vars());
    if (prob.funcs.terminal_cost) {
      const Vector gt = prob.funcs.terminal_cost->gradient(xf(z), p(z));
      const auto idx = terminal_indices();
      for (std::size_t a = 0; a < idx.size(); ++a) grad[idx[a]] += gt[a];
    }
    if (prob.funcs.running_cost) {
      const Vector& w = grid.quadrature_weights();
      for (int j = 0; j < num_nodes; ++j) {
        const double t = node_time(j);
        const Vector y = y_at(z, j);
        const ComponentSample gs = sample_component(prob.g, t, y, false);
        const Vector gl = chain_gradient(
            prob.funcs.running_cost->gradient(t, y, gs.value), gs.jacobian);
        const auto idx = y_indices(j);
        for (int a = 0; a < n_y; ++a) grad[idx[a]] += w[j] * gl[a];
      }
    }
    return grad;
  }

  Vector constraints(const Vector& z) const {
    Vector c(n_x * (num_nodes + 1));
    c.head(n_x) = z.head(n_x) - prob.x0;
    const Matrix& dref = grid.reference_differentiation();
    const int n = grid.nodes_per_interval();
    for (int j = 0; j < num_nodes; ++j) {
      const int k = grid.interval_of_node(j);
      const int i = grid.local_index(j);
      const int start = grid.interval_start(k);
      const double half_h = 0.5 * grid.interval_length(k);
      Vector r = Vector::Zero(n_x);
      for (int m = 0; m <= n; ++m) {
        r += dref(i, m) * z.segment((start + m) * n_x, n_x);
      }
      r -= half_h * eval_composed_dynamics(prob, node_time(j), y_at(z, j));
      c.segment(n_x + j * n_x, n_x) = r;
    }
    return c;
  }

  SparseMatrix jacobian(const Vector& z) const {
    const Matrix& dref = grid.reference_differentiation();
    const int n = grid.nodes_per_interval();
    std::vector<Triplet> trip;
    trip.reserve(n_x + num_nodes * n_x * ((n + 1) + n_y));
    for (int c = 0; c < n_x; ++c) trip.emplace_back(c, c, 1.0);
    for (int j = 0; j < num_nodes; ++j) {
      const int k = grid.interval_of_node(j);
      const int i = grid.local_index(j);
      const int start = grid.interval_start(k);
      const double half_h = 0.5 * grid.interval_length(k);
      const int row0 = n_x + j * n_x;
      for (int m = 0; m <= n; ++m) {
        for (int c = 0; c < n_x; ++c) {
          trip.emplace_back(row0 + c, (start + m) * n_x + c, dref(i, m));
        }
      }
      const double t = node_time(j);
      const Vector y = y_at(z, j);
      const ComponentSample gs = sample_component(prob.g, t, y, false);
      const Matrix fy = chain_jacobian(
          prob.funcs.dynamics.jacobian(t, y, gs.value), gs.jacobian);
      if (!fy.allFinite()) throw ModelEvaluationError("non-finite dynamics Jacobian", t, y);
      const auto idx = y_indices(j);
      for (int c = 0; c < n_x; ++c) {
        for (int a = 0; a < n_y; ++a) {
          trip.emplace_back(row0 + c, idx[a], -half_h * fy(c, a));
        }
      }
    }
    SparseMatrix jac(n_x * (num_nodes + 1), num_vars());
    jac.setFromTriplets(trip.begin(), trip.end());
    return jac;
  }

  SparseMatrix hessian(const Vector& z, double sigma, const Vector& nu) const {
    std::vector<Triplet> trip;
    trip.reserve(num_nodes * n_y * n_y + (n_x + n_p) * (n_x + n_p));
    if (prob.funcs.terminal_cost) {
      const Matrix ht = sigma * prob.funcs.terminal_cost->hessian(xf(z), p(z));
      const auto idx = terminal_indices();
      for (std::size_t a = 0; a < idx.size(); ++a) {
        for (std::size_t b = 0; b < idx.size(); ++b) {
          trip.emplace_back(idx[a], idx[b], ht(a, b));
        }
      }
    }
    const Vector& w = grid.quadrature_weights();
    const int n_g = prob.dims.n_g;
    for (int j = 0; j < num_nodes; ++j) {
      const int k = grid.interval_of_node(j);
      const double t = node_time(j);
      const Vector y = y_at(z, j);
      const ComponentSample gs = sample_component(prob.g, t, y, true);

      // Scalar per node: sigma W_j l + mu^T f with mu = -(h/2) nu_j.
      const Vector mu = -0.5 * grid.interval_length(k) * nu.segment(n_x + j * n_x, n_x);
      Matrix h_yg = prob.funcs.dynamics.weighted_hessian(t, y, gs.value, mu);
      Vector grad_g = prob.funcs.dynamics.jacobian(t, y, gs.value)
                          .middleCols(n_y, n_g)
                          .transpose() *
                      mu;
      if (prob.funcs.running_cost) {
        const double s = sigma * w[j];
        h_yg += s * prob.funcs.running_cost->hessian(t, y, gs.value);
        grad_g += s * prob.funcs.running_cost->gradient(t, y, gs.value).tail(n_g);
      }
      const Matrix h = chain_hessian(h_yg, grad_g, gs.jacobian, gs.hessians);
      if (!h.allFinite()) throw ModelEvaluationError("non-finite Hessian", t, y);
      const auto idx = y_indices(j);
      for (int a = 0; a < n_y; ++a) {
        for (int b = 0; b < n_y; ++b) trip.emplace_back(idx[a], idx[b], h(a, b));
      }
    }
    SparseMatrix hess(num_vars(), num_vars());
    hess.setFromTriplets(trip.begin(), trip.end());
    return hess;
  }
};

Transcription::Transcription(OcpProblem problem, CollocationGrid grid) {
  problem.validate();
  if (grid.t0() != problem.t0 || grid.tf() != problem.tf) {
    throw DimensionError("grid horizon differs from the problem horizon");
  }
  auto data = std::make_shared<Data>(std::move(problem), std::move(grid));
  const Data* d = data.get();

  Nlp& nlp = data->nlp;
  nlp.num_variables = d->num_vars();
  nlp.num_constraints = d->n_x * (d->num_nodes + 1);
  constexpr double inf = std::numeric_limits<double>::infinity();
  nlp.lower = Vector::Constant(nlp.num_variables, -inf);
  nlp.upper = Vector::Constant(nlp.num_variables, inf);
  const Bounds& b = d->prob.bounds;
  for (int pt = 1; pt <= d->num_nodes; ++pt) {
    nlp.lower.segment(pt * d->n_x, d->n_x) = b.x_lower;
    nlp.upper.segment(pt * d->n_x, d->n_x) = b.x_upper;
  }
  for (int j = 0; j < d->num_nodes; ++j) {
    nlp.lower.segment(d->u_offset + j * d->n_u, d->n_u) = b.u_lower;
    nlp.upper.segment(d->u_offset + j * d->n_u, d->n_u) = b.u_upper;
  }
  nlp.lower.segment(d->p_offset, d->n_p) = b.p_lower;
  nlp.upper.segment(d->p_offset, d->n_p) = b.p_upper;

  // The callables keep the data alive and hold no mutable state.
  std::shared_ptr<const Data> keep = data;
  nlp.objective = [keep](const Vector& z) { return keep->objective(z); };
  nlp.gradient = [keep](const Vector& z) { return keep->gradient(z); };
  nlp.constraints = [keep](const Vector& z) { return keep->constraints(z); };
  nlp.jacobian = [keep](const Vector& z) { return keep->jacobian(z); };
  nlp.hessian = [keep](const Vector& z, double sigma, const Vector& nu) {
    return keep->hessian(z, sigma, nu);
  };
  data_ = std::move(data);
}

const OcpProblem& Transcription::problem() const { return data_->prob; }
const CollocationGrid& Transcription::grid() const { return data_->grid; }
const Nlp& Transcription::nlp() const { return data_->nlp; }

int Transcription::x_index(int point, int comp) const {
  return point * data_->n_x + comp;
}
int Transcription::u_index(int node, int comp) const {
  return data_->u_offset + node * data_->n_u + comp;
}
int Transcription::p_index(int comp) const { return data_->p_offset + comp; }
int Transcription::defect_row(int node, int comp) const {
  return data_->n_x + node * data_->n_x + comp;
}

Vector Transcription::pack(const DiscreteTrajectory& traj) const {
  const Data& d = *data_;
  if (traj.x.rows() != d.n_x || traj.x.cols() != d.num_nodes + 1 ||
      traj.u.rows() != d.n_u || traj.u.cols() != d.num_nodes ||
      traj.p.size() != d.n_p) {
    throw DimensionError("trajectory does not match the transcription layout");
  }
  Vector z(d.num_vars());
  z.head(d.u_offset) = traj.x.reshaped();
  z.segment(d.u_offset, d.n_u * d.num_nodes) = traj.u.reshaped();
  z.tail(d.n_p) = traj.p;
  return z;
}

DiscreteTrajectory Transcription::unpack(const Vector& z) const {
  const Data& d = *data_;
  if (z.size() != d.num_vars()) throw DimensionError("NLP vector has the wrong size");
  DiscreteTrajectory traj;
  traj.x = z.head(d.u_offset).reshaped(d.n_x, d.num_nodes + 1);
  traj.u = z.segment(d.u_offset, d.n_u * d.num_nodes).reshaped(d.n_u, d.num_nodes);
  traj.p = z.tail(d.n_p);
  return traj;
}

Matrix Transcription::costate(const Vector& multipliers) const {
  const Data& d = *data_;
  if (multipliers.size() != d.n_x * (d.num_nodes + 1)) {
    throw DimensionError("multiplier vector has the wrong size");
  }
  const Vector& w = d.grid.rule().weights;
  Matrix lambda(d.n_x, d.num_nodes);
  for (int j = 0; j < d.num_nodes; ++j) {
    lambda.col(j) = -multipliers.segment(d.n_x + j * d.n_x, d.n_x) /
                    w[d.grid.local_index(j)];
  }
  return lambda;
}

Vector Transcription::node_y(const Vector& z, int node) const {
  return data_->y_at(z, node);
}

Trajectory to_trajectory(const CollocationGrid& grid, const DiscreteTrajectory& traj) {
  Trajectory out;
  const Vector& ts = grid.state_times();
  out.times.assign(ts.begin(), ts.end());
  out.x = traj.x;
  out.u.resize(traj.u.rows(), grid.num_state_points());
  out.u.col(0) = interpolate_controls(grid, traj.u, grid.t0());
  out.u.rightCols(grid.num_nodes()) = traj.u;
  out.p = traj.p;
  if (traj.lambda.size() > 0) {
    Matrix lam(traj.lambda.rows(), grid.num_state_points());
    lam.col(0) = interpolate_controls(grid, traj.lambda, grid.t0());
    lam.rightCols(grid.num_nodes()) = traj.lambda;
    out.lambda = lam;
  }
  return out;
}

}  // namespace ocpsens
