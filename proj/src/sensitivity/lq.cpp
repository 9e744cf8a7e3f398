#include "ocpsens/sensitivity/lq.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "ocpsens/core/composition.hpp"
#include "ocpsens/core/errors.hpp"

namespace ocpsens {

namespace {

constexpr double kActiveBoundTolerance = 1e-6;
constexpr double kSolveTolerance = 1e-10;

Vector base_y(const DiscreteTrajectory& tr, int j) {
  return pack_y(tr.x.col(j + 1), tr.u.col(j), tr.p);
}

std::string describe_variable(const Dims& d, int num_nodes, int index) {
  const int nx_all = d.n_x * (num_nodes + 1);
  if (index < nx_all) {
    return "x[" + std::to_string(index % d.n_x) + "] at state point " +
           std::to_string(index / d.n_x);
  }
  index -= nx_all;
  if (index < d.n_u * num_nodes) {
    return "u[" + std::to_string(index % d.n_u) + "] at node " + std::to_string(index / d.n_u);
  }
  return "p[" + std::to_string(index - d.n_u * num_nodes) + "]";
}

void check_no_active_bounds(const OcpProblem& prob, const KktSolution& sol) {
  const NlpSolution& s = sol.nlp;
  for (const Vector* z : {&s.z_lower, &s.z_upper}) {
    for (Eigen::Index i = 0; i < z->size(); ++i) {
      if ((*z)[i] > kActiveBoundTolerance) {
        throw ActiveBoundError(
            std::string(z == &s.z_lower ? "lower" : "upper") + " bound on " +
            describe_variable(prob.dims, sol.grid.num_nodes(), static_cast<int>(i)) +
            " is active (multiplier " + std::to_string((*z)[i]) + ")");
      }
    }
  }
}

// Symmetric Ruiz scaling: D with rows and columns of D K D at unit max norm.
// Congruence keeps the inertia, and SI entries span too many decades for the
// zero-pivot test otherwise.
Vector ruiz_equilibration(const SparseMatrix& k) {
  Vector d = Vector::Ones(k.rows());
  for (int sweep = 0; sweep < 20; ++sweep) {
    Vector row_max = Vector::Zero(k.rows());
    for (int c = 0; c < k.outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(k, c); it; ++it) {
        const double v = std::abs(d[it.row()] * it.value() * d[it.col()]);
        row_max[it.row()] = std::max(row_max[it.row()], v);
      }
    }
    double spread = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (row_max[i] > 0.0) {
        d[i] /= std::sqrt(row_max[i]);
        spread = std::max(spread, std::abs(1.0 - row_max[i]));
      }
    }
    if (spread < 1e-3) break;
  }
  return d;
}

int index_of(char c) {
  switch (c) {
    case 'x': return 0;
    case 'u': return 1;
    case 'p': return 2;
    case 'g': return 3;
  }
  throw std::invalid_argument(std::string("unknown block '") + c + "'");
}

}  // namespace

Matrix LqData::h(int j, char r, char c) const {
  const Dims& dm = dims();
  const int off[3] = {0, dm.n_x, dm.n_x + dm.n_u};
  const int len[3] = {dm.n_x, dm.n_u, dm.n_p};
  const int ri = index_of(r);
  const int ci = index_of(c);
  if (ri == 3) throw std::invalid_argument("row block must be x, u or p");
  const LqSample& s = samples_[j];
  if (ci == 3) return s.h_yg.middleRows(off[ri], len[ri]);
  return s.h_yy.block(off[ri], off[ci], len[ri], len[ci]);
}

int LqData::num_primal() const {
  const Dims& d = dims();
  return (d.n_x + d.n_u) * num_nodes() + d.n_p;
}
int LqData::x_col(int point, int comp) const { return (point - 1) * dims().n_x + comp; }
int LqData::u_col(int node, int comp) const {
  return dims().n_x * num_nodes() + node * dims().n_u + comp;
}
int LqData::p_col(int comp) const { return (dims().n_x + dims().n_u) * num_nodes() + comp; }
int LqData::defect_row(int node, int comp) const {
  return num_primal() + node * dims().n_x + comp;
}

Vector LqData::solve(const Vector& rhs) const {
  auto scaled_solve = [&](const Vector& b) {
    return Vector(equil_.cwiseProduct(factor_->solve(equil_.cwiseProduct(b))));
  };
  Vector s = scaled_solve(rhs);
  // Normwise backward error; |K| |s| dominates |rhs| under SI units.
  const double k_norm = kkt_norm_;
  auto backward = [&](const Vector& x, const Vector& r) {
    return r.norm() / std::max(k_norm * x.norm() + rhs.norm(), 1e-300);
  };
  double res = backward(s, kkt_ * s - rhs);
  // Refinement in the unscaled residual.
  for (int k = 0; k < 5 && !(res <= 0.01 * kSolveTolerance); ++k) {
    const Vector trial = s - scaled_solve(kkt_ * s - rhs);
    const double r = backward(trial, kkt_ * trial - rhs);
    if (!(r < res)) break;
    s = trial;
    res = r;
  }
  if (!(res <= kSolveTolerance) && rhs.norm() > 0.0) {
    throw SsocViolationError(fmt::format("LQ KKT solve residual {:.3e}", res), inertia());
  }
  return s;
}

LqData assemble_lq_data(const OcpProblem& problem, const KktSolution& sol) {
  problem.validate();
  if (!problem.funcs.has_second_derivatives() || !problem.g.has_hessians()) {
    throw MissingDerivativeError("the LQ data needs second derivatives of f, l, phi and g");
  }
  const CollocationGrid& grid = sol.grid;
  const Dims& dm = problem.dims;
  const int n = grid.num_nodes();
  const DiscreteTrajectory& tr = sol.traj;
  if (tr.x.rows() != dm.n_x || tr.x.cols() != n + 1 || tr.u.rows() != dm.n_u ||
      tr.u.cols() != n || tr.p.size() != dm.n_p) {
    throw DimensionError("base trajectory does not match the grid");
  }
  if (tr.lambda.rows() != dm.n_x || tr.lambda.cols() != n) {
    throw DimensionError("base trajectory carries no costate");
  }
  check_no_active_bounds(problem, sol);

  LqData lq;
  lq.problem_ = problem;
  lq.grid_ = grid;
  lq.base_ = tr;
  const int ny = dm.n_y();
  const int ng = dm.n_g;
  const Vector& w = grid.quadrature_weights();
  lq.samples_.resize(n);
  for (int j = 0; j < n; ++j) {
    LqSample& s = lq.samples_[j];
    s.t = grid.state_times()[j + 1];
    s.weight = w[j];
    s.y = base_y(tr, j);
    s.lambda = tr.lambda.col(j);
    const ComponentSample gs = sample_component(problem.g, s.t, s.y, true);
    s.g = gs.value;
    s.g_y = gs.jacobian;
    const Matrix fj = problem.funcs.dynamics.jacobian(s.t, s.y, s.g);
    s.f_y = chain_jacobian(fj, s.g_y);
    s.f_g = fj.rightCols(ng);
    Matrix hfull = problem.funcs.dynamics.weighted_hessian(s.t, s.y, s.g, s.lambda);
    s.d = s.f_g.transpose() * s.lambda;
    if (problem.funcs.running_cost) {
      const RunningCostFunction& l = *problem.funcs.running_cost;
      hfull += l.hessian(s.t, s.y, s.g);
      s.d += l.gradient(s.t, s.y, s.g).tail(ng);
    }
    s.h_yy = chain_hessian(hfull, s.d, s.g_y, gs.hessians);
    s.h_yg = hfull.block(0, ny, ny, ng) + s.g_y.transpose() * hfull.block(ny, ny, ng, ng);
    if (!s.h_yy.allFinite() || !s.h_yg.allFinite() || !s.f_y.allFinite() || !s.d.allFinite()) {
      throw ModelEvaluationError("non-finite LQ block", s.t, s.y);
    }
  }
  const int ntp = dm.n_x + dm.n_p;
  lq.terminal_hessian_ = Matrix::Zero(ntp, ntp);
  if (problem.funcs.terminal_cost) {
    lq.terminal_hessian_ = problem.funcs.terminal_cost->hessian(tr.x.col(n), tr.p);
  }

  // KKT over [X_1..X_N | U | p] and the defect multipliers; X_0 is fixed.
  const int np = lq.num_primal();
  const int m = dm.n_x * n;
  std::vector<Eigen::Triplet<double>> trip;
  auto y_col = [&](int j, int a) {
    if (a < dm.n_x) return lq.x_col(j + 1, a);
    if (a < dm.n_x + dm.n_u) return lq.u_col(j, a - dm.n_x);
    return lq.p_col(a - dm.n_x - dm.n_u);
  };
  for (int j = 0; j < n; ++j) {
    const LqSample& s = lq.samples_[j];
    for (int a = 0; a < ny; ++a) {
      for (int b = 0; b < ny; ++b) {
        const double v = s.weight * s.h_yy(a, b);
        if (v != 0.0) trip.emplace_back(y_col(j, a), y_col(j, b), v);
      }
    }
  }
  auto tp_col = [&](int a) { return a < dm.n_x ? lq.x_col(n, a) : lq.p_col(a - dm.n_x); };
  for (int a = 0; a < ntp; ++a) {
    for (int b = 0; b < ntp; ++b) {
      const double v = lq.terminal_hessian_(a, b);
      if (v != 0.0) trip.emplace_back(tp_col(a), tp_col(b), v);
    }
  }
  const Matrix& dref = grid.reference_differentiation();
  const int nn = grid.nodes_per_interval();
  auto add_jac = [&](int row, int col, double v) {
    if (v == 0.0) return;
    trip.emplace_back(row, col, v);
    trip.emplace_back(col, row, v);
  };
  for (int j = 0; j < n; ++j) {
    const int k = grid.interval_of_node(j);
    const int i = grid.local_index(j);
    const int start = grid.interval_start(k);
    const double half_h = 0.5 * grid.interval_length(k);
    const LqSample& s = lq.samples_[j];
    for (int c = 0; c < dm.n_x; ++c) {
      const int row = lq.defect_row(j, c);
      for (int mm = 0; mm <= nn; ++mm) {
        if (start + mm == 0) continue;
        add_jac(row, lq.x_col(start + mm, c), dref(i, mm));
      }
      for (int a = 0; a < ny; ++a) add_jac(row, y_col(j, a), -half_h * s.f_y(c, a));
    }
  }
  lq.kkt_.resize(np + m, np + m);
  lq.kkt_.setFromTriplets(trip.begin(), trip.end());

  lq.kkt_norm_ = 0.0;
  for (int c = 0; c < lq.kkt_.outerSize(); ++c) {
    double col = 0.0;
    for (SparseMatrix::InnerIterator it(lq.kkt_, c); it; ++it) col += std::abs(it.value());
    lq.kkt_norm_ = std::max(lq.kkt_norm_, col);
  }
  lq.equil_ = ruiz_equilibration(lq.kkt_);
  const SparseMatrix scaled = lq.equil_.asDiagonal() * lq.kkt_ * lq.equil_.asDiagonal();
  auto fac = std::make_shared<SymmetricFactorization>(scaled);
  const Inertia& in = fac->inertia();
  if (in.positive != np || in.negative != m || in.zero != 0) {
    throw SsocViolationError(
        "LQ KKT inertia (+" + std::to_string(in.positive) + ", -" + std::to_string(in.negative) +
            ", 0:" + std::to_string(in.zero) + ") differs from (+" + std::to_string(np) + ", -" +
            std::to_string(m) + ", 0:0); second-order sufficiency fails",
        in);
  }
  lq.factor_ = std::move(fac);
  return lq;
}

PerturbationData PerturbationData::scaled(double alpha) const {
  PerturbationData out = *this;
  for (Vector& v : out.dg) v *= alpha;
  for (Matrix& m : out.dg_y) m *= alpha;
  return out;
}

PerturbationData zero_perturbation(const LqData& lq) {
  PerturbationData p;
  p.dg.assign(lq.num_nodes(), Vector::Zero(lq.dims().n_g));
  p.dg_y.assign(lq.num_nodes(), Matrix::Zero(lq.dims().n_g, lq.dims().n_y()));
  return p;
}

PerturbationData perturbation_between(const ComponentFunction& a, const ComponentFunction& b,
                                      const LqData& lq) {
  if (a.n_g != lq.dims().n_g || b.n_g != lq.dims().n_g) {
    throw DimensionError("component output size differs from the problem's n_g");
  }
  PerturbationData p;
  for (const LqSample& s : lq.samples()) {
    p.dg.push_back(a.value(s.t, s.y) - b.value(s.t, s.y));
    p.dg_y.push_back(a.jacobian(s.t, s.y) - b.jacobian(s.t, s.y));
  }
  return p;
}

namespace {

void check_perturbation(const LqData& lq, const PerturbationData& pert) {
  if (pert.size() != lq.num_nodes() || static_cast<int>(pert.dg_y.size()) != lq.num_nodes()) {
    throw DimensionError("perturbation samples do not match the LQ grid");
  }
  for (int j = 0; j < pert.size(); ++j) {
    if (pert.dg[j].size() != lq.dims().n_g || pert.dg_y[j].rows() != lq.dims().n_g ||
        pert.dg_y[j].cols() != lq.dims().n_y()) {
      throw DimensionError("perturbation sample has the wrong shape");
    }
  }
}

}  // namespace

SensitivitySolution unpack_lq_solution(const LqData& lq, const Vector& sol) {
  const Dims& dm = lq.dims();
  const int n = lq.num_nodes();
  SensitivitySolution out;
  out.dx = Matrix::Zero(dm.n_x, n + 1);
  out.du.resize(dm.n_u, n);
  out.dlambda.resize(dm.n_x, n);
  out.dp = sol.segment(lq.p_col(0), dm.n_p);
  const Vector& wref = lq.grid().rule().weights;
  for (int j = 0; j < n; ++j) {
    out.dx.col(j + 1) = sol.segment(lq.x_col(j + 1, 0), dm.n_x);
    out.du.col(j) = sol.segment(lq.u_col(j, 0), dm.n_u);
    out.dlambda.col(j) =
        -sol.segment(lq.defect_row(j, 0), dm.n_x) / wref[lq.grid().local_index(j)];
  }
  return out;
}

SensitivitySolution solve_sensitivity(const LqData& lq, const PerturbationData& pert) {
  check_perturbation(lq, pert);
  const Dims& dm = lq.dims();
  const int ny = dm.n_y();
  Vector rhs = Vector::Zero(lq.kkt().rows());
  for (int j = 0; j < lq.num_nodes(); ++j) {
    const LqSample& s = lq.samples()[j];
    const Vector cy = s.weight * (s.h_yg * pert.dg[j] + pert.dg_y[j].transpose() * s.d);
    for (int a = 0; a < ny; ++a) {
      const int col = a < dm.n_x             ? lq.x_col(j + 1, a)
                      : a < dm.n_x + dm.n_u ? lq.u_col(j, a - dm.n_x)
                                            : lq.p_col(a - dm.n_x - dm.n_u);
      rhs[col] -= cy[a];
    }
    const double half_h = 0.5 * lq.grid().interval_length(lq.grid().interval_of_node(j));
    rhs.segment(lq.defect_row(j, 0), dm.n_x) = half_h * s.f_g * pert.dg[j];
  }
  const Vector sol = lq.solve(rhs);
  SensitivitySolution out = unpack_lq_solution(lq, sol);
  const double scale = std::max(rhs.norm(), 1e-300);
  out.residual = rhs.norm() > 0.0 ? (lq.kkt() * sol - rhs).norm() / scale : 0.0;
  return out;
}

QoiGradients qoi_gradients(const LqData& lq, const QoiFunctions& qoi) {
  const Dims& dm = lq.dims();
  const int n = lq.num_nodes();
  QoiGradients q;
  q.phi_x = Vector::Zero(dm.n_x);
  q.phi_p = Vector::Zero(dm.n_p);
  if (qoi.terminal) {
    const Vector gr = qoi.terminal->gradient(lq.base().x.col(n), lq.base().p);
    q.phi_x = gr.head(dm.n_x);
    q.phi_p = gr.tail(dm.n_p);
  }
  for (const LqSample& s : lq.samples()) {
    if (qoi.running) {
      const Vector gr = qoi.running->gradient(s.t, s.y, s.g);
      q.l_g.push_back(gr.tail(dm.n_g));
      q.l_y.push_back(chain_gradient(gr, s.g_y));
    } else {
      q.l_g.push_back(Vector::Zero(dm.n_g));
      q.l_y.push_back(Vector::Zero(dm.n_y()));
    }
  }
  return q;
}

double forward_qoi_derivative(const LqData& lq, const SensitivitySolution& dz,
                              const PerturbationData& pert, const QoiFunctions& qoi) {
  check_perturbation(lq, pert);
  const QoiGradients q = qoi_gradients(lq, qoi);
  const int n = lq.num_nodes();
  double total = q.phi_x.dot(dz.dx.col(n)) + q.phi_p.dot(dz.dp);
  for (int j = 0; j < n; ++j) {
    const Vector dy = pack_y(dz.dx.col(j + 1), dz.du.col(j), dz.dp);
    total += lq.samples()[j].weight * (q.l_y[j].dot(dy) + q.l_g[j].dot(pert.dg[j]));
  }
  return total;
}

Vector stack(const SensitivitySolution& s) {
  const Eigen::Index nx = s.dx.size() - s.dx.rows();
  Vector v(nx + s.du.size() + s.dp.size());
  v.head(nx) = s.dx.rightCols(s.dx.cols() - 1).reshaped();
  v.segment(nx, s.du.size()) = s.du.reshaped();
  v.tail(s.dp.size()) = s.dp;
  return v;
}

}  // namespace ocpsens
