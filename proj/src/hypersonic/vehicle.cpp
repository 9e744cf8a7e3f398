#include "ocpsens/hypersonic/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ocpsens/core/errors.hpp"

namespace ocpsens::hypersonic {

namespace {

// Indices in the (x, u, p, g) argument of f.
constexpr int kH = 1, kV = 2, kGam = 3, kAlpha = 4, kQ = 5, kDelta = 6, kT = 7;
constexpr int kCl = 8, kCd = 9, kCm = 10;
constexpr int kNyg = kNx + kNu + kNp + kNg;
constexpr int kNy = kNx + kNu + kNp;

constexpr double kDownrangeKm = 1e-3;

}  // namespace

void VehicleParams::validate() const {
  if (!(mass > 0 && inertia > 0 && area > 0 && length > 0 && mu > 0 &&
        earth_radius > 0 && rho0 > 0 && scale_height_inv > 0)) {
    throw std::invalid_argument("vehicle parameters must be positive");
  }
}

AeroModel AeroModel::surrogate() {
  AeroModel m;
  m.poly[0] = {-0.04, 0.8, 0.13, 0.0, 0.0, 0.0};
  m.poly[1] = {0.012, -0.01, -0.02, 0.6, 0.12, 0.0};
  m.poly[2] = {0.1745, -1.0, -1.0, 0.0, 0.0, 0.0};
  return m;
}

AeroModel AeroModel::truth_model(double epsilon) {
  AeroModel m = surrogate();
  m.factor = {1.0 + epsilon, 1.0 - epsilon, 1.0 + epsilon};
  m.epsilon = epsilon;
  m.truth = true;
  return m;
}

AeroCoefficients aero_coeffs(const AeroModel& model, double alpha, double delta) {
  AeroCoefficients c;
  c.value.resize(3);
  c.jacobian.resize(3, 2);
  c.hessians.assign(3, Matrix::Zero(2, 2));
  for (int i = 0; i < 3; ++i) {
    const Quadratic2& p = model.poly[i];
    const double s = model.factor[i];
    c.value[i] = s * p(alpha, delta);
    c.jacobian(i, 0) = s * (p.ca + 2.0 * p.caa * alpha + p.cad * delta);
    c.jacobian(i, 1) = s * (p.cd + 2.0 * p.cdd * delta + p.cad * alpha);
    c.hessians[i] << 2.0 * s * p.caa, s * p.cad, s * p.cad, 2.0 * s * p.cdd;
  }
  return c;
}

double density(const VehicleParams& vp, double altitude) {
  return vp.rho0 * std::exp(-vp.scale_height_inv * altitude);
}

double gravity(const VehicleParams& vp, double altitude) {
  const double r = vp.earth_radius + altitude;
  return vp.mu / (r * r);
}

namespace {

// Everything f needs at one point, with derivatives of rho and gravity in x2.
struct Terms {
  double h, v, gam, q, cl, cd, cm;
  double rho, rho_h, rho_hh;
  double G, G_h, G_hh;
  double r;
  double a3, a6;  // A / (2m), A L / (2 I)
  double sg, cg;
};

Terms terms(const VehicleParams& vp, const Vector& y, const Vector& g) {
  Terms t;
  t.h = y[kH];
  t.v = y[kV];
  t.gam = y[kGam];
  t.q = y[kQ];
  t.cl = g[0];
  t.cd = g[1];
  t.cm = g[2];
  if (!(t.v > 0.0)) throw ModelEvaluationError("speed must be positive", 0.0, y);
  const double k = vp.scale_height_inv;
  t.rho = density(vp, t.h);
  t.rho_h = -k * t.rho;
  t.rho_hh = k * k * t.rho;
  t.r = vp.earth_radius + t.h;
  t.G = vp.mu / (t.r * t.r);
  t.G_h = -2.0 * vp.mu / (t.r * t.r * t.r);
  t.G_hh = 6.0 * vp.mu / (t.r * t.r * t.r * t.r);
  t.a3 = vp.area / (2.0 * vp.mass);
  t.a6 = vp.area * vp.length / (2.0 * vp.inertia);
  t.sg = std::sin(t.gam);
  t.cg = std::cos(t.gam);
  return t;
}

Vector rhs(const Terms& t) {
  Vector f(kNx);
  f[0] = t.v * t.cg;
  f[1] = t.v * t.sg;
  f[2] = -t.a3 * t.rho * t.v * t.v * t.cd - t.G * t.sg;
  f[3] = t.a3 * t.rho * t.v * t.cl - t.G * t.cg / t.v + t.v * t.cg / t.r;
  f[4] = t.q - f[3];
  f[5] = t.a6 * t.rho * t.v * t.v * t.cm;
  return f;
}

void add_sym(Matrix& h, int i, int j, double v) {
  h(i, j) += v;
  if (i != j) h(j, i) += v;
}

}  // namespace

Vector hypersonic_dynamics(const VehicleParams& vp, const AeroModel& model,
                           const Vector& state, double delta) {
  if (state.size() != kNx) throw DimensionError("state must have 6 entries");
  Vector y = Vector::Zero(kNy);
  y.head(kNx) = state;
  y[kDelta] = delta;
  const AeroCoefficients c = aero_coeffs(model, state[kAlpha], delta);
  const Vector f = rhs(terms(vp, y, c.value));
  if (!f.allFinite()) throw ModelEvaluationError("non-finite vehicle dynamics", 0.0, y);
  return f;
}

ComponentFunction aero_component(const AeroModel& model) {
  ComponentFunction g;
  g.n_g = kNg;
  g.value = [model](double, const Vector& y) {
    return aero_coeffs(model, y[kAlpha], y[kDelta]).value;
  };
  g.jacobian = [model](double, const Vector& y) {
    const AeroCoefficients c = aero_coeffs(model, y[kAlpha], y[kDelta]);
    Matrix j = Matrix::Zero(kNg, y.size());
    j.col(kAlpha) = c.jacobian.col(0);
    j.col(kDelta) = c.jacobian.col(1);
    return j;
  };
  g.hessians = [model](double, const Vector& y) {
    const AeroCoefficients c = aero_coeffs(model, y[kAlpha], y[kDelta]);
    std::vector<Matrix> hs(kNg, Matrix::Zero(y.size(), y.size()));
    for (int i = 0; i < kNg; ++i) {
      hs[i](kAlpha, kAlpha) = c.hessians[i](0, 0);
      hs[i](kAlpha, kDelta) = hs[i](kDelta, kAlpha) = c.hessians[i](0, 1);
      hs[i](kDelta, kDelta) = c.hessians[i](1, 1);
    }
    return hs;
  };
  return g;
}

DynamicsFunction vehicle_dynamics(const VehicleParams& vp) {
  vp.validate();
  DynamicsFunction f;
  f.value = [vp](double, const Vector& y, const Vector& g) { return rhs(terms(vp, y, g)); };

  f.jacobian = [vp](double, const Vector& y, const Vector& g) {
    const Terms t = terms(vp, y, g);
    Matrix j = Matrix::Zero(kNx, kNyg);
    const double v = t.v, r = t.r;
    j(0, kV) = t.cg;
    j(0, kGam) = -v * t.sg;
    j(1, kV) = t.sg;
    j(1, kGam) = v * t.cg;

    j(2, kH) = -t.a3 * t.rho_h * v * v * t.cd - t.G_h * t.sg;
    j(2, kV) = -2.0 * t.a3 * t.rho * v * t.cd;
    j(2, kGam) = -t.G * t.cg;
    j(2, kCd) = -t.a3 * t.rho * v * v;

    j(3, kH) = t.a3 * t.rho_h * v * t.cl - t.G_h * t.cg / v - v * t.cg / (r * r);
    j(3, kV) = t.a3 * t.rho * t.cl + t.G * t.cg / (v * v) + t.cg / r;
    j(3, kGam) = t.G * t.sg / v - v * t.sg / r;
    j(3, kCl) = t.a3 * t.rho * v;

    j.row(4) = -j.row(3);
    j(4, kQ) = 1.0;

    j(5, kH) = t.a6 * t.rho_h * v * v * t.cm;
    j(5, kV) = 2.0 * t.a6 * t.rho * v * t.cm;
    j(5, kCm) = t.a6 * t.rho * v * v;
    return j;
  };

  f.weighted_hessian = [vp](double, const Vector& y, const Vector& g, const Vector& w) {
    const Terms t = terms(vp, y, g);
    Matrix h = Matrix::Zero(kNyg, kNyg);
    const double v = t.v, r = t.r;

    // x1' and x2'
    add_sym(h, kV, kGam, -w[0] * t.sg + w[1] * t.cg);
    add_sym(h, kGam, kGam, -w[0] * v * t.cg - w[1] * v * t.sg);

    // v'
    const double w2 = w[2];
    add_sym(h, kH, kH, w2 * (-t.a3 * t.rho_hh * v * v * t.cd - t.G_hh * t.sg));
    add_sym(h, kH, kV, w2 * (-2.0 * t.a3 * t.rho_h * v * t.cd));
    add_sym(h, kH, kGam, w2 * (-t.G_h * t.cg));
    add_sym(h, kH, kCd, w2 * (-t.a3 * t.rho_h * v * v));
    add_sym(h, kV, kV, w2 * (-2.0 * t.a3 * t.rho * t.cd));
    add_sym(h, kV, kCd, w2 * (-2.0 * t.a3 * t.rho * v));
    add_sym(h, kGam, kGam, w2 * (t.G * t.sg));

    // gamma' enters alpha' with the opposite sign.
    const double w3 = w[3] - w[4];
    add_sym(h, kH, kH,
            w3 * (t.a3 * t.rho_hh * v * t.cl - t.G_hh * t.cg / v + 2.0 * v * t.cg / (r * r * r)));
    add_sym(h, kH, kV, w3 * (t.a3 * t.rho_h * t.cl + t.G_h * t.cg / (v * v) - t.cg / (r * r)));
    add_sym(h, kH, kGam, w3 * (t.G_h * t.sg / v + v * t.sg / (r * r)));
    add_sym(h, kH, kCl, w3 * (t.a3 * t.rho_h * v));
    add_sym(h, kV, kV, w3 * (-2.0 * t.G * t.cg / (v * v * v)));
    add_sym(h, kV, kGam, w3 * (-t.G * t.sg / (v * v) - t.sg / r));
    add_sym(h, kV, kCl, w3 * (t.a3 * t.rho));
    add_sym(h, kGam, kGam, w3 * (t.G * t.cg / v - v * t.cg / r));

    // q'
    const double w5 = w[5];
    add_sym(h, kH, kH, w5 * (t.a6 * t.rho_hh * v * v * t.cm));
    add_sym(h, kH, kV, w5 * (2.0 * t.a6 * t.rho_h * v * t.cm));
    add_sym(h, kH, kCm, w5 * (t.a6 * t.rho_h * v * v));
    add_sym(h, kV, kV, w5 * (2.0 * t.a6 * t.rho * t.cm));
    add_sym(h, kV, kCm, w5 * (2.0 * t.a6 * t.rho * v));
    return h;
  };
  return f;
}

Vector initial_state() {
  Vector x0(kNx);
  x0 << 0.0, 80000.0, 5000.0, -5.0 * kDeg, 11.0 * kDeg, 0.0;
  return x0;
}

namespace {

Dims vehicle_dims() { return Dims{kNx, kNu, kNp, kNg}; }

}  // namespace

OcpProblem build_max_downrange(const VehicleParams& vp, const AeroModel& model) {
  OcpProblem p;
  p.dims = vehicle_dims();
  p.t0 = 0.0;
  p.tf = 1.0;
  p.x0 = initial_state();
  p.g = aero_component(model);
  ProblemFunctions physical;
  physical.dynamics = vehicle_dynamics(vp);
  TerminalCostFunction phi;
  phi.value = [](const Vector& x, const Vector&) { return -kDownrangeKm * x[0]; };
  phi.gradient = [](const Vector&, const Vector&) {
    Vector g = Vector::Zero(kNx + kNp);
    g[0] = -kDownrangeKm;
    return g;
  };
  phi.hessian = [](const Vector&, const Vector&) {
    return Matrix::Zero(kNx + kNp, kNx + kNp);
  };
  physical.terminal_cost = phi;
  p.funcs = normalize_time(physical, p.dims, 0, true);
  p.duration_index = 0;

  constexpr double inf = std::numeric_limits<double>::infinity();
  Bounds& b = p.bounds;
  b.x_lower.resize(kNx);
  b.x_upper.resize(kNx);
  b.x_lower << -inf, 0.0, 1.0, -30.0 * kDeg, 0.0, -inf;
  b.x_upper << inf, 81000.0, 6000.0, 30.0 * kDeg, 20.0 * kDeg, inf;
  b.u_lower = Vector::Constant(1, -20.0 * kDeg);
  b.u_upper = Vector::Constant(1, 20.0 * kDeg);
  b.p_lower = Vector::Constant(1, 1000.0);
  b.p_upper = Vector::Constant(1, 3000.0);
  return p;
}

DiscreteTrajectory max_downrange_guess(const VehicleParams& vp, const AeroModel& model,
                                       const CollocationGrid& grid) {
  const double T = 2000.0;
  const double delta = 0.0;
  // RK4 in physical time; the step resolves the fastest pitch mode met on
  // an uncontrolled glide.
  const double dt = 5e-3;
  DiscreteTrajectory g;
  g.x.resize(kNx, grid.num_state_points());
  g.u = Matrix::Zero(kNu, grid.num_nodes());
  g.p = Vector::Constant(kNp, T);
  auto f = [&](const Vector& s) { return hypersonic_dynamics(vp, model, s, delta); };
  Vector x = initial_state();
  double t = 0.0;
  for (int i = 0; i < grid.num_state_points(); ++i) {
    const double target = T * grid.state_times()[i];
    while (t < target) {
      const double h = std::min(dt, target - t);
      const Vector k1 = f(x);
      const Vector k2 = f(x + 0.5 * h * k1);
      const Vector k3 = f(x + 0.5 * h * k2);
      const Vector k4 = f(x + h * k3);
      x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t += h;
    }
    g.x.col(i) = x;
  }
  return g;
}

Vector TrackingWeights::q_si() const {
  Vector q = q_km;
  // Lengths x1, x2 and the speed v are compared in km and km/s.
  q[0] *= 1e-6;
  q[1] *= 1e-6;
  q[2] *= 1e-6;
  return q;
}

OcpProblem build_tracking(const VehicleParams& vp, const AeroModel& model,
                          const Reference& ref, const TrackingWeights& w) {
  const CollocationGrid& rg = ref.grid;
  if (rg.t0() != 0.0 || rg.tf() != 1.0) {
    throw std::invalid_argument("reference must live on normalized time [0, 1]");
  }
  if (ref.traj.x.rows() != kNx || ref.traj.x.cols() != rg.num_state_points() ||
      ref.traj.u.rows() != kNu || ref.traj.u.cols() != rg.num_nodes() ||
      ref.traj.p.size() != kNp) {
    throw DimensionError("reference trajectory is incompatible with its grid");
  }
  OcpProblem p;
  p.dims = vehicle_dims();
  p.t0 = 0.0;
  p.tf = 1.0;
  p.x0 = initial_state();
  p.g = aero_component(model);
  ProblemFunctions physical;
  physical.dynamics = vehicle_dynamics(vp);

  const Vector q = w.q_si();
  const double r_u = w.r_u;
  const double r_p = w.r_p;
  const Matrix xr = ref.traj.x;
  const Matrix ur = ref.traj.u;
  const Vector pr = ref.traj.p;
  const CollocationGrid grid = rg;

  RunningCostFunction l;
  l.value = [=](double t, const Vector& y, const Vector&) {
    const Vector dx = y.head(kNx) - interpolate_states(grid, xr, t);
    const double du = y[kDelta] - interpolate_controls(grid, ur, t)[0];
    return dx.dot(q.cwiseProduct(dx)) + r_u * du * du;
  };
  l.gradient = [=](double t, const Vector& y, const Vector&) {
    Vector gr = Vector::Zero(kNyg);
    gr.head(kNx) = 2.0 * q.cwiseProduct(y.head(kNx) - interpolate_states(grid, xr, t));
    gr[kDelta] = 2.0 * r_u * (y[kDelta] - interpolate_controls(grid, ur, t)[0]);
    return gr;
  };
  l.hessian = [=](double, const Vector&, const Vector&) {
    Matrix h = Matrix::Zero(kNyg, kNyg);
    h.topLeftCorner(kNx, kNx).diagonal() = 2.0 * q;
    h(kDelta, kDelta) = 2.0 * r_u;
    return h;
  };
  physical.running_cost = l;

  TerminalCostFunction phi;
  phi.value = [=](const Vector&, const Vector& pp) {
    return r_p * (pp - pr).squaredNorm();
  };
  phi.gradient = [=](const Vector&, const Vector& pp) {
    Vector g = Vector::Zero(kNx + kNp);
    g.tail(kNp) = 2.0 * r_p * (pp - pr);
    return g;
  };
  phi.hessian = [=](const Vector&, const Vector&) {
    Matrix h = Matrix::Zero(kNx + kNp, kNx + kNp);
    h.bottomRightCorner(kNp, kNp).diagonal().setConstant(2.0 * r_p);
    return h;
  };
  physical.terminal_cost = phi;

  // The integral is over tau, so only the dynamics pick up the factor T.
  p.funcs = normalize_time(physical, p.dims, 0, false);
  p.duration_index = 0;
  p.bounds = Bounds::unbounded(p.dims);
  return p;
}

QoiFunctions downrange_qoi() {
  QoiFunctions q;
  TerminalCostFunction phi;
  phi.value = [](const Vector& x, const Vector&) { return kDownrangeKm * x[0]; };
  phi.gradient = [](const Vector&, const Vector&) {
    Vector g = Vector::Zero(kNx + kNp);
    g[0] = kDownrangeKm;
    return g;
  };
  phi.hessian = [](const Vector&, const Vector&) {
    return Matrix::Zero(kNx + kNp, kNx + kNp);
  };
  q.terminal = phi;
  return q;
}

UnitScheme parse_unit_scheme(const std::string& name) {
  if (name == "si") return UnitScheme::si;
  if (name == "kgkms") return UnitScheme::kgkms;
  throw std::invalid_argument("unknown unit scheme '" + name + "' (expected si or kgkms)");
}

std::string to_string(UnitScheme s) { return s == UnitScheme::si ? "si" : "kgkms"; }

VariableScaling unit_scaling_factors(UnitScheme scheme) {
  VariableScaling s = VariableScaling::identity(vehicle_dims());
  if (scheme == UnitScheme::kgkms) {
    s.x[0] = 1000.0;
    s.x[1] = 1000.0;
    s.x[2] = 1000.0;
  }
  return s;
}

ScaledProblem unit_scaling(const OcpProblem& physical, UnitScheme scheme) {
  ScaledProblem out;
  out.scaling = unit_scaling_factors(scheme);
  out.problem = scheme == UnitScheme::si ? physical : scale_problem(physical, out.scaling);
  return out;
}

DiscreteTrajectory ScaledProblem::to_physical(const DiscreteTrajectory& s) const {
  DiscreteTrajectory p = s;
  p.x = scaling.x.asDiagonal() * s.x;
  p.u = scaling.u.asDiagonal() * s.u;
  p.p = scaling.p.cwiseProduct(s.p);
  if (s.lambda.size() > 0) p.lambda = scaling.x.cwiseInverse().asDiagonal() * s.lambda;
  return p;
}

DiscreteTrajectory ScaledProblem::to_scaled(const DiscreteTrajectory& phys) const {
  DiscreteTrajectory s = phys;
  s.x = scaling.x.cwiseInverse().asDiagonal() * phys.x;
  s.u = scaling.u.cwiseInverse().asDiagonal() * phys.u;
  s.p = phys.p.cwiseQuotient(scaling.p);
  if (phys.lambda.size() > 0) s.lambda = scaling.x.asDiagonal() * phys.lambda;
  return s;
}

CollocationGrid default_grid() { return CollocationGrid::uniform(16, 4, 0.0, 1.0); }

namespace {

VehicleSolve finish_solve(ScaledProblem sp, KktSolution sol) {
  DiscreteTrajectory phys = sp.to_physical(sol.traj);
  return VehicleSolve{std::move(sp), std::move(sol), std::move(phys)};
}

bool same_grid(const CollocationGrid& a, const CollocationGrid& b) {
  return a.num_intervals() == b.num_intervals() && a.nodes_per_interval() == b.nodes_per_interval() &&
         a.state_times() == b.state_times();
}

}  // namespace

VehicleSolve solve_max_downrange(const VehicleParams& vp, const AeroModel& model,
                                 const CollocationGrid& grid, UnitScheme units,
                                 const SolverConfig& config) {
  ScaledProblem sp = unit_scaling(build_max_downrange(vp, model), units);
  KktSolution sol =
      solve_ocp(sp.problem, grid, sp.to_scaled(max_downrange_guess(vp, model, grid)), config);
  const CollocationGrid coarse = default_grid();
  if (sol.converged() || same_grid(grid, coarse)) return finish_solve(std::move(sp), std::move(sol));

  const KktSolution start =
      solve_ocp(sp.problem, coarse, sp.to_scaled(max_downrange_guess(vp, model, coarse)), config);
  if (!start.converged()) return finish_solve(std::move(sp), std::move(sol));
  // Near the optimum: a small barrier keeps the active bounds where they are.
  SolverConfig warm = config;
  warm.mu_initial = std::min(warm.mu_initial, 1e-6);
  warm.bound_push = std::min(warm.bound_push, 1e-6);
  KktSolution cont = solve_ocp(sp.problem, grid, resample(coarse, start.traj, grid), warm);
  if (cont.converged() || cont.nlp.kkt_residual < sol.nlp.kkt_residual) sol = std::move(cont);
  return finish_solve(std::move(sp), std::move(sol));
}

VehicleSolve solve_tracking(const VehicleParams& vp, const AeroModel& model,
                            const Reference& reference, UnitScheme units,
                            const SolverConfig& config) {
  ScaledProblem sp = unit_scaling(build_tracking(vp, model, reference), units);
  KktSolution sol = solve_ocp(sp.problem, reference.grid, sp.to_scaled(reference.traj), config);
  return finish_solve(std::move(sp), std::move(sol));
}

Reference as_reference(const VehicleSolve& s) {
  Reference r{s.solution.grid, s.physical};
  r.traj.lambda.resize(0, 0);
  return r;
}

}  // namespace ocpsens::hypersonic
