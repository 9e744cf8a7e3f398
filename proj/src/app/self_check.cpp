#include "ocpsens/app/self_check.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "ocpsens/app/experiments.hpp"
#include "ocpsens/collocation/grid.hpp"
#include "ocpsens/collocation/lgr.hpp"
#include "ocpsens/collocation/transcription.hpp"
#include "ocpsens/core/derivative_check.hpp"
#include "ocpsens/hypersonic/vehicle.hpp"

namespace ocpsens::app {

namespace hs = hypersonic;

std::vector<QuadratureRow> quadrature_exactness(int n_min, int n_max) {
  std::vector<QuadratureRow> rows;
  for (int n = n_min; n <= n_max; ++n) {
    const RadauRule r = lgr_nodes(n);
    double worst = 0.0;
    for (int k = 0; k <= 2 * n - 2; ++k) {
      double q = 0.0;
      for (int i = 0; i < n; ++i) q += r.weights[i] * std::pow(r.nodes[i], k);
      const double exact = (k % 2 == 0) ? 2.0 / (k + 1) : 0.0;
      worst = std::max(worst, std::abs(q - exact));
    }
    rows.push_back({n, worst});
  }
  return rows;
}

std::vector<QuadratureRow> differentiation_exactness(int n_min, int n_max) {
  std::vector<QuadratureRow> rows;
  for (int n = n_min; n <= n_max; ++n) {
    const RadauRule r = lgr_nodes(n);
    Vector s(n + 1);
    s << -1.0, r.nodes;
    const Matrix d = differentiation_matrix(s);
    double worst = 0.0;
    for (int k = 0; k <= n - 1; ++k) {
      Vector v(n + 1), dv(n + 1);
      for (int i = 0; i <= n; ++i) {
        v[i] = std::pow(s[i], k);
        dv[i] = k == 0 ? 0.0 : k * std::pow(s[i], k - 1);
      }
      worst = std::max(worst, (d * v - dv).cwiseAbs().maxCoeff());
    }
    rows.push_back({n, worst});
  }
  return rows;
}

double exponential_error(int intervals, int nodes, const SolverConfig& solver) {
  OcpProblem p;
  p.dims = {1, 0, 0, 1};
  p.x0 = Vector::Ones(1);
  p.g.n_g = 1;
  p.g.value = [](double, const Vector& y) { return Vector::Constant(1, y[0]); };
  p.g.jacobian = [](double, const Vector&) { return Matrix::Ones(1, 1); };
  p.g.hessians = [](double, const Vector&) { return std::vector<Matrix>{Matrix::Zero(1, 1)}; };
  p.funcs.dynamics.value = [](double, const Vector&, const Vector& g) { return g; };
  p.funcs.dynamics.jacobian = [](double, const Vector&, const Vector&) {
    return Matrix((Matrix(1, 2) << 0.0, 1.0).finished());
  };
  p.funcs.dynamics.weighted_hessian = [](double, const Vector&, const Vector&, const Vector&) {
    return Matrix(Matrix::Zero(2, 2));
  };
  p.bounds = Bounds::unbounded(p.dims);

  const CollocationGrid grid = CollocationGrid::uniform(intervals, nodes, 0.0, 1.0);
  const Transcription tr(p, grid);
  DiscreteTrajectory guess;
  guess.x = Matrix::Ones(1, grid.num_state_points());
  guess.u.resize(0, grid.num_nodes());
  guess.p.resize(0);
  const NlpSolution sol = solve(tr.nlp(), tr.pack(guess), solver);
  if (!sol.converged()) return std::numeric_limits<double>::infinity();
  return std::abs(tr.unpack(sol.x).x(0, grid.num_nodes()) - std::exp(1.0));
}

namespace {

// y = (x, delta, T) and g = aero at (alpha, delta) for a mid-flight state.
Vector vehicle_point() {
  Vector z(hs::kNx + hs::kNu + hs::kNp + hs::kNg);
  const hs::AeroCoefficients c = hs::aero_coeffs(hs::AeroModel::surrogate(), 9.0 * hs::kDeg, 0.02);
  z << 120000.0, 61000.0, 4200.0, -3.0 * hs::kDeg, 9.0 * hs::kDeg, 0.02, 0.02, 2100.0, c.value;
  return z;
}

CheckLine dynamics_jacobian_check(bool inject) {
  const DynamicsFunction f = hs::vehicle_dynamics(hs::VehicleParams{});
  const int ny = hs::kNx + hs::kNu + hs::kNp;
  const Vector z = vehicle_point();
  auto val = [&](const Vector& v) { return f.value(0.0, v.head(ny), v.tail(hs::kNg)); };
  auto jac = [&](const Vector& v) {
    Matrix j = f.jacobian(0.0, v.head(ny), v.tail(hs::kNg));
    if (inject) j(2, 3) += 0.5;
    return j;
  };
  const Matrix j = jac(z);
  const JacobianComparison cmp =
      compare_jacobian_fd(val, jac, z, 1e-6, std::numeric_limits<double>::infinity());
  // Relative to max(1, |J_ij|): the entries span many decades.
  const Matrix rel =
      (cmp.finite_difference - j).cwiseAbs().cwiseQuotient(j.cwiseAbs().cwiseMax(1.0));
  Eigen::Index r = 0, c = 0;
  const double worst = rel.maxCoeff(&r, &c);
  const char* cols[] = {"x1", "x2", "v", "gamma", "alpha", "q", "delta", "T", "C_L", "C_D", "C_M"};
  const char* rows[] = {"x1'", "x2'", "v'", "gamma'", "alpha'", "q'"};
  CheckLine line{"vehicle dynamics Jacobian vs central differences", worst < 1e-5, ""};
  line.detail = fmt::format("max rel dev {:.2e} at d{}/d{} (tol 1e-5)", worst, rows[r], cols[c]);
  return line;
}

CheckLine aero_jacobian_check() {
  const hs::AeroModel m = hs::AeroModel::truth_model(0.05);
  const Vector ad = (Vector(2) << 0.13, -0.04).finished();
  auto val = [&](const Vector& v) { return hs::aero_coeffs(m, v[0], v[1]).value; };
  auto jac = [&](const Vector& v) { return hs::aero_coeffs(m, v[0], v[1]).jacobian; };
  const JacobianComparison cmp = compare_jacobian_fd(val, jac, ad, 1e-6, 1e-8);
  return {"aero coefficient Jacobian vs central differences", cmp.flagged.empty(),
          fmt::format("max abs dev {:.2e} (tol 1e-8)", cmp.max_abs_deviation)};
}

CheckLine duality_check(const RunConfig& cfg) {
  const hs::VehicleSolve ref = hs::solve_max_downrange(
      hs::VehicleParams{}, hs::AeroModel::surrogate(), cfg.grid(), cfg.units, cfg.solver);
  if (!ref.solution.converged()) {
    return {"forward/adjoint duality on the tracking problem", false, "reference solve failed"};
  }
  const StudyBase st = prepare_study(cfg, hs::as_reference(ref));
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const PerturbationData p = random_perturbation(st.lq, cfg.seed + k);
    const double fwd = forward_qoi_derivative(st.lq, solve_sensitivity(st.lq, p), p, st.qoi);
    const double adj = qoi_directional_derivative(st.lq, st.adjoint, p, st.qoi);
    worst = std::max(worst, std::abs(fwd - adj) / std::max({std::abs(fwd), std::abs(adj), 1e-300}));
  }
  return {"forward/adjoint duality on the tracking problem", worst < 1e-6,
          fmt::format("10 seeded directions, max rel diff {:.2e} (tol 1e-6)", worst)};
}

template <typename F>
CheckLine guarded(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {name, false, std::string("threw: ") + e.what()};
  }
}

}  // namespace

std::vector<CheckLine> run_checks(const RunConfig& cfg, const CheckOptions& opt) {
  std::vector<CheckLine> out;
  for (const QuadratureRow& r : quadrature_exactness()) {
    out.push_back({fmt::format("LGR quadrature n={} exact to degree {}", r.n, 2 * r.n - 2),
                   r.max_error < 1e-12, fmt::format("max abs err {:.2e}", r.max_error)});
  }
  for (const QuadratureRow& r : differentiation_exactness()) {
    out.push_back({fmt::format("differentiation n={} exact to degree {}", r.n, r.n - 1),
                   r.max_error < 1e-12, fmt::format("max abs err {:.2e}", r.max_error)});
  }
  out.push_back(guarded("x' = x on 4x5 reproduces e", [&] {
    const double e = exponential_error(4, 5, cfg.solver);
    return CheckLine{"x' = x on 4x5 reproduces e", e < 1e-8, fmt::format("|x(1) - e| = {:.2e}", e)};
  }));
  out.push_back(guarded("vehicle dynamics Jacobian vs central differences",
                        [&] { return dynamics_jacobian_check(opt.inject_jacobian_defect); }));
  out.push_back(guarded("aero coefficient Jacobian vs central differences", aero_jacobian_check));
  if (opt.with_solves) {
    out.push_back(guarded("forward/adjoint duality on the tracking problem",
                          [&] { return duality_check(cfg); }));
  }
  return out;
}

}  // namespace ocpsens::app
