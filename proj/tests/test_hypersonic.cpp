#include <cmath>
#include <limits>

#include "doctest.h"
#include "ocpsens/core/derivative_check.hpp"
#include "ocpsens/core/errors.hpp"
#include "ocpsens/hypersonic/vehicle.hpp"

using namespace ocpsens;
using namespace ocpsens::hypersonic;

namespace {

// (x, delta, T, C_L, C_D, C_M) near the initial condition.
Vector sample_point() {
  Vector z(kNx + kNu + kNp + kNg);
  z << 120000.0, 61000.0, 4200.0, -3.0 * kDeg, 9.0 * kDeg, 0.02, 2.0 * kDeg, 2100.0, 0.09,
      0.03, -0.01;
  return z;
}

}  // namespace

TEST_CASE("aero surrogate at the tabulated points") {
  const AeroModel m = AeroModel::surrogate();
  const AeroCoefficients a = aero_coeffs(m, 0.0, 0.0);
  CHECK(a.value[0] == doctest::Approx(-0.04).epsilon(1e-14));
  CHECK(a.value[1] == doctest::Approx(0.012).epsilon(1e-14));
  CHECK(a.value[2] == doctest::Approx(0.1745).epsilon(1e-14));
  const AeroCoefficients b = aero_coeffs(m, 0.1745, 0.0);
  CHECK(b.value[0] == doctest::Approx(0.0996).epsilon(1e-12));
  CHECK(std::abs(b.value[1] - 0.028525) < 1e-5);
  CHECK(std::abs(b.value[2]) < 1e-15);
}

TEST_CASE("truth model at eps 0 is the surrogate") {
  const AeroModel s = AeroModel::surrogate();
  const AeroModel t = AeroModel::truth_model(0.0);
  for (double a : {-0.1, 0.0, 0.2}) {
    for (double d : {-0.3, 0.0, 0.1}) {
      const AeroCoefficients cs = aero_coeffs(s, a, d);
      const AeroCoefficients ct = aero_coeffs(t, a, d);
      CHECK((cs.value - ct.value).norm() == 0.0);
      CHECK((cs.jacobian - ct.jacobian).norm() == 0.0);
    }
  }
  const AeroCoefficients c = aero_coeffs(AeroModel::truth_model(0.1), 0.1, 0.05);
  const AeroCoefficients c0 = aero_coeffs(s, 0.1, 0.05);
  CHECK(c.value[0] == doctest::Approx(1.1 * c0.value[0]));
  CHECK(c.value[1] == doctest::Approx(0.9 * c0.value[1]));
  CHECK(c.value[2] == doctest::Approx(1.1 * c0.value[2]));
}

TEST_CASE("aero derivatives match differences") {
  const AeroModel m = AeroModel::truth_model(0.07);
  const Vector ad = (Vector(2) << 0.13, -0.04).finished();
  auto val = [&](const Vector& v) { return aero_coeffs(m, v[0], v[1]).value; };
  auto jac = [&](const Vector& v) { return aero_coeffs(m, v[0], v[1]).jacobian; };
  CHECK(compare_jacobian_fd(val, jac, ad, 1e-6, 1e-8).flagged.empty());
  const AeroCoefficients c = aero_coeffs(m, ad[0], ad[1]);
  for (int i = 0; i < 3; ++i) {
    auto grad = [&](const Vector& v) {
      return Vector(aero_coeffs(m, v[0], v[1]).jacobian.row(i).transpose());
    };
    auto hess = [&](const Vector&) { return c.hessians[i]; };
    CHECK(compare_jacobian_fd(grad, hess, ad, 1e-5, 1e-8).flagged.empty());
  }
}

TEST_CASE("atmosphere and gravity") {
  const VehicleParams vp;
  CHECK(density(vp, 0.0) == 1.225);
  CHECK(density(vp, 10000.0) == doctest::Approx(1.225 * std::exp(-1.4)));
  CHECK(gravity(vp, 0.0) == doctest::Approx(3.986e14 / (6.371e6 * 6.371e6)));
  VehicleParams bad;
  bad.mass = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("dynamics at the initial condition") {
  const VehicleParams vp;
  const Vector x0 = initial_state();
  CHECK(x0[1] == 80000.0);
  CHECK(x0[2] == 5000.0);
  const Vector f = hypersonic_dynamics(vp, AeroModel::surrogate(), x0, 0.0);
  const double v = 5000.0, gam = -5.0 * kDeg, alpha = 11.0 * kDeg;
  const double rho = 1.225 * std::exp(-1.4e-4 * 80000.0);
  const double r = 6.371e6 + 80000.0;
  const double grav = 3.986e14 / (r * r);
  const double cl = -0.04 + 0.8 * alpha;
  const double cd = 0.012 - 0.01 * alpha + 0.6 * alpha * alpha;
  const double cm = 0.1745 - alpha;
  const double gam_dot = 4.4 / 2000.0 * rho * v * cl - grav * std::cos(gam) / v + v * std::cos(gam) / r;
  CHECK(f[0] == doctest::Approx(v * std::cos(gam)).epsilon(1e-14));
  CHECK(f[1] == doctest::Approx(v * std::sin(gam)).epsilon(1e-14));
  CHECK(f[2] == doctest::Approx(-4.4 / 2000.0 * rho * v * v * cd - grav * std::sin(gam)).epsilon(1e-13));
  CHECK(f[3] == doctest::Approx(gam_dot).epsilon(1e-13));
  CHECK(f[4] == doctest::Approx(-gam_dot).epsilon(1e-13));
  CHECK(f[5] == doctest::Approx(4.4 * 3.6 / (2.0 * 247.0) * rho * v * v * cm).epsilon(1e-13));

  Vector stopped = x0;
  stopped[2] = 0.0;
  CHECK_THROWS_AS(hypersonic_dynamics(vp, AeroModel::surrogate(), stopped, 0.0),
                  ModelEvaluationError);
}

TEST_CASE("vehicle dynamics derivatives match differences") {
  const DynamicsFunction f = vehicle_dynamics(VehicleParams{});
  const Vector z = sample_point();
  const int ny = kNx + kNu + kNp;
  auto val = [&](const Vector& v) { return f.value(0.0, v.head(ny), v.tail(kNg)); };
  auto jac = [&](const Vector& v) { return f.jacobian(0.0, v.head(ny), v.tail(kNg)); };
  // Relative comparison: entries span many orders of magnitude.
  const Matrix j = jac(z);
  const JacobianComparison cmp =
      compare_jacobian_fd(val, jac, z, 1e-6, std::numeric_limits<double>::infinity());
  const Matrix dev = (cmp.finite_difference - j).cwiseAbs();
  const Matrix scale = j.cwiseAbs().cwiseMax(1.0);
  CHECK(dev.cwiseQuotient(scale).maxCoeff() < 1e-5);

  const Vector w = (Vector(kNx) << 0.3, -1.2, 0.7, 2.0, -0.5, 1.1).finished();
  const Matrix h = f.weighted_hessian(0.0, z.head(ny), z.tail(kNg), w);
  CHECK(max_asymmetry(h) == 0.0);
  auto grad = [&](const Vector& v) {
    return Vector(f.jacobian(0.0, v.head(ny), v.tail(kNg)).transpose() * w);
  };
  auto hess = [&](const Vector&) { return h; };
  std::vector<Vector> dirs;
  for (int k = 0; k < 3; ++k) {
    Vector d = Vector::Zero(z.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      d[i] = std::sin(1.3 * (i + 1) * (k + 1)) * std::max(1e-3, 1e-3 * std::abs(z[i]));
    }
    dirs.push_back(d);
  }
  const TaylorReport rep = check_derivatives(grad, hess, z, dirs, {1.0, 0.5, 0.25, 0.125});
  CHECK(rep.passes(4.0, 0.1));
}

TEST_CASE("max-downrange problem layout") {
  const OcpProblem p = build_max_downrange(VehicleParams{}, AeroModel::surrogate());
  CHECK(p.duration_index == 0);
  CHECK(p.t0 == 0.0);
  CHECK(p.tf == 1.0);
  CHECK(p.bounds.x_lower[1] == 0.0);
  CHECK(p.bounds.x_upper[4] == doctest::Approx(20.0 * kDeg));
  CHECK(p.bounds.u_lower[0] == doctest::Approx(-20.0 * kDeg));
  CHECK(p.bounds.p_lower[0] == 1000.0);
  CHECK(p.bounds.p_upper[0] == 3000.0);
  CHECK(!std::isfinite(p.bounds.x_upper[0]));
  const Vector xf = initial_state();
  CHECK(p.funcs.terminal_cost->value(xf, Vector::Constant(1, 2000.0)) == 0.0);
  Vector far = xf;
  far[0] = 5.0e6;
  CHECK(p.funcs.terminal_cost->value(far, Vector::Constant(1, 2000.0)) == doctest::Approx(-5000.0));
}

TEST_CASE("unit schemes") {
  CHECK(parse_unit_scheme("si") == UnitScheme::si);
  CHECK(parse_unit_scheme("kgkms") == UnitScheme::kgkms);
  CHECK_THROWS_AS(parse_unit_scheme("imperial"), std::invalid_argument);
  CHECK(to_string(UnitScheme::kgkms) == "kgkms");

  const OcpProblem phys = build_max_downrange(VehicleParams{}, AeroModel::surrogate());
  const ScaledProblem sp = unit_scaling(phys, UnitScheme::kgkms);
  CHECK(sp.problem.x0[1] == doctest::Approx(80.0));
  CHECK(sp.problem.bounds.x_upper[2] == doctest::Approx(6.0));
  const CollocationGrid grid = CollocationGrid::uniform(2, 3, 0.0, 1.0);
  const DiscreteTrajectory g = max_downrange_guess(VehicleParams{}, AeroModel::surrogate(), grid);
  const DiscreteTrajectory back = sp.to_physical(sp.to_scaled(g));
  CHECK((back.x - g.x).lpNorm<Eigen::Infinity>() <= 1e-16 * g.x.lpNorm<Eigen::Infinity>());
  CHECK(back.p == g.p);
  CHECK(sp.to_scaled(g).x(2, 0) == doctest::Approx(5.0));
}

TEST_CASE("glide guess starts at the initial condition and stays airborne") {
  const CollocationGrid grid = default_grid();
  CHECK(grid.num_intervals() == 16);
  CHECK(grid.nodes_per_interval() == 4);
  const DiscreteTrajectory g = max_downrange_guess(VehicleParams{}, AeroModel::surrogate(), grid);
  CHECK(g.x.cols() == grid.num_state_points());
  CHECK((g.x.col(0) - initial_state()).norm() == 0.0);
  CHECK(g.x.row(2).minCoeff() > 0.0);
  CHECK(g.x(0, g.x.cols() - 1) > 1.0e6);
}

TEST_CASE("max-downrange optimum is the same in both unit schemes") {
  const VehicleParams vp;
  const CollocationGrid grid = default_grid();
  const VehicleSolve si = solve_max_downrange(vp, AeroModel::surrogate(), grid, UnitScheme::si);
  const VehicleSolve km = solve_max_downrange(vp, AeroModel::surrogate(), grid, UnitScheme::kgkms);
  REQUIRE(si.solution.converged());
  REQUIRE(km.solution.converged());
  CHECK(si.solution.nlp.kkt_residual < 1e-8);
  CHECK(km.solution.nlp.kkt_residual < 1e-8);
  const double a = si.solution.nlp.objective;
  const double b = km.solution.nlp.objective;
  CHECK(std::abs(a - b) <= 1e-6 * std::abs(a));
  CHECK(a < -5000.0);
  const double xf = si.physical.x(0, si.physical.x.cols() - 1);
  CHECK(xf * 1e-3 == doctest::Approx(-a).epsilon(1e-12));
  // Bounds hold at the optimum.
  for (Eigen::Index j = 1; j < si.physical.x.cols(); ++j) {
    CHECK(si.physical.x(1, j) >= -1e-8);
    CHECK(si.physical.x(4, j) <= 20.0 * kDeg + 1e-8);
  }

  SUBCASE("tracking with the surrogate recovers the reference") {
    const Reference ref = as_reference(km);
    for (UnitScheme u : {UnitScheme::si, UnitScheme::kgkms}) {
      const VehicleSolve t = solve_tracking(vp, AeroModel::surrogate(), ref, u);
      REQUIRE(t.solution.converged());
      CHECK(t.solution.nlp.objective < 1e-8);
      CHECK((t.physical.x - ref.traj.x).cwiseAbs().maxCoeff() < 1e-6 * ref.traj.x.cwiseAbs().maxCoeff());
      CHECK(std::abs(t.physical.p[0] - ref.traj.p[0]) < 1e-6 * ref.traj.p[0]);
    }
  }
}
