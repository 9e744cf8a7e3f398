#include <cmath>

#include "doctest.h"
#include "ocpsens/core/composition.hpp"
#include "ocpsens/core/derivative_check.hpp"
#include "ocpsens/core/errors.hpp"
#include "ocpsens/core/transform.hpp"
#include "toy_problems.hpp"

using namespace ocpsens;

TEST_CASE("taylor remainder of a quadratic with exact gradient halves to a quarter") {
  auto q = [](const Vector& z) { return Vector::Constant(1, z.squaredNorm()); };
  auto dq = [](const Vector& z) { return Matrix(2.0 * z.transpose()); };
  toy::Draws draws(1);
  std::vector<Vector> dirs{draws.vec(4), draws.vec(4)};
  const auto rep = check_derivatives(q, dq, draws.vec(4), dirs, {1e-3, 5e-4, 2.5e-4});
  CHECK(rep.passes());
  for (const auto& seq : rep.directions) {
    for (double r : seq.ratios) CHECK(r == doctest::Approx(4.0).epsilon(1e-6));
  }
}

TEST_CASE("wrong derivative is caught by the remainder ratios") {
  auto f = [](const Vector& z) { return Vector::Constant(1, std::sin(z[0]) * z[1]); };
  auto bad = [](const Vector& z) {
    Matrix j(1, 2);
    j << std::cos(z[0]) * z[1] + 1e-2, std::sin(z[0]);
    return j;
  };
  Vector e0 = Vector::Unit(2, 0);
  const auto rep = check_derivatives(f, bad, Vector::Constant(2, 0.7), {e0},
                                     {1e-3, 5e-4, 2.5e-4});
  CHECK_FALSE(rep.passes());
}

TEST_CASE("non-finite evaluations are reported per step") {
  auto f = [](const Vector& z) { return Vector::Constant(1, std::log(z[0])); };
  auto df = [](const Vector& z) { return Matrix::Constant(1, 1, 1.0 / z[0]); };
  const auto rep = check_derivatives(f, df, Vector::Constant(1, 1e-3),
                                     {Vector::Constant(1, -1.0)}, {2e-3, 1e-3, 5e-4});
  REQUIRE(rep.directions.size() == 1);
  CHECK_FALSE(rep.directions[0].finite[0]);
  CHECK(rep.directions[0].finite[2]);
  CHECK_FALSE(rep.passes());
}

TEST_CASE("injected jacobian defect is flagged at its entry") {
  auto f = [](const Vector& z) {
    Vector v(2);
    v << z[0] * z[1], std::exp(z[1]);
    return v;
  };
  auto jac = [](const Vector& z) {
    Matrix j(2, 2);
    j << z[1], z[0], 0.0, std::exp(z[1]);
    j(1, 0) += 1e-2;
    return j;
  };
  const auto cmp = compare_jacobian_fd(f, jac, Vector::Constant(2, 0.3), 1e-5, 1e-6);
  REQUIRE(cmp.flagged.size() == 1);
  CHECK(cmp.flagged[0].row == 1);
  CHECK(cmp.flagged[0].col == 0);
  CHECK(cmp.max_abs_deviation == doctest::Approx(1e-2).epsilon(1e-6));
}

TEST_CASE("composed dynamics equal the two calls made separately") {
  const OcpProblem prob = toy::curved();
  toy::Draws draws(7);
  for (int i = 0; i < 100; ++i) {
    const double t = 0.5 * (draws.next() + 1.0);
    const Vector y = 2.0 * draws.vec(3);
    const Vector g = prob.g.value(t, y);
    const Vector expected = prob.funcs.dynamics.value(t, y, g);
    const Vector got = eval_composed_dynamics(prob, t, y);
    CHECK(got == expected);
  }
}

TEST_CASE("composed dynamics reject non-finite output with time and point") {
  OcpProblem prob = toy::curved();
  prob.funcs.dynamics.value = [](double, const Vector&, const Vector&) {
    return Vector::Constant(1, std::nan(""));
  };
  const Vector y = Vector::Constant(3, 0.25);
  try {
    eval_composed_dynamics(prob, 0.4, y);
    FAIL("expected an exception");
  } catch (const ModelEvaluationError& e) {
    CHECK(e.time() == 0.4);
    CHECK(e.point() == y);
  }
}

TEST_CASE("chain rule hessian for a scalar toy matches hand computation") {
  // f = g(x) + u with g = x^2, l = u^2. H = u^2 + lambda (x^2 + u).
  // H_xx = 2 lambda through the curvature of g; H_uu = 2; H_xu = 0.
  ComponentFunction g;
  g.n_g = 1;
  g.value = [](double, const Vector& y) { return Vector::Constant(1, y[0] * y[0]); };
  g.jacobian = [](double, const Vector& y) {
    Matrix j(1, 2);
    j << 2.0 * y[0], 0.0;
    return j;
  };
  g.hessians = [](double, const Vector&) {
    Matrix h = Matrix::Zero(2, 2);
    h(0, 0) = 2.0;
    return std::vector<Matrix>{h};
  };
  const double lambda = 0.7;
  const Vector y = (Vector(2) << 0.3, -0.4).finished();
  const auto s = sample_component(g, 0.0, y, true);
  // Over (x, u, g): H = u^2 + lambda (g + u).
  Matrix hess_yg = Matrix::Zero(3, 3);
  hess_yg(1, 1) = 2.0;
  const Vector grad_g = Vector::Constant(1, lambda);
  const Matrix h = chain_hessian(hess_yg, grad_g, s.jacobian, s.hessians);
  CHECK(h(0, 0) == doctest::Approx(2.0 * lambda));
  CHECK(h(1, 1) == doctest::Approx(2.0));
  CHECK(h(0, 1) == 0.0);
  CHECK(max_asymmetry(h) == 0.0);
}

TEST_CASE("chain rule jacobian and hessian agree with finite differences") {
  const OcpProblem prob = toy::curved();
  const auto& l = *prob.funcs.running_cost;
  const Vector y0 = (Vector(3) << 0.4, -0.3, 0.8).finished();
  auto total = [&](const Vector& y) {
    return Vector::Constant(1, l.value(0.0, y, prob.g.value(0.0, y)));
  };
  auto total_grad = [&](const Vector& y) {
    const auto s = sample_component(prob.g, 0.0, y, false);
    return Matrix(chain_gradient(l.gradient(0.0, y, s.value), s.jacobian).transpose());
  };
  auto total_hess = [&](const Vector& y) {
    const auto s = sample_component(prob.g, 0.0, y, true);
    const Vector grad = l.gradient(0.0, y, s.value);
    return chain_hessian(l.hessian(0.0, y, s.value), grad.tail(2), s.jacobian, s.hessians);
  };
  toy::Draws draws(3);
  std::vector<Vector> dirs{draws.vec(3), draws.vec(3), draws.vec(3)};
  const std::vector<double> steps{1e-3, 5e-4, 2.5e-4};
  CHECK(check_derivatives(total, total_grad, y0, dirs, steps).passes());
  auto grad_as_vec = [&](const Vector& y) { return Vector(total_grad(y).transpose()); };
  CHECK(check_derivatives(grad_as_vec, total_hess, y0, dirs, steps).passes());
  CHECK(max_asymmetry(total_hess(y0)) == 0.0);
}

TEST_CASE("toy problem derivatives pass the remainder test") {
  toy::Draws draws(11);
  const std::vector<double> steps{1e-3, 5e-4, 2.5e-4};
  for (const OcpProblem& prob :
       {toy::curved(), toy::scalar_lq(), toy::double_integrator(), toy::exponential_growth()}) {
    const Dims& d = prob.dims;
    const Vector y0 = draws.vec(d.n_y());
    const Vector g0 = draws.vec(d.n_g);
    std::vector<Vector> dirs{draws.vec(d.n_yg()), draws.vec(d.n_yg())};
    const Vector yg0 = (Vector(d.n_yg()) << y0, g0).finished();
    auto f = [&](const Vector& yg) {
      return prob.funcs.dynamics.value(0.2, yg.head(d.n_y()), yg.tail(d.n_g));
    };
    auto jf = [&](const Vector& yg) {
      return prob.funcs.dynamics.jacobian(0.2, yg.head(d.n_y()), yg.tail(d.n_g));
    };
    CHECK(check_derivatives(f, jf, yg0, dirs, steps).worst_deviation() < 0.1);
    std::vector<Vector> gdirs{draws.vec(d.n_y())};
    auto gv = [&](const Vector& y) { return prob.g.value(0.2, y); };
    auto gj = [&](const Vector& y) { return prob.g.jacobian(0.2, y); };
    CHECK(check_derivatives(gv, gj, y0, gdirs, steps).passes());
  }
}

TEST_CASE("normalized time multiplies dynamics by the duration with exact partials") {
  OcpProblem prob = toy::curved();
  const ProblemFunctions nf = normalize_time(prob.funcs, prob.dims, 0, true);
  const Vector y = (Vector(3) << 0.4, -0.3, 1.7).finished();
  const Vector g = prob.g.value(0.3, y);
  const Vector base = prob.funcs.dynamics.value(0.3, y, g);
  CHECK((nf.dynamics.value(0.3, y, g) - 1.7 * base).norm() == 0.0);
  CHECK(nf.running_cost->value(0.3, y, g) ==
        doctest::Approx(1.7 * prob.funcs.running_cost->value(0.3, y, g)));

  const Vector yg = (Vector(5) << y, g).finished();
  toy::Draws draws(5);
  std::vector<Vector> dirs{draws.vec(5), draws.vec(5)};
  const std::vector<double> steps{1e-3, 5e-4, 2.5e-4};
  const Vector w = Vector::Constant(1, 0.9);
  auto fw = [&](const Vector& z) {
    return Vector::Constant(1, w.dot(nf.dynamics.value(0.3, z.head(3), z.tail(2))));
  };
  auto jw = [&](const Vector& z) {
    return Matrix(w.transpose() * nf.dynamics.jacobian(0.3, z.head(3), z.tail(2)));
  };
  auto jw_vec = [&](const Vector& z) { return Vector(jw(z).transpose()); };
  auto hw = [&](const Vector& z) {
    return nf.dynamics.weighted_hessian(0.3, z.head(3), z.tail(2), w);
  };
  CHECK(check_derivatives(fw, jw, yg, dirs, steps).passes());
  CHECK(check_derivatives(jw_vec, hw, yg, dirs, steps).worst_deviation() < 0.1);

  auto lv = [&](const Vector& z) {
    return Vector::Constant(1, nf.running_cost->value(0.3, z.head(3), z.tail(2)));
  };
  auto lg = [&](const Vector& z) {
    return Matrix(nf.running_cost->gradient(0.3, z.head(3), z.tail(2)).transpose());
  };
  auto lg_vec = [&](const Vector& z) { return Vector(lg(z).transpose()); };
  auto lh = [&](const Vector& z) { return nf.running_cost->hessian(0.3, z.head(3), z.tail(2)); };
  CHECK(check_derivatives(lv, lg, yg, dirs, steps).passes());
  CHECK(check_derivatives(lg_vec, lh, yg, dirs, steps).worst_deviation() < 0.1);
}

TEST_CASE("variable scaling is consistent with the physical problem") {
  const OcpProblem phys = toy::curved(0.8);
  VariableScaling s = VariableScaling::identity(phys.dims);
  s.x[0] = 4.0;
  s.u[0] = 0.5;
  s.p[0] = 2.0;
  s.objective = 0.1;
  const OcpProblem sc = scale_problem(phys, s);
  CHECK(sc.x0[0] == doctest::Approx(0.2));
  const Vector ys = (Vector(3) << 0.1, -0.6, 0.3).finished();
  const Vector yp = (Vector(3) << 0.4, -0.3, 0.6).finished();
  const Vector g = sc.g.value(0.1, ys);
  CHECK((g - phys.g.value(0.1, yp)).norm() == 0.0);
  CHECK(sc.funcs.dynamics.value(0.1, ys, g)[0] ==
        doctest::Approx(phys.funcs.dynamics.value(0.1, yp, g)[0] / 4.0));
  CHECK(sc.funcs.running_cost->value(0.1, ys, g) ==
        doctest::Approx(0.1 * phys.funcs.running_cost->value(0.1, yp, g)));

  toy::Draws draws(9);
  std::vector<Vector> dirs{draws.vec(5)};
  const std::vector<double> steps{1e-3, 5e-4, 2.5e-4};
  const Vector yg = (Vector(5) << ys, g).finished();
  const Vector w = Vector::Constant(1, -1.3);
  auto jw_vec = [&](const Vector& z) {
    return Vector(sc.funcs.dynamics.jacobian(0.1, z.head(3), z.tail(2)).transpose() * w);
  };
  auto hw = [&](const Vector& z) {
    return sc.funcs.dynamics.weighted_hessian(0.1, z.head(3), z.tail(2), w);
  };
  CHECK(check_derivatives(jw_vec, hw, yg, dirs, steps).worst_deviation() < 0.1);
  auto gv = [&](const Vector& y) { return sc.g.value(0.1, y); };
  auto gj = [&](const Vector& y) { return sc.g.jacobian(0.1, y); };
  std::vector<Vector> ydirs{draws.vec(3)};
  CHECK(check_derivatives(gv, gj, ys, ydirs, steps).passes());
}

TEST_CASE("problem validation rejects mismatched arrays") {
  OcpProblem prob = toy::curved();
  prob.x0 = Vector::Zero(2);
  CHECK_THROWS_AS(prob.validate(), DimensionError);
  Dims d{0, 1, 0, 1};
  CHECK_THROWS_AS(d.validate(), DimensionError);
}
