#include <cmath>

#include "doctest.h"
#include "ocpsens/collocation/grid.hpp"
#include "ocpsens/collocation/lgr.hpp"
#include "ocpsens/collocation/ocp_solve.hpp"
#include "ocpsens/collocation/transcription.hpp"
#include "ocpsens/core/derivative_check.hpp"
#include "ocpsens/core/errors.hpp"
#include "ocpsens/nlp/interior_point.hpp"
#include "toy_problems.hpp"

using namespace ocpsens;

TEST_CASE("one-point and two-point flipped Radau rules") {
  const RadauRule r1 = lgr_nodes(1);
  CHECK(r1.nodes[0] == 1.0);
  CHECK(r1.weights[0] == doctest::Approx(2.0).epsilon(1e-15));
  const RadauRule r2 = lgr_nodes(2);
  CHECK(r2.nodes[0] == doctest::Approx(-1.0 / 3.0).epsilon(1e-15));
  CHECK(r2.nodes[1] == 1.0);
  CHECK(r2.weights[0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(r2.weights[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS(lgr_nodes(0));
}

TEST_CASE("radau quadrature integrates monomials up to degree 2n-2") {
  for (int n = 1; n <= 8; ++n) {
    const RadauRule r = lgr_nodes(n);
    for (int i = 0; i < n; ++i) {
      CHECK(r.weights[i] > 0.0);
      if (i > 0) CHECK(r.nodes[i] > r.nodes[i - 1]);
    }
    CHECK(r.nodes[0] > -1.0);
    for (int k = 0; k <= 2 * n - 2; ++k) {
      double q = 0.0;
      for (int i = 0; i < n; ++i) q += r.weights[i] * std::pow(r.nodes[i], k);
      const double exact = (k % 2 == 0) ? 2.0 / (k + 1) : 0.0;
      CHECK(std::abs(q - exact) < 1e-12);
    }
  }
}

TEST_CASE("differentiation matrix examples") {
  const Vector s = (Vector(3) << -1.0, -1.0 / 3.0, 1.0).finished();
  const Matrix d = differentiation_matrix(s);
  CHECK((d * Vector::Ones(3)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((d * s - Vector::Ones(3)).cwiseAbs().maxCoeff() < 1e-13);
  const Vector sq = s.cwiseProduct(s);
  CHECK((d * sq - 2.0 * s).cwiseAbs().maxCoeff() < 1e-13);
  const Vector dup = (Vector(3) << 0.0, 0.5, 0.5).finished();
  CHECK_THROWS(differentiation_matrix(dup));
}

TEST_CASE("differentiation on {-1} u nodes is exact for degree n polynomials") {
  for (int n = 2; n <= 8; ++n) {
    const CollocationGrid grid = CollocationGrid::uniform(1, n, -1.0, 1.0);
    const Matrix& d = grid.reference_differentiation();
    Vector support(n + 1);
    support[0] = -1.0;
    support.tail(n) = grid.rule().nodes;
    CHECK((d * Vector::Ones(n + 1)).cwiseAbs().maxCoeff() < 1e-13);
    for (int k = 1; k <= n; ++k) {
      const Vector v = support.array().pow(k);
      const Vector dv = k * grid.rule().nodes.array().pow(k - 1);
      CHECK((d * v - dv).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("grid layout: weights sum to interval lengths, nodes include right ends") {
  const CollocationGrid grid({0.0, 0.25, 0.6, 1.0}, 4, 2.0, 4.0);
  CHECK(grid.num_nodes() == 12);
  CHECK(grid.quadrature_weights().sum() == doctest::Approx(2.0).epsilon(1e-14));
  for (int k = 0; k < 3; ++k) {
    double w = 0.0;
    for (int i = 0; i < 4; ++i) w += grid.quadrature_weights()[k * 4 + i];
    CHECK(w == doctest::Approx(grid.interval_length(k)).epsilon(1e-14));
    CHECK(grid.state_times()[(k + 1) * 4] == grid.breakpoints()[k + 1]);
  }
  CHECK(grid.locate(2.0) == 0);
  CHECK(grid.locate(2.5) == 0);
  CHECK(grid.locate(2.5000001) == 1);
  CHECK(grid.locate(4.0) == 2);
  CHECK_THROWS_AS(grid.locate(4.1), std::out_of_range);
  CHECK_THROWS_AS(CollocationGrid({0.0, 0.5, 0.5, 1.0}, 3, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("interpolation returns stored values at support points and reproduces polynomials") {
  const CollocationGrid grid = CollocationGrid::uniform(3, 5, 0.0, 1.0);
  const Vector& ts = grid.state_times();
  Matrix vals(1, ts.size());
  for (int i = 0; i < ts.size(); ++i) vals(0, i) = std::exp(ts[i]);
  for (int i = 0; i < ts.size(); ++i) {
    CHECK(interpolate_states(grid, vals, ts[i])[0] == vals(0, i));
  }
  Matrix poly(1, ts.size());
  for (int i = 0; i < ts.size(); ++i) poly(0, i) = 1.0 - 2.0 * ts[i] + 3.0 * std::pow(ts[i], 4);
  for (int k = 0; k < 3; ++k) {
    const double mid = grid.breakpoints()[k] + 0.5 * grid.interval_length(k);
    const double exact = 1.0 - 2.0 * mid + 3.0 * std::pow(mid, 4);
    CHECK(std::abs(interpolate_states(grid, poly, mid)[0] - exact) < 1e-12);
    CHECK(std::abs(interpolate_states(grid, vals, mid)[0] - std::exp(mid)) < 1e-6);
  }
  Matrix ctrl(1, grid.num_nodes());
  const Vector nt = grid.node_times();
  for (int j = 0; j < nt.size(); ++j) ctrl(0, j) = 2.0 + nt[j] * nt[j];
  CHECK(std::abs(interpolate_controls(grid, ctrl, 0.5)[0] - 2.25) < 1e-12);
  CHECK(std::abs(interpolate_controls(grid, ctrl, 0.0)[0] - 2.0) < 1e-12);
  CHECK_THROWS_AS(interpolate_states(grid, vals, 1.5), std::out_of_range);
  CHECK_THROWS_AS(interpolate_states(grid, vals, -0.1), std::out_of_range);
}

namespace {

double exp_error(int intervals, int nodes) {
  const OcpProblem prob = toy::exponential_growth();
  const CollocationGrid grid = CollocationGrid::uniform(intervals, nodes, 0.0, 1.0);
  const Transcription tr(prob, grid);
  DiscreteTrajectory guess;
  guess.x = Matrix::Ones(1, grid.num_state_points());
  guess.u.resize(0, grid.num_nodes());
  guess.p.resize(0);
  const NlpSolution sol = solve(tr.nlp(), tr.pack(guess));
  REQUIRE(sol.converged());
  CHECK(sol.infeasibility < 1e-8);
  const DiscreteTrajectory out = tr.unpack(sol.x);
  return std::abs(out.x(0, grid.num_nodes()) - std::exp(1.0));
}

}  // namespace

TEST_CASE("x' = x is reproduced and mesh halving shrinks the error tenfold") {
  CHECK(exp_error(4, 5) < 1e-8);
  // Three nodes per interval keeps the error above round-off while halving.
  const double e1 = exp_error(1, 3);
  const double e2 = exp_error(2, 3);
  const double e4 = exp_error(4, 3);
  CHECK(e2 * 10.0 <= e1);
  CHECK(e4 * 10.0 <= e2);
}

TEST_CASE("zero dynamics with l = u^2 has optimum u = 0") {
  OcpProblem prob = toy::scalar_lq(0.0);
  prob.funcs.dynamics.value = [](double, const Vector&, const Vector&) {
    return Vector::Zero(1);
  };
  prob.funcs.dynamics.jacobian = [](double, const Vector&, const Vector&) {
    return Matrix::Zero(1, 3);
  };
  prob.funcs.running_cost->value = [](double, const Vector& y, const Vector&) {
    return y[1] * y[1];
  };
  prob.funcs.running_cost->gradient = [](double, const Vector& y, const Vector&) {
    return Vector((Vector(3) << 0.0, 2.0 * y[1], 0.0).finished());
  };
  prob.funcs.running_cost->hessian = [](double, const Vector&, const Vector&) {
    Matrix h = Matrix::Zero(3, 3);
    h(1, 1) = 2.0;
    return h;
  };
  const CollocationGrid grid = CollocationGrid::uniform(3, 3, 0.0, 1.0);
  const Transcription tr(prob, grid);
  DiscreteTrajectory guess{Matrix::Zero(1, 10), Matrix::Constant(1, 9, 0.7), Vector(0), {}};
  const NlpSolution sol = solve(tr.nlp(), tr.pack(guess));
  REQUIRE(sol.converged());
  CHECK(std::abs(sol.objective) < 1e-12);
  CHECK(tr.unpack(sol.x).u.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("double integrator matches the closed-form cubic solution") {
  const OcpProblem prob = toy::double_integrator(3.0);
  const CollocationGrid grid = CollocationGrid::uniform(2, 4, 0.0, 1.0);
  const Transcription tr(prob, grid);
  DiscreteTrajectory guess{Matrix::Zero(2, 9), Matrix::Zero(1, 8), Vector(0), {}};
  const NlpSolution sol = solve(tr.nlp(), tr.pack(guess));
  REQUIRE(sol.converged());
  CHECK(sol.objective == doctest::Approx(0.75).epsilon(1e-10));
  DiscreteTrajectory out = tr.unpack(sol.x);
  // lambda1 = -3/2, u = 3/2 (1 - t), x1 = 3/4 t^2 - t^3 / 4.
  const Vector& ts = grid.state_times();
  for (int i = 0; i < ts.size(); ++i) {
    const double t = ts[i];
    CHECK(out.x(0, i) == doctest::Approx(0.75 * t * t - 0.25 * t * t * t).epsilon(1e-10));
  }
  const Matrix lambda = tr.costate(sol.multipliers);
  const Vector nt = grid.node_times();
  for (int j = 0; j < nt.size(); ++j) {
    CHECK(lambda(0, j) == doctest::Approx(-1.5).epsilon(1e-8));
    CHECK(lambda(1, j) == doctest::Approx(-1.5 * (1.0 - nt[j])).epsilon(1e-8));
  }
}

TEST_CASE("transcribed derivatives agree with finite differences") {
  const OcpProblem prob = toy::curved();
  const CollocationGrid grid = CollocationGrid::uniform(2, 3, 0.0, 1.0);
  const Transcription tr(prob, grid);
  const Nlp& nlp = tr.nlp();
  CHECK(nlp.num_constraints == 1 * (6 + 1));
  toy::Draws draws(21);
  const Vector z = 0.5 * draws.vec(nlp.num_variables);
  const Vector nu = draws.vec(nlp.num_constraints);
  std::vector<Vector> dirs{draws.vec(nlp.num_variables), draws.vec(nlp.num_variables)};
  const std::vector<double> steps{1e-3, 5e-4, 2.5e-4};

  auto obj = [&](const Vector& v) { return Vector::Constant(1, nlp.objective(v)); };
  auto grad = [&](const Vector& v) { return Matrix(nlp.gradient(v).transpose()); };
  CHECK(check_derivatives(obj, grad, z, dirs, steps).worst_deviation() < 0.1);
  auto jac = [&](const Vector& v) { return Matrix(nlp.jacobian(v)); };
  CHECK(check_derivatives(nlp.constraints, jac, z, dirs, steps).worst_deviation() < 0.1);
  auto lag_grad = [&](const Vector& v) {
    return Vector(0.7 * nlp.gradient(v) + nlp.jacobian(v).transpose() * nu);
  };
  auto lag_hess = [&](const Vector& v) { return Matrix(nlp.hessian(v, 0.7, nu)); };
  CHECK(check_derivatives(lag_grad, lag_hess, z, dirs, steps).worst_deviation() < 0.1);
  CHECK(max_asymmetry(lag_hess(z)) == 0.0);

  // Sparsity patterns do not move between evaluation points.
  const SparseMatrix j1 = nlp.jacobian(z);
  const SparseMatrix j2 = nlp.jacobian(Vector::Zero(nlp.num_variables));
  CHECK(j1.nonZeros() == j2.nonZeros());
}

TEST_CASE("transcription rejects dimension mismatches and bad guesses") {
  OcpProblem prob = toy::curved();
  const CollocationGrid grid = CollocationGrid::uniform(2, 3, 0.0, 1.0);
  const Transcription tr(prob, grid);
  DiscreteTrajectory bad{Matrix::Zero(2, 7), Matrix::Zero(1, 6), Vector::Zero(1), {}};
  CHECK_THROWS_AS(tr.pack(bad), DimensionError);
  CHECK_THROWS_AS(Transcription(prob, CollocationGrid::uniform(2, 3, 0.0, 2.0)), DimensionError);

  prob.g.value = [](double, const Vector& y) {
    return Vector((Vector(2) << std::log(y[0]), 0.0).finished());
  };
  const Transcription tr_bad(prob, grid);
  DiscreteTrajectory guess{Matrix::Constant(1, 7, -1.0), Matrix::Zero(1, 6), Vector::Zero(1), {}};
  CHECK_THROWS_AS(solve(tr_bad.nlp(), tr_bad.pack(guess)), ModelEvaluationError);
}

TEST_CASE("resampling onto a finer grid is exact for low-degree polynomials") {
  const CollocationGrid coarse = CollocationGrid::uniform(3, 4, 0.0, 2.0);
  const CollocationGrid fine = CollocationGrid::uniform(7, 3, 0.0, 2.0);
  auto xs = [](double t) { return 1.0 + t - 0.5 * t * t * t; };  // degree <= n
  auto us = [](double t) { return 2.0 - t * t; };                // degree <= n - 1
  DiscreteTrajectory d;
  d.x.resize(1, coarse.num_state_points());
  d.u.resize(1, coarse.num_nodes());
  d.p = Vector::Constant(1, 4.0);
  for (int i = 0; i < coarse.num_state_points(); ++i) d.x(0, i) = xs(coarse.state_times()[i]);
  for (int j = 0; j < coarse.num_nodes(); ++j) d.u(0, j) = us(coarse.state_times()[j + 1]);
  const DiscreteTrajectory r = resample(coarse, d, fine);
  REQUIRE(r.x.cols() == fine.num_state_points());
  REQUIRE(r.u.cols() == fine.num_nodes());
  for (int i = 0; i < fine.num_state_points(); ++i) {
    CHECK(std::abs(r.x(0, i) - xs(fine.state_times()[i])) < 1e-12);
  }
  for (int j = 0; j < fine.num_nodes(); ++j) {
    CHECK(std::abs(r.u(0, j) - us(fine.state_times()[j + 1])) < 1e-12);
  }
  CHECK(r.p[0] == 4.0);
  CHECK(r.lambda.size() == 0);
}
