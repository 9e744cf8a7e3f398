#include <cmath>
#include <vector>

#include "doctest.h"
#include "ocpsens/adjoint/qoi.hpp"
#include "ocpsens/collocation/ocp_solve.hpp"
#include "ocpsens/core/derivative_check.hpp"
#include "ocpsens/core/errors.hpp"
#include "ocpsens/sensitivity/lq.hpp"
#include "toy_problems.hpp"

using namespace ocpsens;

namespace {

KktSolution solve_toy(const OcpProblem& p, const CollocationGrid& grid) {
  DiscreteTrajectory guess;
  guess.x = Matrix::Constant(p.dims.n_x, grid.num_state_points(), p.x0[0]);
  guess.u = Matrix::Zero(p.dims.n_u, grid.num_nodes());
  guess.p = Vector::Zero(p.dims.n_p);
  SolverConfig cfg;
  cfg.kkt_tolerance = 1e-12;
  KktSolution sol = solve_ocp(p, grid, guess, cfg);
  REQUIRE(sol.converged());
  return sol;
}

PerturbationData constant_perturbation(const LqData& lq, const Vector& dg) {
  PerturbationData p = zero_perturbation(lq);
  for (Vector& v : p.dg) v = dg;
  return p;
}

PerturbationData random_perturbation(const LqData& lq, toy::Draws& draws) {
  PerturbationData p = zero_perturbation(lq);
  for (int j = 0; j < p.size(); ++j) {
    p.dg[j] = draws.vec(lq.dims().n_g);
    for (Eigen::Index k = 0; k < p.dg_y[j].size(); ++k) p.dg_y[j].data()[k] = draws.next();
  }
  return p;
}

}  // namespace

TEST_CASE("g independent of y: blocks reduce to plain partials") {
  const OcpProblem p = toy::scalar_lq(1.0);
  const CollocationGrid grid = CollocationGrid::uniform(3, 4, 0.0, 1.0);
  const LqData lq = assemble_lq_data(p, solve_toy(p, grid));
  for (int j = 0; j < lq.num_nodes(); ++j) {
    CHECK(lq.a(j)(0, 0) == 0.0);
    CHECK(lq.b(j)(0, 0) == 1.0);
    CHECK(lq.h(j, 'x', 'x')(0, 0) == 1.0);
    CHECK(lq.h(j, 'u', 'u')(0, 0) == 1.0);
    CHECK(lq.h(j, 'x', 'u')(0, 0) == 0.0);
    CHECK(lq.h(j, 'x', 'g')(0, 0) == 0.0);
    CHECK(lq.d(j)[0] == lq.samples()[j].lambda[0]);
  }
  CHECK(lq.inertia().zero == 0);
}

TEST_CASE("scalar toy with g = x^2 matches the hand chain rule") {
  const OcpProblem p = toy::square_toy(0.5);
  const CollocationGrid grid = CollocationGrid::uniform(4, 4, 0.0, 1.0);
  const KktSolution sol = solve_toy(p, grid);
  const LqData lq = assemble_lq_data(p, sol);
  for (int j = 0; j < lq.num_nodes(); ++j) {
    const double x = sol.traj.x(0, j + 1);
    const double lam = sol.traj.lambda(0, j);
    CHECK(lq.a(j)(0, 0) == doctest::Approx(2.0 * x).epsilon(1e-14));
    CHECK(lq.b(j)(0, 0) == 1.0);
    CHECK(lq.h(j, 'x', 'x')(0, 0) == doctest::Approx(2.0 * lam).epsilon(1e-14));
    CHECK(lq.h(j, 'u', 'u')(0, 0) == 2.0);
    CHECK(lq.h(j, 'x', 'u')(0, 0) == 0.0);
    CHECK(lq.h(j, 'x', 'g')(0, 0) == 0.0);
    CHECK(lq.d(j)[0] == doctest::Approx(lam).epsilon(1e-14));
  }
}

TEST_CASE("zero perturbation gives the zero solution; the map is linear") {
  const OcpProblem p = toy::curved(0.5);
  const CollocationGrid grid = CollocationGrid::uniform(3, 4, 0.0, 1.0);
  const LqData lq = assemble_lq_data(p, solve_toy(p, grid));
  const SensitivitySolution z = solve_sensitivity(lq, zero_perturbation(lq));
  CHECK(stack(z).norm() == 0.0);
  CHECK(z.dlambda.norm() == 0.0);

  toy::Draws draws(7);
  const PerturbationData pert = random_perturbation(lq, draws);
  const SensitivitySolution s = solve_sensitivity(lq, pert);
  CHECK(s.dx.col(0).norm() == 0.0);
  CHECK(s.residual < 1e-12);
  for (double alpha : {-1.0, 0.5, 2.0}) {
    const SensitivitySolution sa = solve_sensitivity(lq, pert.scaled(alpha));
    CHECK((stack(sa) - alpha * stack(s)).norm() <= 1e-12 * std::abs(alpha) * stack(s).norm());
    CHECK((sa.dlambda - alpha * s.dlambda).norm() <= 1e-12 * std::abs(alpha) * s.dlambda.norm());
  }
}

TEST_CASE("constant forcing on the scalar LQ problem matches the closed form") {
  // x' = u + c, min int (x^2 + u^2) / 2: dx = c sinh t / cosh 1,
  // du = c (cosh t / cosh 1 - 1), dlambda = -du.
  const OcpProblem p = toy::scalar_lq(0.0);
  const CollocationGrid grid = CollocationGrid::uniform(4, 8, 0.0, 1.0);
  const LqData lq = assemble_lq_data(p, solve_toy(p, grid));
  const double c = 0.7;
  const SensitivitySolution s = solve_sensitivity(lq, constant_perturbation(lq, Vector::Constant(1, c)));
  double err = 0.0;
  for (int j = 0; j < lq.num_nodes(); ++j) {
    const double t = grid.state_times()[j + 1];
    err = std::max(err, std::abs(s.dx(0, j + 1) - c * std::sinh(t) / std::cosh(1.0)));
    err = std::max(err, std::abs(s.du(0, j) - c * (std::cosh(t) / std::cosh(1.0) - 1.0)));
    err = std::max(err, std::abs(s.dlambda(0, j) + s.du(0, j)));
  }
  CHECK(err < 1e-8);
  CHECK(s.dx(0, 0) == 0.0);

  // QoI x(1): the forward derivative is c tanh 1.
  QoiFunctions q;
  TerminalCostFunction phi;
  phi.value = [](const Vector& x, const Vector&) { return x[0]; };
  phi.gradient = [](const Vector&, const Vector&) { return Vector::Ones(1); };
  phi.hessian = [](const Vector&, const Vector&) { return Matrix::Zero(1, 1); };
  q.terminal = phi;
  const PerturbationData pert = constant_perturbation(lq, Vector::Constant(1, c));
  CHECK(std::abs(forward_qoi_derivative(lq, s, pert, q) - c * std::tanh(1.0)) < 1e-8);

  SUBCASE("adjoint of x(1) matches the closed form") {
    // dx~ = -sinh t / cosh 1, dlambda~ = cosh t / cosh 1.
    const AdjointSolution adj = solve_adjoint_system(lq, q);
    double e = 0.0;
    for (int j = 0; j < lq.num_nodes(); ++j) {
      const double t = grid.state_times()[j + 1];
      e = std::max(e, std::abs(adj.dx(0, j + 1) + std::sinh(t) / std::cosh(1.0)));
      e = std::max(e, std::abs(adj.dlambda(0, j) - std::cosh(t) / std::cosh(1.0)));
    }
    CHECK(e < 1e-8);
    CHECK(adj.dx(0, 0) == 0.0);
    CHECK(std::abs(qoi_directional_derivative(lq, adj, pert, q) - c * std::tanh(1.0)) < 1e-8);
  }
}

TEST_CASE("sensitivity matches re-solves of the perturbed problem to second order") {
  const OcpProblem p = toy::curved(0.5);
  const CollocationGrid grid = CollocationGrid::uniform(3, 4, 0.0, 1.0);
  const KktSolution base = solve_toy(p, grid);
  const LqData lq = assemble_lq_data(p, base);
  const ComponentFunction dir = toy::curved_direction();
  const PerturbationData pert = perturbation_between(toy::shifted(p.g, dir, 1.0), p.g, lq);
  const SensitivitySolution s = solve_sensitivity(lq, pert);
  const Transcription tr(p, grid);
  const Vector z0 = tr.pack(base.traj);
  const Vector dz = [&] {
    DiscreteTrajectory d;
    d.x = s.dx;
    d.u = s.du;
    d.p = s.dp;
    return tr.pack(d);
  }();
  std::vector<double> rem;
  for (double h : {1e-2, 5e-3, 2.5e-3}) {
    OcpProblem ph = p;
    ph.g = toy::shifted(p.g, dir, h);
    const KktSolution sh = solve_toy(ph, grid);
    rem.push_back((tr.pack(sh.traj) - z0 - h * dz).lpNorm<Eigen::Infinity>());
  }
  for (std::size_t k = 0; k + 1 < rem.size(); ++k) {
    const double ratio = rem[k] / rem[k + 1];
    CHECK(ratio > 3.0);
    CHECK(ratio < 5.0);
  }
}

TEST_CASE("forward and adjoint QoI derivatives agree") {
  const OcpProblem p = toy::curved(0.5);
  const CollocationGrid grid = CollocationGrid::uniform(3, 4, 0.0, 1.0);
  const LqData lq = assemble_lq_data(p, solve_toy(p, grid));
  const QoiFunctions q = toy::mixed_qoi(p.dims);
  const AdjointSolution adj = solve_adjoint_system(lq, q);
  CHECK(adj.dx.col(0).norm() == 0.0);
  toy::Draws draws(11);
  for (int k = 0; k < 10; ++k) {
    const PerturbationData pert = random_perturbation(lq, draws);
    const double fwd = forward_qoi_derivative(lq, solve_sensitivity(lq, pert), pert, q);
    const double adv = qoi_directional_derivative(lq, adj, pert, q);
    CHECK(std::abs(fwd - adv) <= 1e-10 * std::max(1.0, std::abs(fwd)));
  }
  CHECK(qoi_directional_derivative(lq, adj, zero_perturbation(lq), q) == 0.0);

  const AdjointSolution none = solve_adjoint_system(lq, QoiFunctions{});
  CHECK(stack(none).norm() == 0.0);
  CHECK(none.dlambda.norm() == 0.0);
}

TEST_CASE("worst case equals exhaustive sign enumeration") {
  const OcpProblem p = toy::pair_toy(0.8);
  const CollocationGrid grid = CollocationGrid::uniform(1, 3, 0.0, 1.0);
  const LqData lq = assemble_lq_data(p, solve_toy(p, grid));
  const QoiFunctions q = toy::mixed_qoi(p.dims);
  const AdjointSolution adj = solve_adjoint_system(lq, q);
  toy::Draws draws(3);
  ErrorBands bands;
  for (int j = 0; j < 3; ++j) {
    bands.eps.push_back(draws.vec(2).cwiseAbs());
    bands.eps_y.push_back(draws.vec(2).cwiseAbs());
  }
  // 3 samples x (2 + 2) entries.
  const int entries = 12;
  double best = -1e300;
  for (int mask = 0; mask < (1 << entries); ++mask) {
    PerturbationData d = zero_perturbation(lq);
    int bit = 0;
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 2; ++k, ++bit) {
        d.dg[j][k] = ((mask >> bit) & 1 ? 1.0 : -1.0) * bands.eps[j][k];
      }
      for (int k = 0; k < 2; ++k, ++bit) {
        d.dg_y[j](k, 0) = ((mask >> bit) & 1 ? 1.0 : -1.0) * bands.eps_y[j](k, 0);
      }
    }
    best = std::max(best, qoi_directional_derivative(lq, adj, d, q));
  }
  const WorstCase wc = lp_worst_case(lq, adj, bands, q);
  CHECK(std::abs(wc.objective - best) <= 1e-10 * std::max(1.0, best));
  CHECK(std::abs(qoi_directional_derivative(lq, adj, wc.delta, q) - wc.objective) <=
        1e-12 * wc.objective);
  CHECK(qoi_error_bound(lq, adj, bands, q) == wc.objective);
  CHECK(lp_worst_case(lq, adj, bands.scaled(2.0), q).objective == 2.0 * wc.objective);
  CHECK(lp_worst_case(lq, adj, bands.scaled(0.0), q).objective == 0.0);

  ErrorBands bigger = bands;
  bigger.eps[1][0] += 0.5;
  CHECK(qoi_error_bound(lq, adj, bigger, q) >= wc.objective);
  ErrorBands negative = bands;
  negative.eps_y[2](1, 0) = -1e-3;
  CHECK_THROWS_AS(lp_worst_case(lq, adj, negative, q), std::invalid_argument);
}

TEST_CASE("bound dominates the estimate inside the bands") {
  const OcpProblem p = toy::curved(0.5);
  const CollocationGrid grid = CollocationGrid::uniform(3, 4, 0.0, 1.0);
  const LqData lq = assemble_lq_data(p, solve_toy(p, grid));
  const QoiFunctions q = toy::mixed_qoi(p.dims);
  const AdjointSolution adj = solve_adjoint_system(lq, q);
  toy::Draws draws(5);
  for (int k = 0; k < 5; ++k) {
    const PerturbationData pert = random_perturbation(lq, draws);
    const double est = qoi_error_estimate(lq, adj, pert, q);
    CHECK(est >= 0.0);
    CHECK(qoi_error_bound(lq, adj, equality_bands(pert), q) >= est);
  }
  CHECK(qoi_error_estimate(lq, adj, zero_perturbation(lq), q) == 0.0);
}

TEST_CASE("assembly refuses active bounds and indefinite reduced Hessians") {
  OcpProblem p = toy::scalar_lq(1.0);
  p.bounds.u_lower = Vector::Constant(1, -0.1);
  const CollocationGrid grid = CollocationGrid::uniform(2, 3, 0.0, 1.0);
  const KktSolution sol = solve_toy(p, grid);
  CHECK_THROWS_AS(assemble_lq_data(p, sol), ActiveBoundError);

  // l = -(x^2 + u^2) / 2 has a stationary point at zero that is a maximum.
  OcpProblem neg = toy::scalar_lq(0.0);
  const RunningCostFunction l = *neg.funcs.running_cost;
  RunningCostFunction ml;
  ml.value = [l](double t, const Vector& y, const Vector& g) { return -l.value(t, y, g); };
  ml.gradient = [l](double t, const Vector& y, const Vector& g) {
    return Vector(-l.gradient(t, y, g));
  };
  ml.hessian = [l](double t, const Vector& y, const Vector& g) {
    return Matrix(-l.hessian(t, y, g));
  };
  neg.funcs.running_cost = ml;
  KktSolution zero{grid, {}, {}};
  zero.traj.x = Matrix::Zero(1, grid.num_state_points());
  zero.traj.u = Matrix::Zero(1, grid.num_nodes());
  zero.traj.p = Vector::Zero(0);
  zero.traj.lambda = Matrix::Zero(1, grid.num_nodes());
  CHECK_THROWS_AS(assemble_lq_data(neg, zero), SsocViolationError);

  KktSolution bare = zero;
  bare.traj.lambda.resize(0, 0);
  CHECK_THROWS_AS(assemble_lq_data(toy::scalar_lq(0.0), bare), DimensionError);
}

TEST_CASE("perturbation shape is checked") {
  const OcpProblem p = toy::curved(0.5);
  const CollocationGrid grid = CollocationGrid::uniform(2, 3, 0.0, 1.0);
  const LqData lq = assemble_lq_data(p, solve_toy(p, grid));
  PerturbationData short_pert = zero_perturbation(lq);
  short_pert.dg.pop_back();
  short_pert.dg_y.pop_back();
  CHECK_THROWS_AS(solve_sensitivity(lq, short_pert), DimensionError);
  CHECK_THROWS_AS(perturbation_between(toy::pair_component(), toy::identity_of_state(3), lq),
                  DimensionError);
  for (int j = 0; j < lq.num_nodes(); ++j) {
    CHECK(max_asymmetry(lq.samples()[j].h_yy) <= 1e-15);
  }
}
