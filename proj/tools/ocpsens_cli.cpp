// ocpsens: reference solve, sensitivity prediction and QoI error study for
// the hypersonic vehicle, plus a self-check.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ocpsens/app/config.hpp"
#include "ocpsens/app/experiments.hpp"
#include "ocpsens/app/self_check.hpp"
#include "ocpsens/collocation/ocp_solve.hpp"
#include "ocpsens/sensitivity/lq.hpp"

namespace {

using namespace ocpsens;
using namespace ocpsens::app;
namespace hs = ocpsens::hypersonic;
namespace fs = std::filesystem;

struct Flags {
  std::string config;
  std::string out;
  std::string eps;
  std::string grid;
  std::string units;
};

RunConfig effective_config(const Flags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_config(f.config);
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (!f.eps.empty()) cfg.eps = parse_eps_list(f.eps);
  if (!f.grid.empty()) std::tie(cfg.intervals, cfg.nodes) = parse_grid(f.grid);
  if (!f.units.empty()) {
    try {
      cfg.units = hs::parse_unit_scheme(f.units);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  cfg.validate();
  return cfg;
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.output_dir) / name).string();
}

// x' = u + g with g == 0, l = (x^2 + u^2) / 2, x(0) = 1 on [0, 1].
OcpProblem toy_lq() {
  OcpProblem p;
  p.dims = {1, 1, 0, 1};
  p.x0 = Vector::Ones(1);
  p.g.n_g = 1;
  p.g.value = [](double, const Vector&) { return Vector::Zero(1); };
  p.g.jacobian = [](double, const Vector&) { return Matrix::Zero(1, 2); };
  p.g.hessians = [](double, const Vector&) { return std::vector<Matrix>{Matrix::Zero(2, 2)}; };
  p.funcs.dynamics.value = [](double, const Vector& y, const Vector& g) {
    return Vector::Constant(1, y[1] + g[0]);
  };
  p.funcs.dynamics.jacobian = [](double, const Vector&, const Vector&) {
    return Matrix((Matrix(1, 3) << 0.0, 1.0, 1.0).finished());
  };
  p.funcs.dynamics.weighted_hessian = [](double, const Vector&, const Vector&, const Vector&) {
    return Matrix(Matrix::Zero(3, 3));
  };
  RunningCostFunction l;
  l.value = [](double, const Vector& y, const Vector&) { return 0.5 * (y[0] * y[0] + y[1] * y[1]); };
  l.gradient = [](double, const Vector& y, const Vector&) {
    return Vector((Vector(3) << y[0], y[1], 0.0).finished());
  };
  l.hessian = [](double, const Vector&, const Vector&) {
    Matrix h = Matrix::Zero(3, 3);
    h(0, 0) = h(1, 1) = 1.0;
    return h;
  };
  p.funcs.running_cost = l;
  p.bounds = Bounds::unbounded(p.dims);
  return p;
}

SolveReport report_of(const std::string& problem, const KktSolution& s, double duration) {
  SolveReport r;
  r.problem = problem;
  r.status = to_string(s.nlp.status);
  r.objective = s.nlp.objective;
  r.kkt_residual = s.nlp.kkt_residual;
  r.iterations = s.nlp.iterations;
  r.duration_T = duration;
  return r;
}

int finish_report(const RunConfig& cfg, const std::string& stem, const SolveReport& r) {
  const Metadata meta = Metadata::from(cfg, "solve-reference");
  write_text(out_path(cfg, stem + "_report.json"), report_json(meta, r));
  fmt::print("{}: {} objective {:.12g} kkt {:.3e} iterations {} T {:.9g}\n", r.problem, r.status,
             r.objective, r.kkt_residual, r.iterations, r.duration_T);
  return r.status == "converged" ? 0 : 1;
}

int cmd_solve_reference(const RunConfig& cfg) {
  const Metadata meta = Metadata::from(cfg, "solve-reference");
  switch (cfg.problem) {
    case ProblemKind::max_downrange: {
      const hs::VehicleSolve s = hs::solve_max_downrange(
          hs::VehicleParams{}, hs::AeroModel::surrogate(), cfg.grid(), cfg.units, cfg.solver);
      if (s.solution.converged()) {
        const hs::Reference ref = hs::as_reference(s);
        write_reference(out_path(cfg, "reference.json"), ref, meta);
        write_text(out_path(cfg, "reference.csv"),
                   trajectory_csv(meta, dense_samples(ref.grid, ref.traj)));
      }
      return finish_report(cfg, "reference",
                           report_of("max-downrange", s.solution, s.physical.p[0]));
    }
    case ProblemKind::tracking: {
      bool solved = false;
      const hs::Reference ref = obtain_reference(cfg, &solved);
      if (solved) fmt::print("solved and stored the max-downrange reference\n");
      const hs::VehicleSolve s = hs::solve_tracking(hs::VehicleParams{}, hs::AeroModel::surrogate(),
                                                    ref, cfg.units, cfg.solver);
      if (s.solution.converged()) {
        write_text(out_path(cfg, "tracking.csv"),
                   trajectory_csv(meta, dense_samples(s.solution.grid, s.physical)));
      }
      return finish_report(cfg, "tracking", report_of("tracking", s.solution, s.physical.p[0]));
    }
    case ProblemKind::toy_lq: {
      const OcpProblem p = toy_lq();
      const CollocationGrid grid = cfg.grid();
      DiscreteTrajectory guess{Matrix::Ones(1, grid.num_state_points()),
                               Matrix::Zero(1, grid.num_nodes()), Vector(0), {}};
      const KktSolution s = solve_ocp(p, grid, guess, cfg.solver);
      if (s.converged()) {
        Matrix rows(kDenseSamples, 3);
        for (int k = 0; k < kDenseSamples; ++k) {
          const double t = static_cast<double>(k) / (kDenseSamples - 1);
          rows.row(k) << t, interpolate_states(grid, s.traj.x, t)[0],
              interpolate_controls(grid, s.traj.u, t)[0];
        }
        write_text(out_path(cfg, "toy_lq.csv"), format_csv(meta, "t,x,u", rows));
      }
      return finish_report(cfg, "toy_lq", report_of("toy-lq", s, 1.0));
    }
  }
  return 1;
}

void require_vehicle(const RunConfig& cfg, const char* command) {
  if (cfg.problem == ProblemKind::toy_lq) {
    throw ConfigError(std::string(command) + " runs on the vehicle problems; problem is toy-lq");
  }
}

StudyBase load_study(const RunConfig& cfg) {
  bool solved = false;
  const hs::Reference ref = obtain_reference(cfg, &solved);
  if (solved) fmt::print("solved and stored the max-downrange reference\n");
  return prepare_study(cfg, ref);
}

std::string deviation_csv(const Metadata& meta, const std::vector<EpsResult>& rows) {
  std::string s = format_csv(meta, "eps,series,x1,x2,v,gamma,alpha,q,delta", Matrix(0, 0));
  for (const EpsResult& r : rows) {
    const std::pair<const char*, Vector> series[] = {
        {"predicted-truth", deviation_norms(r.predicted_samples, r.truth_samples)},
        {"reference-truth", deviation_norms(r.reference_samples, r.truth_samples)}};
    for (const auto& [name, v] : series) {
      s += fmt::format("{},{}", r.eps, name);
      for (Eigen::Index i = 0; i < v.size(); ++i) s += fmt::format(",{:.17g}", v[i]);
      s += "\n";
    }
  }
  return s;
}

int cmd_sensitivity_predict(const RunConfig& cfg) {
  require_vehicle(cfg, "sensitivity-predict");
  const StudyBase st = load_study(cfg);
  const std::vector<EpsResult> rows = run_eps_sweep(st, cfg.eps);
  const Metadata meta = Metadata::from(cfg, "sensitivity-predict");
  write_text(out_path(cfg, "reference.csv"),
             trajectory_csv(meta, dense_samples(st.reference.grid, st.reference.traj)));
  for (const EpsResult& r : rows) {
    const std::string e = eps_label(r.eps);
    write_text(out_path(cfg, "predicted_eps_" + e + ".csv"), trajectory_csv(meta, r.predicted_samples));
    write_text(out_path(cfg, "truth_eps_" + e + ".csv"), trajectory_csv(meta, r.truth_samples));
  }
  write_text(out_path(cfg, "prediction_deviation.csv"), deviation_csv(meta, rows));
  fmt::print("{:>6} {:>15} {:>12} {:>12} {:>12}\n", "eps", "series", "x1 [km]", "x2 [km]",
             "delta [rad]");
  for (const EpsResult& r : rows) {
    const Vector p = deviation_norms(r.predicted_samples, r.truth_samples);
    const Vector q = deviation_norms(r.reference_samples, r.truth_samples);
    fmt::print("{:>6} {:>15} {:12.4e} {:12.4e} {:12.4e}\n", r.eps, "predicted-truth", p[0], p[1], p[6]);
    fmt::print("{:>6} {:>15} {:12.4e} {:12.4e} {:12.4e}\n", r.eps, "reference-truth", q[0], q[1], q[6]);
  }
  return 0;
}

int cmd_qoi_study(const RunConfig& cfg) {
  require_vehicle(cfg, "qoi-study");
  const StudyBase st = load_study(cfg);
  const std::vector<EpsResult> rows = run_eps_sweep(st, cfg.eps);
  const Metadata meta = Metadata::from(cfg, "qoi-study");
  write_text(out_path(cfg, "qoi_study.csv"),
             format_csv(meta, "eps,estimate,true_error,bound", study_table(rows), 1));
  fmt::print("{:>6} {:>14} {:>14} {:>14}\n", "eps", "estimate", "true_error", "bound");
  for (const EpsResult& r : rows) {
    fmt::print("{:>6} {:14.8f} {:14.8f} {:14.8f}\n", r.eps, r.estimate, r.true_error, r.bound);
  }
  return 0;
}

int cmd_check(const RunConfig& cfg, const CheckOptions& opt) {
  const std::vector<CheckLine> lines = run_checks(cfg, opt);
  int failed = 0;
  for (const CheckLine& l : lines) {
    fmt::print("{} {}: {}\n", l.pass ? "PASS" : "FAIL", l.name, l.detail);
    failed += l.pass ? 0 : 1;
  }
  fmt::print("{} of {} checks passed\n", lines.size() - failed, lines.size());
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal-control sensitivity study for a hypersonic glide vehicle"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the command
  Flags flags;
  app.add_option("--config", flags.config, "JSON run configuration");
  app.add_option("--out", flags.out, "output directory (overrides output_dir)");
  app.add_option("--eps", flags.eps, "comma-separated eps list (overrides eps)");
  app.add_option("--grid", flags.grid, "<intervals>x<nodes> (overrides grid)");
  app.add_option("--units", flags.units, "si or kgkms (overrides units)");

  CLI::App* solve_ref = app.add_subcommand("solve-reference", "solve the selected problem");
  CLI::App* predict =
      app.add_subcommand("sensitivity-predict", "reference, predicted and truth trajectories");
  CLI::App* study = app.add_subcommand("qoi-study", "QoI estimate, true error and bound per eps");
  CLI::App* check = app.add_subcommand("check", "derivative, duality and quadrature self-tests");
  CheckOptions check_opt;
  bool no_solves = false;
  check->add_flag("--inject-jacobian-defect", check_opt.inject_jacobian_defect,
                  "test hook: corrupt one dynamics Jacobian entry");
  check->add_flag("--no-solves", no_solves, "skip the checks that need NLP solves");

  CLI11_PARSE(app, argc, argv);
  check_opt.with_solves = !no_solves;

  try {
    const RunConfig cfg = effective_config(flags);
    if (solve_ref->parsed()) return cmd_solve_reference(cfg);
    if (predict->parsed()) return cmd_sensitivity_predict(cfg);
    if (study->parsed()) return cmd_qoi_study(cfg);
    if (check->parsed()) return cmd_check(cfg, check_opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ActiveBoundError& e) {
    std::cerr << "sensitivity assembly failed: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
