#include "ocpsens/app/experiments.hpp"

#include <filesystem>
#include <fstream>
#include <future>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace ocpsens::app {

namespace hs = hypersonic;
using nlohmann::json;

Matrix dense_samples(const CollocationGrid& grid, const DiscreteTrajectory& physical) {
  const VariableScaling km = hs::unit_scaling_factors(hs::UnitScheme::kgkms);
  const double duration = physical.p[0];
  Matrix out(kDenseSamples, 1 + hs::kNx + hs::kNu);
  for (int k = 0; k < kDenseSamples; ++k) {
    const double tau = static_cast<double>(k) / (kDenseSamples - 1);
    const Vector x = interpolate_states(grid, physical.x, tau).cwiseQuotient(km.x);
    const Vector u = interpolate_controls(grid, physical.u, tau);
    out(k, 0) = duration * tau;
    out.row(k).segment(1, hs::kNx) = x.transpose();
    out.row(k).tail(hs::kNu) = u.transpose();
  }
  return out;
}

Vector deviation_norms(const Matrix& a, const Matrix& b) {
  return (a - b).rightCols(a.cols() - 1).cwiseAbs().colwise().maxCoeff().transpose();
}

Metadata Metadata::from(const RunConfig& cfg, const std::string& command) {
  Metadata m;
  m.command = command;
  m.config_hash = app::config_hash(cfg);
  m.grid = cfg.grid_label();
  m.units = hs::to_string(cfg.units);
  m.kkt_tolerance = cfg.solver.kkt_tolerance;
  m.max_iterations = cfg.solver.max_iterations;
  return m;
}

namespace {

json metadata_json(const Metadata& m) {
  return json{{"command", m.command},          {"config_hash", m.config_hash},
              {"grid", m.grid},                {"units", m.units},
              {"kkt_tolerance", m.kkt_tolerance}, {"max_iterations", m.max_iterations}};
}

}  // namespace

std::string format_csv(const Metadata& meta, const std::string& header, const Matrix& rows,
                       int shortest_columns) {
  std::string s;
  s += fmt::format("# command: {}\n", meta.command);
  s += fmt::format("# config_hash: {}\n", meta.config_hash);
  s += fmt::format("# grid: {}\n", meta.grid);
  s += fmt::format("# solve_units: {}\n", meta.units);
  s += fmt::format("# kkt_tolerance: {:.17g}\n", meta.kkt_tolerance);
  s += fmt::format("# max_iterations: {}\n", meta.max_iterations);
  s += header + "\n";
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      if (j > 0) s += ',';
      s += j < shortest_columns ? fmt::format("{}", rows(i, j)) : fmt::format("{:.17g}", rows(i, j));
    }
    s += "\n";
  }
  return s;
}

std::string trajectory_csv(const Metadata& meta, const Matrix& samples) {
  return format_csv(meta, "t,x1,x2,v,gamma,alpha,q,delta", samples);
}

void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
}

void write_reference(const std::string& path, const hs::Reference& ref, const Metadata& meta) {
  json j;
  j["metadata"] = metadata_json(meta);
  j["mesh"] = ref.grid.mesh();
  j["nodes"] = ref.grid.nodes_per_interval();
  auto rows = [](const Matrix& m) {
    std::vector<std::vector<double>> out(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index k = 0; k < m.cols(); ++k) out[i].push_back(m(i, k));
    }
    return out;
  };
  j["x"] = rows(ref.traj.x);
  j["u"] = rows(ref.traj.u);
  j["p"] = std::vector<double>(ref.traj.p.data(), ref.traj.p.data() + ref.traj.p.size());
  write_text(path, j.dump(1) + "\n");
}

hs::Reference read_reference(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read reference '" + path + "'");
  try {
    const json j = json::parse(in);
    const auto mesh = j.at("mesh").get<std::vector<double>>();
    const int nodes = j.at("nodes").get<int>();
    CollocationGrid grid(mesh, nodes, 0.0, 1.0);
    auto matrix = [](const json& a, int rows, int cols) {
      const auto v = a.get<std::vector<std::vector<double>>>();
      if (static_cast<int>(v.size()) != rows) throw ConfigError("reference row count");
      Matrix m(rows, cols);
      for (int i = 0; i < rows; ++i) {
        if (static_cast<int>(v[i].size()) != cols) throw ConfigError("reference column count");
        for (int k = 0; k < cols; ++k) m(i, k) = v[i][k];
      }
      return m;
    };
    DiscreteTrajectory tr;
    tr.x = matrix(j.at("x"), hs::kNx, grid.num_state_points());
    tr.u = matrix(j.at("u"), hs::kNu, grid.num_nodes());
    const auto p = j.at("p").get<std::vector<double>>();
    if (p.size() != static_cast<std::size_t>(hs::kNp)) throw ConfigError("reference p size");
    tr.p = Eigen::Map<const Vector>(p.data(), hs::kNp);
    return hs::Reference{grid, tr};
  } catch (const json::exception& e) {
    throw ConfigError("malformed reference '" + path + "': " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("malformed reference '" + path + "': " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError("malformed reference '" + path + "': " + e.what());
  }
}

std::string report_json(const Metadata& meta, const SolveReport& r) {
  json j{{"metadata", metadata_json(meta)},
         {"problem", r.problem},
         {"status", r.status},
         {"objective", r.objective},
         {"kkt_residual", r.kkt_residual},
         {"iterations", r.iterations},
         {"duration_T", r.duration_T},
         {"grid", meta.grid},
         {"config_hash", meta.config_hash}};
  return j.dump(1) + "\n";
}

hs::Reference obtain_reference(const RunConfig& cfg, bool* solved) {
  const std::string path = (std::filesystem::path(cfg.output_dir) / "reference.json").string();
  if (std::filesystem::exists(path)) {
    hs::Reference ref = read_reference(path);
    if (!ref.grid.same_layout(cfg.grid())) {
      throw ConfigError("reference '" + path + "' was solved on another grid than " +
                        cfg.grid_label());
    }
    if (solved) *solved = false;
    return ref;
  }
  const hs::VehicleSolve s = hs::solve_max_downrange(
      hs::VehicleParams{}, hs::AeroModel::surrogate(), cfg.grid(), cfg.units, cfg.solver);
  if (!s.solution.converged()) {
    throw std::runtime_error("max-downrange solve failed: " + to_string(s.solution.nlp.status));
  }
  hs::Reference ref = hs::as_reference(s);
  write_reference(path, ref, Metadata::from(cfg, "solve-reference"));
  if (solved) *solved = true;
  return ref;
}

StudyBase prepare_study(const RunConfig& cfg, const hs::Reference& reference) {
  StudyBase st;
  st.cfg = cfg;
  st.reference = reference;
  st.base = hs::solve_tracking(st.vp, hs::AeroModel::surrogate(), reference, cfg.units, cfg.solver);
  if (!st.base.solution.converged()) {
    throw std::runtime_error("surrogate tracking solve failed: " +
                             to_string(st.base.solution.nlp.status));
  }
  st.lq = assemble_lq_data(st.base.scaled.problem, st.base.solution);
  st.qoi = scale_qoi(hs::downrange_qoi(), st.base.scaled.problem.dims, st.base.scaled.scaling, 1.0);
  st.adjoint = solve_adjoint_system(st.lq, st.qoi);
  st.base_qoi = st.base.physical.x(0, st.base.physical.x.cols() - 1) * 1e-3;
  return st;
}

namespace {

EpsResult one_eps(const StudyBase& st, double eps) {
  EpsResult r;
  r.eps = eps;
  r.truth = hs::solve_tracking(st.vp, hs::AeroModel::truth_model(eps), st.reference,
                               st.cfg.units, st.cfg.solver);
  if (!r.truth.solution.converged()) {
    throw std::runtime_error(fmt::format("truth tracking solve at eps = {} failed: {}", eps,
                                         to_string(r.truth.solution.nlp.status)));
  }
  r.pert = perturbation_between(r.truth.scaled.problem.g, st.base.scaled.problem.g, st.lq);
  r.dz = solve_sensitivity(st.lq, r.pert);
  r.estimate = qoi_error_estimate(st.lq, st.adjoint, r.pert, st.qoi);
  r.forward = forward_qoi_derivative(st.lq, r.dz, r.pert, st.qoi);
  r.bound = qoi_error_bound(st.lq, st.adjoint, equality_bands(r.pert), st.qoi);
  const double q_truth = r.truth.physical.x(0, r.truth.physical.x.cols() - 1) * 1e-3;
  r.true_error = std::abs(q_truth - st.base_qoi);

  const DiscreteTrajectory& z = st.base.solution.traj;
  r.predicted = st.base.scaled.to_physical(
      DiscreteTrajectory{z.x + r.dz.dx, z.u + r.dz.du, z.p + r.dz.dp, {}});
  const CollocationGrid& grid = st.reference.grid;
  r.reference_samples = dense_samples(grid, st.reference.traj);
  r.predicted_samples = dense_samples(grid, r.predicted);
  r.truth_samples = dense_samples(grid, r.truth.physical);
  return r;
}

}  // namespace

std::vector<EpsResult> run_eps_sweep(const StudyBase& study, const std::vector<double>& eps) {
  std::vector<std::future<EpsResult>> jobs;
  jobs.reserve(eps.size());
  for (double e : eps) {
    jobs.push_back(std::async(std::launch::async, [&study, e] { return one_eps(study, e); }));
  }
  std::vector<EpsResult> out;
  out.reserve(eps.size());
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

Matrix study_table(const std::vector<EpsResult>& rows) {
  Matrix t(static_cast<Eigen::Index>(rows.size()), 4);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    t.row(i) << rows[i].eps, rows[i].estimate, rows[i].true_error, rows[i].bound;
  }
  return t;
}

std::string eps_label(double eps) { return fmt::format("{}", eps); }

TaylorStudy sensitivity_taylor(const StudyBase& st, double eps, const std::vector<double>& steps) {
  // dg = g_hat - g_true(eps) scales the three coefficients by (-eps, +eps,
  // -eps), so g_hat + h dg is the truth model with parameter -h eps.
  const hs::ScaledProblem truth = hs::unit_scaling(
      hs::build_tracking(st.vp, hs::AeroModel::truth_model(eps), st.reference), st.cfg.units);
  const PerturbationData dg = perturbation_between(st.base.scaled.problem.g, truth.problem.g, st.lq);
  const SensitivitySolution dz = solve_sensitivity(st.lq, dg);
  const DiscreteTrajectory& z0 = st.base.solution.traj;

  TaylorStudy out;
  out.steps = steps;
  std::vector<std::future<hs::VehicleSolve>> jobs;
  for (double h : steps) {
    jobs.push_back(std::async(std::launch::async, [&st, h, eps] {
      return hs::solve_tracking(st.vp, hs::AeroModel::truth_model(-h * eps), st.reference,
                                st.cfg.units, st.cfg.solver);
    }));
  }
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const hs::VehicleSolve s = jobs[k].get();
    const DiscreteTrajectory& z = s.solution.traj;
    const double h = steps[k];
    out.remainders.push_back(std::max({(z.x - z0.x - h * dz.dx).cwiseAbs().maxCoeff(),
                                       (z.u - z0.u - h * dz.du).cwiseAbs().maxCoeff(),
                                       (z.p - z0.p - h * dz.dp).cwiseAbs().maxCoeff()}));
    out.statuses.push_back(to_string(s.solution.nlp.status));
    if (k > 0) out.ratios.push_back(out.remainders[k - 1] / out.remainders[k]);
  }
  return out;
}

PerturbationData random_perturbation(const LqData& lq, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const Dims& d = lq.dims();
  const int ny = d.n_x + d.n_u + d.n_p;
  PerturbationData p;
  for (int j = 0; j < lq.num_nodes(); ++j) {
    Vector g(d.n_g);
    for (int k = 0; k < d.n_g; ++k) g[k] = uni(rng);
    Matrix gy(d.n_g, ny);
    for (int k = 0; k < d.n_g; ++k) {
      for (int l = 0; l < ny; ++l) gy(k, l) = uni(rng);
    }
    p.dg.push_back(g);
    p.dg_y.push_back(gy);
  }
  return p;
}

}  // namespace ocpsens::app
