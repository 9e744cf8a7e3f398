#include "ocpsens/collocation/ocp_solve.hpp"

namespace ocpsens {

KktSolution solve_ocp(const OcpProblem& problem, const CollocationGrid& grid,
                      const DiscreteTrajectory& guess, const SolverConfig& config) {
  const Transcription tr(problem, grid);
  NlpSolution sol = solve(tr.nlp(), tr.pack(guess), config);
  DiscreteTrajectory traj = tr.unpack(sol.x);
  traj.lambda = tr.costate(sol.multipliers);
  return KktSolution{grid, std::move(traj), std::move(sol)};
}

DiscreteTrajectory resample(const CollocationGrid& from, const DiscreteTrajectory& traj,
                            const CollocationGrid& to) {
  const Vector& ts = to.state_times();
  DiscreteTrajectory out;
  out.x.resize(traj.x.rows(), ts.size());
  out.u.resize(traj.u.rows(), to.num_nodes());
  for (Eigen::Index i = 0; i < ts.size(); ++i) {
    out.x.col(i) = interpolate_states(from, traj.x, ts[i]);
    if (i > 0) out.u.col(i - 1) = interpolate_controls(from, traj.u, ts[i]);
  }
  out.p = traj.p;
  return out;
}

}  // namespace ocpsens
