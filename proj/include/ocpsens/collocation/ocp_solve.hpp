#pragma once

#include "ocpsens/collocation/transcription.hpp"
#include "ocpsens/nlp/interior_point.hpp"

namespace ocpsens {

/// Discrete OCP solution with the NLP multipliers it came with.
struct KktSolution {
  CollocationGrid grid{CollocationGrid::uniform(1, 1, 0.0, 1.0)};
  DiscreteTrajectory traj;  // lambda filled from the defect multipliers
  NlpSolution nlp;

  bool converged() const { return nlp.converged(); }
};

/// Transcribe, solve from `guess`, and recover the discrete costate.
KktSolution solve_ocp(const OcpProblem& problem, const CollocationGrid& grid,
                      const DiscreteTrajectory& guess, const SolverConfig& config = {});

/// Interpolate a discrete trajectory onto another grid over the same
/// horizon. The costate is dropped.
DiscreteTrajectory resample(const CollocationGrid& from, const DiscreteTrajectory& traj,
                            const CollocationGrid& to);

}  // namespace ocpsens
