#pragma once

#include <vector>

#include "ocpsens/sensitivity/lq.hpp"

namespace ocpsens {

/// Same layout as a sensitivity solution; dx(:, 0) = 0.
using AdjointSolution = SensitivitySolution;

/// The LQ problem with QoI-gradient linear terms and no dynamics forcing,
/// solved with the factorization already held by `lq`.
AdjointSolution solve_adjoint_system(const LqData& lq, const QoiFunctions& qoi);

/// QoI derivative in direction `pert` from the adjoint solution; costs two
/// sums over the nodes.
double qoi_directional_derivative(const LqData& lq, const AdjointSolution& adj,
                                  const PerturbationData& pert, const QoiFunctions& qoi);

/// |qoi_directional_derivative| for pert = samples of g_hat - g_true.
double qoi_error_estimate(const LqData& lq, const AdjointSolution& adj,
                          const PerturbationData& pert_truth, const QoiFunctions& qoi);

/// Pointwise bounds on |dg| and on |dg_y| entrywise, sampled at the nodes.
struct ErrorBands {
  std::vector<Vector> eps;    // n_g
  std::vector<Matrix> eps_y;  // n_g x n_y, columns (x, u, p)

  int size() const { return static_cast<int>(eps.size()); }
  /// Throws std::invalid_argument on negative or non-finite entries.
  void validate() const;
  ErrorBands scaled(double alpha) const;
};

/// Bands equal to the absolute values of the samples (the equality case).
ErrorBands equality_bands(const PerturbationData& pert);

/// Maximizer of the QoI derivative over the band box, with sgn(0) = +1.
struct WorstCase {
  PerturbationData delta;
  double objective = 0.0;
};

WorstCase lp_worst_case(const LqData& lq, const AdjointSolution& adj, const ErrorBands& bands,
                        const QoiFunctions& qoi);

/// Closed-form value of lp_worst_case: an upper bound on the estimate for
/// any perturbation inside the bands.
double qoi_error_bound(const LqData& lq, const AdjointSolution& adj, const ErrorBands& bands,
                       const QoiFunctions& qoi);

/// The per-node linear functional behind the three quantities above:
/// derivative = sum_j W_j (coef_g[j]^T dg_j + sum_kl coef_gy[j](k, l) dg_y[j](k, l)).
struct QoiFunctional {
  std::vector<double> weight;
  std::vector<Vector> coef_g;
  std::vector<Matrix> coef_gy;
};

QoiFunctional qoi_functional(const LqData& lq, const AdjointSolution& adj,
                             const QoiFunctions& qoi);

}  // namespace ocpsens
