#include "ocpsens/adjoint/qoi.hpp"

#include <cmath>
#include <stdexcept>

#include "ocpsens/core/errors.hpp"

namespace ocpsens {

AdjointSolution solve_adjoint_system(const LqData& lq, const QoiFunctions& qoi) {
  const QoiGradients q = qoi_gradients(lq, qoi);
  const Dims& dm = lq.dims();
  const int n = lq.num_nodes();
  // kkt * s = -(gradient of the discrete QoI, 0).
  Vector rhs = Vector::Zero(lq.kkt().rows());
  for (int j = 0; j < n; ++j) {
    const Vector c = lq.samples()[j].weight * q.l_y[j];
    for (int a = 0; a < dm.n_x; ++a) rhs[lq.x_col(j + 1, a)] -= c[a];
    for (int a = 0; a < dm.n_u; ++a) rhs[lq.u_col(j, a)] -= c[dm.n_x + a];
    for (int a = 0; a < dm.n_p; ++a) rhs[lq.p_col(a)] -= c[dm.n_x + dm.n_u + a];
  }
  for (int a = 0; a < dm.n_x; ++a) rhs[lq.x_col(n, a)] -= q.phi_x[a];
  for (int a = 0; a < dm.n_p; ++a) rhs[lq.p_col(a)] -= q.phi_p[a];
  if (rhs.norm() == 0.0) {
    AdjointSolution zero = unpack_lq_solution(lq, Vector::Zero(rhs.size()));
    return zero;
  }
  const Vector sol = lq.solve(rhs);
  AdjointSolution out = unpack_lq_solution(lq, sol);
  out.residual = (lq.kkt() * sol - rhs).norm() / rhs.norm();
  return out;
}

QoiFunctional qoi_functional(const LqData& lq, const AdjointSolution& adj,
                             const QoiFunctions& qoi) {
  const QoiGradients q = qoi_gradients(lq, qoi);
  QoiFunctional fn;
  for (int j = 0; j < lq.num_nodes(); ++j) {
    const LqSample& s = lq.samples()[j];
    const Vector dy = pack_y(adj.dx.col(j + 1), adj.du.col(j), adj.dp);
    fn.weight.push_back(s.weight);
    fn.coef_g.push_back(s.h_yg.transpose() * dy + s.f_g.transpose() * adj.dlambda.col(j) +
                        q.l_g[j]);
    // d^T dg_y dy = sum_kl d_k dy_l dg_y(k, l)
    fn.coef_gy.push_back(s.d * dy.transpose());
  }
  return fn;
}

namespace {

void check_sizes(const LqData& lq, int samples) {
  if (samples != lq.num_nodes()) throw DimensionError("samples do not match the LQ grid");
}

}  // namespace

double qoi_directional_derivative(const LqData& lq, const AdjointSolution& adj,
                                  const PerturbationData& pert, const QoiFunctions& qoi) {
  check_sizes(lq, pert.size());
  const QoiFunctional fn = qoi_functional(lq, adj, qoi);
  double total = 0.0;
  for (int j = 0; j < pert.size(); ++j) {
    total += fn.weight[j] *
             (fn.coef_g[j].dot(pert.dg[j]) + fn.coef_gy[j].cwiseProduct(pert.dg_y[j]).sum());
  }
  return total;
}

double qoi_error_estimate(const LqData& lq, const AdjointSolution& adj,
                          const PerturbationData& pert_truth, const QoiFunctions& qoi) {
  return std::abs(qoi_directional_derivative(lq, adj, pert_truth, qoi));
}

void ErrorBands::validate() const {
  if (eps.size() != eps_y.size()) throw std::invalid_argument("band sample counts differ");
  for (std::size_t j = 0; j < eps.size(); ++j) {
    if (!eps[j].allFinite() || !eps_y[j].allFinite() || (eps[j].array() < 0.0).any() ||
        (eps_y[j].array() < 0.0).any()) {
      throw std::invalid_argument("error bands must be finite and nonnegative (node " +
                                  std::to_string(j) + ")");
    }
  }
}

ErrorBands ErrorBands::scaled(double alpha) const {
  ErrorBands b = *this;
  for (Vector& v : b.eps) v *= alpha;
  for (Matrix& m : b.eps_y) m *= alpha;
  return b;
}

ErrorBands equality_bands(const PerturbationData& pert) {
  ErrorBands b;
  for (const Vector& v : pert.dg) b.eps.push_back(v.cwiseAbs());
  for (const Matrix& m : pert.dg_y) b.eps_y.push_back(m.cwiseAbs());
  return b;
}

WorstCase lp_worst_case(const LqData& lq, const AdjointSolution& adj, const ErrorBands& bands,
                        const QoiFunctions& qoi) {
  bands.validate();
  check_sizes(lq, bands.size());
  const QoiFunctional fn = qoi_functional(lq, adj, qoi);
  auto sgn = [](double v) { return v < 0.0 ? -1.0 : 1.0; };
  WorstCase wc;
  for (int j = 0; j < bands.size(); ++j) {
    if (bands.eps[j].size() != fn.coef_g[j].size() ||
        bands.eps_y[j].rows() != fn.coef_gy[j].rows() ||
        bands.eps_y[j].cols() != fn.coef_gy[j].cols()) {
      throw DimensionError("band sample has the wrong shape");
    }
    wc.delta.dg.push_back(fn.coef_g[j].unaryExpr(sgn).cwiseProduct(bands.eps[j]));
    wc.delta.dg_y.push_back(fn.coef_gy[j].unaryExpr(sgn).cwiseProduct(bands.eps_y[j]));
    wc.objective += fn.weight[j] * (fn.coef_g[j].cwiseAbs().dot(bands.eps[j]) +
                                    fn.coef_gy[j].cwiseAbs().cwiseProduct(bands.eps_y[j]).sum());
  }
  return wc;
}

double qoi_error_bound(const LqData& lq, const AdjointSolution& adj, const ErrorBands& bands,
                       const QoiFunctions& qoi) {
  return lp_worst_case(lq, adj, bands, qoi).objective;
}

}  // namespace ocpsens
