#include "ocpsens/collocation/lgr.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ocpsens {

namespace {

// Legendre P_{k-1}(x), P_k(x) by the three-term recurrence.
std::pair<double, double> legendre_pair(int k, double x) {
  double p_prev = 1.0;
  double p = x;
  if (k == 0) return {0.0, 1.0};
  for (int j = 2; j <= k; ++j) {
    const double p_next = ((2.0 * j - 1.0) * x * p - (j - 1.0) * p_prev) / j;
    p_prev = p;
    p = p_next;
  }
  return {p_prev, p};
}

// P_k'(x) for |x| < 1 from (1 - x^2) P_k' = k (P_{k-1} - x P_k).
double legendre_derivative(int k, double x) {
  if (k == 0) return 0.0;
  auto [pkm1, pk] = legendre_pair(k, x);
  return k * (pkm1 - x * pk) / (1.0 - x * x);
}

}  // namespace

RadauRule lgr_nodes(int n) {
  if (n < 1) throw std::invalid_argument("lgr_nodes requires n >= 1");

  // Classical Radau points on [-1, 1): x_0 = -1 and the roots of
  // P_{n-1} + P_n in (-1, 1). Newton from Chebyshev-Gauss-Radau guesses.
  Vector x(n);
  x[0] = -1.0;
  for (int i = 1; i < n; ++i) {
    double xi = -std::cos(2.0 * std::numbers::pi * i / (2.0 * n - 1.0));
    for (int it = 0; it < 100; ++it) {
      auto [pnm1, pn] = legendre_pair(n, xi);
      const double f = pnm1 + pn;
      const double df = legendre_derivative(n - 1, xi) + legendre_derivative(n, xi);
      const double step = f / df;
      xi -= step;
      if (std::abs(step) < 1e-16) break;
    }
    x[i] = xi;
  }

  Vector w(n);
  w[0] = 2.0 / (static_cast<double>(n) * n);
  for (int i = 1; i < n; ++i) {
    const double pnm1 = legendre_pair(n - 1, x[i]).second;
    w[i] = (1.0 - x[i]) / (static_cast<double>(n) * n * pnm1 * pnm1);
  }

  RadauRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = -x[n - 1 - i];
    rule.weights[i] = w[n - 1 - i];
  }
  rule.nodes[n - 1] = 1.0;
  return rule;
}

Vector barycentric_weights(const Vector& support) {
  const auto m = support.size();
  Vector b = Vector::Ones(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index k = 0; k < m; ++k) {
      if (k == j) continue;
      const double diff = support[j] - support[k];
      if (diff == 0.0) {
        throw std::invalid_argument("duplicate interpolation support points");
      }
      b[j] /= diff;
    }
  }
  return b;
}

Matrix differentiation_matrix(const Vector& support) {
  const Vector b = barycentric_weights(support);
  const auto m = support.size();
  Matrix d = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    double row_sum = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == j) continue;
      d(i, j) = (b[j] / b[i]) / (support[i] - support[j]);
      row_sum += d(i, j);
    }
    d(i, i) = -row_sum;
  }
  return d;
}

Vector barycentric_interpolate(const Vector& support, const Vector& bary_weights,
                               const Matrix& values, double t) {
  Vector num = Vector::Zero(values.rows());
  double den = 0.0;
  for (Eigen::Index j = 0; j < support.size(); ++j) {
    const double diff = t - support[j];
    if (diff == 0.0) return values.col(j);
    const double c = bary_weights[j] / diff;
    num += c * values.col(j);
    den += c;
  }
  return num / den;
}

}  // namespace ocpsens
