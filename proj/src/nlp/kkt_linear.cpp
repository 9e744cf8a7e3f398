#include "ocpsens/nlp/kkt_linear.hpp"

#include <lapacke.h>

#include <cmath>

namespace ocpsens {

SymmetricFactorization::SymmetricFactorization(const Matrix& a, double zero_tolerance)
    : original_{a} {
  factor(zero_tolerance);
}

SymmetricFactorization::SymmetricFactorization(const SparseMatrix& a, double zero_tolerance)
    : original_{Matrix(a)} {
  factor(zero_tolerance);
}

void SymmetricFactorization::factor(double zero_tolerance) {
  if (original_.rows() != original_.cols()) {
    throw std::invalid_argument("symmetric factorization needs a square matrix");
  }
  const int n = static_cast<int>(original_.rows());
  lu_ = original_;
  ipiv_.assign(n, 0);
  inertia_ = {};
  zero_pivot_ = -1;
  breakdown_ = -1;
  if (n == 0) return;

  const lapack_int info = LAPACKE_dsytrf(LAPACK_COL_MAJOR, 'L', n, lu_.data(), n,
                                         ipiv_.data());
  if (info < 0) throw std::runtime_error("dsytrf: invalid argument");

  const double tiny =
      zero_tolerance >= 0.0
          ? zero_tolerance
          : 1e-300 + 1e-15 * std::max(1.0, original_.cwiseAbs().maxCoeff());
  auto classify = [&](double e, int row) {
    if (std::abs(e) <= tiny) {
      ++inertia_.zero;
      if (zero_pivot_ < 0) zero_pivot_ = row;
    } else if (e > 0) {
      ++inertia_.positive;
    } else {
      ++inertia_.negative;
    }
  };
  for (int i = 0; i < n; ++i) {
    if (ipiv_[i] > 0) {
      classify(lu_(i, i), i);
    } else {
      // 2x2 block on rows i, i+1
      const double a = lu_(i, i);
      const double b = lu_(i + 1, i);
      const double c = lu_(i + 1, i + 1);
      const double mean = 0.5 * (a + c);
      const double rad = std::hypot(0.5 * (a - c), b);
      classify(mean + rad, i);
      classify(mean - rad, i + 1);
      ++i;
    }
  }
  if (info > 0) {
    breakdown_ = static_cast<int>(info) - 1;
    if (zero_pivot_ < 0) zero_pivot_ = breakdown_;
  }
}

Vector SymmetricFactorization::solve_raw(const Vector& b) const {
  if (breakdown_ >= 0) throw SingularSystemError("singular symmetric system", breakdown_);
  if (b.size() != size()) throw std::invalid_argument("right-hand side size mismatch");
  Vector x = b;
  const int n = size();
  if (n == 0) return x;
  const lapack_int info = LAPACKE_dsytrs(LAPACK_COL_MAJOR, 'L', n, 1, lu_.data(), n,
                                         ipiv_.data(), x.data(), n);
  if (info != 0) throw std::runtime_error("dsytrs failed");
  return x;
}

Vector SymmetricFactorization::solve(const Vector& b, int max_refinements) const {
  Vector x = solve_raw(b);
  const double bnorm = b.norm();
  if (bnorm == 0.0) return x;
  for (int it = 0; it < max_refinements; ++it) {
    const Vector r = b - original_.selfadjointView<Eigen::Lower>() * x;
    if (r.norm() <= 1e-14 * bnorm) break;
    x += solve_raw(r);
  }
  return x;
}

Vector solve_kkt_linear(const SparseMatrix& a, const Vector& b) {
  SymmetricFactorization f(a);
  if (f.singular()) {
    throw SingularSystemError("structurally singular KKT system", f.zero_pivot());
  }
  const Vector x = f.solve(b);
  const double bnorm = b.norm();
  const double rnorm = (a * x - b).norm();
  if (rnorm > 1e-10 * std::max(bnorm, 1e-300) && rnorm > 0.0) {
    throw SingularSystemError("KKT solve did not reach the residual tolerance",
                              f.zero_pivot() < 0 ? 0 : f.zero_pivot());
  }
  return x;
}

}  // namespace ocpsens
