#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "ocpsens/core/linalg.hpp"

namespace ocpsens {

struct Inertia {
  int positive = 0;
  int negative = 0;
  int zero = 0;
};

/// The symmetric system has a zero pivot; `pivot` is its 0-based row.
class SingularSystemError : public std::runtime_error {
 public:
  SingularSystemError(const std::string& what, int pivot)
      : std::runtime_error(what + " (pivot " + std::to_string(pivot) + ")"),
        pivot_{pivot} {}
  int pivot() const { return pivot_; }

 private:
  int pivot_;
};

/// Bunch-Kaufman LDL^T of a symmetric (possibly indefinite) matrix.
///
/// Expects the full symmetric matrix; the lower triangle is factored.
/// Factoring never throws on singularity; check singular() or inertia().
/// solve() throws only when dsytrf hit an exactly zero pivot.
class SymmetricFactorization {
 public:
  SymmetricFactorization() = default;
  /// Pivots with magnitude at or below `zero_tolerance` count as zero; a
  /// negative value means 1e-15 * max(1, max |a_ij|).
  explicit SymmetricFactorization(const Matrix& a, double zero_tolerance = -1.0);
  explicit SymmetricFactorization(const SparseMatrix& a, double zero_tolerance = -1.0);

  int size() const { return static_cast<int>(lu_.rows()); }
  const Inertia& inertia() const { return inertia_; }
  bool singular() const { return zero_pivot_ >= 0; }
  int zero_pivot() const { return zero_pivot_; }

  /// One triangular solve pair, no refinement.
  Vector solve_raw(const Vector& b) const;
  /// Solve with iterative refinement against the original matrix.
  Vector solve(const Vector& b, int max_refinements = 5) const;

 private:
  void factor(double zero_tolerance);

  Matrix original_;
  Matrix lu_;
  std::vector<int> ipiv_;
  Inertia inertia_;
  int zero_pivot_ = -1;
  int breakdown_ = -1;  // exactly zero pivot from dsytrf
};

/// x with ||A x - b|| <= 1e-10 ||b||; throws SingularSystemError otherwise.
Vector solve_kkt_linear(const SparseMatrix& a, const Vector& b);

}  // namespace ocpsens
