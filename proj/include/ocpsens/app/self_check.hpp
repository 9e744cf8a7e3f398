#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ocpsens/app/config.hpp"

namespace ocpsens::app {

/// Max |quadrature - exact| over monomials s^k, k <= 2n - 2, on [-1, 1].
struct QuadratureRow {
  int n = 0;
  double max_error = 0.0;
};
std::vector<QuadratureRow> quadrature_exactness(int n_min = 2, int n_max = 8);

/// Max derivative error of the differentiation matrix on {-1} U Radau nodes
/// over monomials of degree <= n - 1, at every support point.
std::vector<QuadratureRow> differentiation_exactness(int n_min = 2, int n_max = 8);

/// |x(1) - e| for x' = x, x(0) = 1 transcribed on `intervals` x `nodes`.
double exponential_error(int intervals, int nodes, const SolverConfig& solver = {});

struct CheckLine {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct CheckOptions {
  /// Test hook: corrupts one entry of the vehicle dynamics Jacobian.
  bool inject_jacobian_defect = false;
  /// Also run the hypersonic duality check (needs two NLP solves).
  bool with_solves = true;
};

/// Quadrature, differentiation, transcription, derivative and duality
/// checks. Never throws for a failed invariant; exceptions become failed
/// lines.
std::vector<CheckLine> run_checks(const RunConfig& cfg, const CheckOptions& opt);

}  // namespace ocpsens::app
