#include "ocpsens/core/derivative_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ocpsens {

namespace {

// Remainders below this fraction of the function scale are round-off.
constexpr double kRoundoffFloor = 1e-13;

}  // namespace

bool TaylorReport::passes(double target, double rel_tol) const {
  for (const auto& seq : directions) {
    if (std::find(seq.finite.begin(), seq.finite.end(), false) != seq.finite.end()) {
      return false;
    }
    if (seq.exact) continue;
    for (double r : seq.ratios) {
      if (!(std::abs(r / target - 1.0) <= rel_tol)) return false;
    }
  }
  return true;
}

double TaylorReport::worst_deviation(double target) const {
  double worst = 0.0;
  for (const auto& seq : directions) {
    if (seq.exact) continue;
    for (double r : seq.ratios) {
      double dev = std::abs(r / target - 1.0);
      if (!std::isfinite(dev)) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, dev);
    }
  }
  return worst;
}

TaylorReport check_derivatives(const VectorFunction& fn,
                               const JacobianFunction& jacobian,
                               const Vector& point,
                               const std::vector<Vector>& directions,
                               const std::vector<double>& steps) {
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!(steps[i] > 0.0) || (i > 0 && !(steps[i] < steps[i - 1]))) {
      throw std::invalid_argument("steps must be positive and decreasing");
    }
  }
  const Vector f0 = fn(point);
  const Matrix j0 = jacobian(point);
  const double scale = std::max(1.0, f0.cwiseAbs().maxCoeff());

  TaylorReport report;
  for (const auto& d : directions) {
    TaylorSequence seq;
    seq.steps = steps;
    const Vector jd = j0 * d;
    for (double h : steps) {
      const Vector fh = fn(point + h * d);
      const bool ok = fh.allFinite();
      seq.finite.push_back(ok);
      seq.remainders.push_back(
          ok ? (fh - f0 - h * jd).cwiseAbs().maxCoeff()
             : std::numeric_limits<double>::quiet_NaN());
    }
    seq.exact = std::all_of(seq.remainders.begin(), seq.remainders.end(),
                            [&](double r) { return r <= kRoundoffFloor * scale; });
    for (std::size_t k = 0; k + 1 < seq.remainders.size(); ++k) {
      seq.ratios.push_back(seq.remainders[k] / seq.remainders[k + 1]);
    }
    report.directions.push_back(std::move(seq));
  }
  return report;
}

JacobianComparison compare_jacobian_fd(const VectorFunction& fn,
                                       const JacobianFunction& jacobian,
                                       const Vector& point, double step,
                                       double tolerance) {
  const Matrix claimed = jacobian(point);
  JacobianComparison out;
  out.finite_difference.resize(claimed.rows(), claimed.cols());
  Vector z = point;
  for (Eigen::Index j = 0; j < point.size(); ++j) {
    z[j] = point[j] + step;
    const Vector fp = fn(z);
    z[j] = point[j] - step;
    const Vector fm = fn(z);
    z[j] = point[j];
    out.finite_difference.col(j) = (fp - fm) / (2.0 * step);
  }
  for (Eigen::Index j = 0; j < claimed.cols(); ++j) {
    for (Eigen::Index i = 0; i < claimed.rows(); ++i) {
      const double dev = std::abs(claimed(i, j) - out.finite_difference(i, j));
      out.max_abs_deviation = std::max(out.max_abs_deviation, dev);
      if (!(dev <= tolerance)) {
        out.flagged.push_back({static_cast<int>(i), static_cast<int>(j),
                               claimed(i, j), out.finite_difference(i, j)});
      }
    }
  }
  return out;
}

double max_asymmetry(const Matrix& h) {
  return (h - h.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace ocpsens
