#include "ocpsens/nlp/interior_point.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ocpsens/core/errors.hpp"
#include "ocpsens/nlp/kkt_linear.hpp"

namespace ocpsens {

void SolverConfig::validate() const {
  auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!(kkt_tolerance > 0.0) || max_iterations < 0 || !(mu_initial > 0.0) ||
      !in_unit(mu_linear_factor) || !(mu_superlinear_power > 1.0) ||
      !(barrier_tolerance_factor > 0.0) || !in_unit(backtracking_factor) ||
      !in_unit(sufficient_decrease) || max_backtracks < 1 ||
      !(regularization_floor > 0.0) || !(regularization_max > regularization_floor) || !(regularization_growth > 1.0) ||
      !(bound_push > 0.0) || !in_unit(fraction_to_boundary_min)) {
    throw std::invalid_argument("solver configuration out of range");
  }
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::line_search_failure: return "line_search_failure";
    case SolveStatus::singular_kkt: return "singular_kkt";
  }
  return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kKappaSigma = 1e10;
constexpr double kZeroEigenRegularization = 1e-8;
constexpr double kMaxInitialMultiplier = 1e3;
constexpr double kMaxGradient = 100.0;
constexpr double kSoftStepThreshold = 1e-4;
constexpr double kSoftReduction = 0.9999;

struct Residuals {
  double stationarity = 0.0;
  double infeasibility = 0.0;
  double complementarity = 0.0;  // measured against the target mu
  double max() const {
    return std::max({stationarity, infeasibility, complementarity});
  }
};

class InteriorPoint {
 public:
  InteriorPoint(const Nlp& nlp, const SolverConfig& cfg)
      : nlp_{nlp}, cfg_{cfg}, n_{nlp.num_variables}, m_{nlp.num_constraints} {
    if (nlp.lower.size() != n_ || nlp.upper.size() != n_) {
      throw DimensionError("bound vectors do not match the variable count");
    }
    has_lo_.resize(n_);
    has_up_.resize(n_);
    for (int i = 0; i < n_; ++i) {
      has_lo_[i] = std::isfinite(nlp.lower[i]);
      has_up_[i] = std::isfinite(nlp.upper[i]);
      if (has_lo_[i] && has_up_[i] && !(nlp.lower[i] < nlp.upper[i])) {
        throw std::invalid_argument("variable bounds must satisfy lower < upper");
      }
    }
  }

  NlpSolution run(const Vector& x_init);

 private:
  Vector push_into_bounds(const Vector& x0) const;
  void slacks(const Vector& x, Vector& s_lo, Vector& s_up) const;
  double barrier(const Vector& x) const;
  /// Residuals of the scaled problem, or of the original one when
  /// `unscaled` is set (those decide convergence).
  Residuals residuals(double mu, bool unscaled) const;
  void compute_scaling();
  bool evaluate_trial(const Vector& x, double& f, Vector& c) const;
  Matrix kkt_matrix(const SparseMatrix& w, const Vector& sigma, double delta_w,
                    double delta_c) const;
  void initial_multipliers();
  void refresh();  // f, grad, c, J at x_

  const Nlp& nlp_;
  const SolverConfig& cfg_;
  int n_, m_;
  std::vector<bool> has_lo_, has_up_;

  Vector x_, nu_, z_lo_, z_up_;
  // Internally f and c are replaced by obj_scale_ * f and con_scale_ .* c.
  double obj_scale_ = 1.0;
  Vector con_scale_;
  double f_ = 0.0;
  Vector grad_, c_;
  SparseMatrix jac_;
  double mu_ = 0.0;
  double rho_ = 0.0;
  double last_delta_w_ = 0.0;
};

Vector InteriorPoint::push_into_bounds(const Vector& x0) const {
  Vector x = x0;
  const Vector& l = nlp_.lower;
  const Vector& u = nlp_.upper;
  const double k = cfg_.bound_push;
  for (int i = 0; i < n_; ++i) {
    if (has_lo_[i] && has_up_[i]) {
      const double pl = std::min(k * std::max(1.0, std::abs(l[i])), k * (u[i] - l[i]));
      const double pu = std::min(k * std::max(1.0, std::abs(u[i])), k * (u[i] - l[i]));
      x[i] = std::clamp(x[i], l[i] + pl, u[i] - pu);
    } else if (has_lo_[i]) {
      x[i] = std::max(x[i], l[i] + k * std::max(1.0, std::abs(l[i])));
    } else if (has_up_[i]) {
      x[i] = std::min(x[i], u[i] - k * std::max(1.0, std::abs(u[i])));
    }
  }
  return x;
}

void InteriorPoint::slacks(const Vector& x, Vector& s_lo, Vector& s_up) const {
  s_lo = Vector::Ones(n_);
  s_up = Vector::Ones(n_);
  for (int i = 0; i < n_; ++i) {
    if (has_lo_[i]) s_lo[i] = x[i] - nlp_.lower[i];
    if (has_up_[i]) s_up[i] = nlp_.upper[i] - x[i];
  }
}

double InteriorPoint::barrier(const Vector& x) const {
  double b = 0.0;
  for (int i = 0; i < n_; ++i) {
    if (has_lo_[i]) {
      const double s = x[i] - nlp_.lower[i];
      if (!(s > 0.0)) return kInf;
      b -= std::log(s);
    }
    if (has_up_[i]) {
      const double s = nlp_.upper[i] - x[i];
      if (!(s > 0.0)) return kInf;
      b -= std::log(s);
    }
  }
  return mu_ * b;
}

Residuals InteriorPoint::residuals(double mu, bool unscaled) const {
  Residuals r;
  Vector stat = grad_ - z_lo_ + z_up_;
  if (m_ > 0) stat += jac_.transpose() * nu_;
  const double fs = unscaled ? obj_scale_ : 1.0;
  r.stationarity = stat.lpNorm<Eigen::Infinity>() / fs;
  if (m_ > 0) {
    r.infeasibility = unscaled ? c_.cwiseQuotient(con_scale_).lpNorm<Eigen::Infinity>()
                               : c_.lpNorm<Eigen::Infinity>();
  }
  for (int i = 0; i < n_; ++i) {
    if (has_lo_[i]) {
      r.complementarity = std::max(
          r.complementarity, std::abs(z_lo_[i] * (x_[i] - nlp_.lower[i]) - mu));
    }
    if (has_up_[i]) {
      r.complementarity = std::max(
          r.complementarity, std::abs(z_up_[i] * (nlp_.upper[i] - x_[i]) - mu));
    }
  }
  r.complementarity /= fs;
  return r;
}

bool InteriorPoint::evaluate_trial(const Vector& x, double& f, Vector& c) const {
  try {
    f = obj_scale_ * nlp_.objective(x);
    c = con_scale_.cwiseProduct(nlp_.constraints(x));
  } catch (const ModelEvaluationError&) {
    return false;
  }
  return std::isfinite(f) && c.allFinite();
}

void InteriorPoint::refresh() {
  f_ = obj_scale_ * nlp_.objective(x_);
  grad_ = obj_scale_ * nlp_.gradient(x_);
  c_ = con_scale_.cwiseProduct(nlp_.constraints(x_));
  jac_ = con_scale_.asDiagonal() * nlp_.jacobian(x_);
  if (!std::isfinite(f_) || !grad_.allFinite() || !c_.allFinite()) {
    throw ModelEvaluationError("non-finite NLP evaluation", 0.0, x_);
  }
}

Matrix InteriorPoint::kkt_matrix(const SparseMatrix& w, const Vector& sigma,
                                 double delta_w, double delta_c) const {
  Matrix k = Matrix::Zero(n_ + m_, n_ + m_);
  k.topLeftCorner(n_, n_) = Matrix(w);
  k.topLeftCorner(n_, n_).diagonal() += sigma + Vector::Constant(n_, delta_w);
  if (m_ > 0) {
    const Matrix j = Matrix(jac_);
    k.bottomLeftCorner(m_, n_) = j;
    k.topRightCorner(n_, m_) = j.transpose();
    k.bottomRightCorner(m_, m_).diagonal().setConstant(-delta_c);
  }
  return k;
}

// Rows and objective with gradients above kMaxGradient at the starting point
// are scaled down to it.
void InteriorPoint::compute_scaling() {
  obj_scale_ = 1.0;
  con_scale_ = Vector::Ones(m_);
  const Vector g = nlp_.gradient(x_);
  const double gmax = g.lpNorm<Eigen::Infinity>();
  if (std::isfinite(gmax) && gmax > kMaxGradient) obj_scale_ = kMaxGradient / gmax;
  if (m_ == 0) return;
  const SparseMatrix j = nlp_.jacobian(x_);
  Vector row_max = Vector::Zero(m_);
  for (int k = 0; k < j.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(j, k); it; ++it) {
      row_max[it.row()] = std::max(row_max[it.row()], std::abs(it.value()));
    }
  }
  for (int i = 0; i < m_; ++i) {
    if (std::isfinite(row_max[i]) && row_max[i] > kMaxGradient) {
      con_scale_[i] = kMaxGradient / row_max[i];
    }
  }
}

void InteriorPoint::initial_multipliers() {
  nu_ = Vector::Zero(m_);
  if (m_ == 0) return;
  Matrix k = Matrix::Zero(n_ + m_, n_ + m_);
  k.topLeftCorner(n_, n_).setIdentity();
  const Matrix j = Matrix(jac_);
  k.bottomLeftCorner(m_, n_) = j;
  k.topRightCorner(n_, m_) = j.transpose();
  SymmetricFactorization fac(k);
  if (fac.singular()) return;
  Vector rhs = Vector::Zero(n_ + m_);
  rhs.head(n_) = -(grad_ - z_lo_ + z_up_);
  const Vector sol = fac.solve(rhs);
  const Vector est = sol.tail(m_);
  if (est.allFinite() && est.lpNorm<Eigen::Infinity>() <= kMaxInitialMultiplier) nu_ = est;
}

// Largest alpha in (0, 1] with v + alpha dv >= (1 - tau) v on the masked entries.
double fraction_to_boundary(const Vector& v, const Vector& dv,
                            const std::vector<bool>& mask, double tau) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (mask[i] && dv[i] < 0.0) alpha = std::min(alpha, -tau * v[i] / dv[i]);
  }
  return alpha;
}

NlpSolution InteriorPoint::run(const Vector& x_init) {
  if (x_init.size() != n_) throw DimensionError("initial point has the wrong size");
  x_ = push_into_bounds(x_init);
  z_lo_ = Vector::Zero(n_);
  z_up_ = Vector::Zero(n_);
  for (int i = 0; i < n_; ++i) {
    if (has_lo_[i]) z_lo_[i] = 1.0;
    if (has_up_[i]) z_up_[i] = 1.0;
  }
  if (cfg_.scale_problem) {
    compute_scaling();
  } else {
    con_scale_ = Vector::Ones(m_);
  }
  refresh();
  initial_multipliers();
  mu_ = cfg_.mu_initial;
  const double mu_min = cfg_.kkt_tolerance / 10.0;
  const bool any_bounds =
      std::any_of(has_lo_.begin(), has_lo_.end(), [](bool b) { return b; }) ||
      std::any_of(has_up_.begin(), has_up_.end(), [](bool b) { return b; });
  if (!any_bounds) mu_ = 0.0;

  NlpSolution best;
  best.kkt_residual = kInf;
  std::vector<IterationRecord> history;

  auto snapshot = [&](int iter, SolveStatus status) {
    const Residuals r = residuals(0.0, true);
    NlpSolution s;
    s.x = x_;
    s.multipliers = con_scale_.cwiseProduct(nu_) / obj_scale_;
    s.z_lower = z_lo_ / obj_scale_;
    s.z_upper = z_up_ / obj_scale_;
    s.objective = f_ / obj_scale_;
    s.stationarity = r.stationarity;
    s.infeasibility = r.infeasibility;
    s.complementarity = r.complementarity;
    s.kkt_residual = r.max();
    s.iterations = iter;
    s.status = status;
    return s;
  };
  auto finish = [&](NlpSolution s) {
    s.history = std::move(history);
    return s;
  };

  for (int iter = 0;; ++iter) {
    const Residuals r0 = residuals(0.0, true);
    if (r0.stationarity <= cfg_.kkt_tolerance && r0.infeasibility <= cfg_.kkt_tolerance &&
        r0.complementarity <= cfg_.kkt_tolerance) {
      return finish(snapshot(iter, SolveStatus::converged));
    }
    if (r0.max() < best.kkt_residual) best = snapshot(iter, SolveStatus::max_iterations);
    if (iter >= cfg_.max_iterations) {
      best.iterations = iter;
      return finish(best);
    }

    if (any_bounds) {
      while (mu_ > mu_min &&
             residuals(mu_, false).max() <= cfg_.barrier_tolerance_factor * mu_) {
        mu_ = std::max(mu_min, std::min(cfg_.mu_linear_factor * mu_,
                                        std::pow(mu_, cfg_.mu_superlinear_power)));
      }
    }

    Vector s_lo, s_up;
    slacks(x_, s_lo, s_up);
    Vector sigma = Vector::Zero(n_);
    Vector r_x = grad_;
    if (m_ > 0) r_x += jac_.transpose() * nu_;
    for (int i = 0; i < n_; ++i) {
      if (has_lo_[i]) {
        sigma[i] += z_lo_[i] / s_lo[i];
        r_x[i] -= mu_ / s_lo[i];
      }
      if (has_up_[i]) {
        sigma[i] += z_up_[i] / s_up[i];
        r_x[i] += mu_ / s_up[i];
      }
    }

    // Inertia correction: want n positive and m negative eigenvalues.
    const SparseMatrix w = nlp_.hessian(x_, obj_scale_, con_scale_.cwiseProduct(nu_));
    double delta_w = 0.0;
    double delta_c = 0.0;
    // Zero pivots are judged against the unregularized blocks; large sigma or
    // delta_w entries would otherwise hide a genuinely small Schur pivot.
    double block_max = 1.0;
    for (int k = 0; k < w.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(w, k); it; ++it) {
        block_max = std::max(block_max, std::abs(it.value()));
      }
    }
    for (int k = 0; k < jac_.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(jac_, k); it; ++it) {
        block_max = std::max(block_max, std::abs(it.value()));
      }
    }
    const double zero_tol = 1e-15 * block_max;
    auto factor = [&](double dw, double dc) {
      return SymmetricFactorization(kkt_matrix(w, sigma, dw, dc), zero_tol);
    };
    SymmetricFactorization fac = factor(delta_w, delta_c);
    // With delta_c > 0 the constraint block is negative definite once the
    // Hessian block is, so tiny Schur pivots there still count as negative.
    auto inertia_ok = [&](const SymmetricFactorization& f) {
      const Inertia& in = f.inertia();
      if (in.positive != n_) return false;
      return delta_c > 0.0 ? in.negative + in.zero == m_ : in.negative == m_ && in.zero == 0;
    };
    if (!inertia_ok(fac)) {
      if (fac.inertia().zero > 0) {
        delta_c = kZeroEigenRegularization;
        fac = factor(delta_w, delta_c);
      }
      if (!inertia_ok(fac)) {
        delta_w = last_delta_w_ == 0.0
                      ? cfg_.regularization_floor
                      : std::max(cfg_.regularization_floor, last_delta_w_ / 4.0);
        for (;;) {
          fac = factor(delta_w, delta_c);
          if (inertia_ok(fac)) break;
          if (fac.inertia().zero > 0 && delta_c == 0.0) {
            delta_c = kZeroEigenRegularization;
            continue;
          }
          delta_w *= cfg_.regularization_growth;
          if (delta_w > cfg_.regularization_max) {
            NlpSolution s = snapshot(iter, SolveStatus::singular_kkt);
            return finish(s);
          }
        }
        last_delta_w_ = delta_w;
      }
    }

    Vector rhs(n_ + m_);
    rhs.head(n_) = -r_x;
    rhs.tail(m_) = -c_;
    const Vector sol = fac.solve(rhs);
    const Vector dx = sol.head(n_);
    const Vector dnu = sol.tail(m_);
    Vector dz_lo = Vector::Zero(n_);
    Vector dz_up = Vector::Zero(n_);
    for (int i = 0; i < n_; ++i) {
      if (has_lo_[i]) dz_lo[i] = mu_ / s_lo[i] - z_lo_[i] - z_lo_[i] / s_lo[i] * dx[i];
      if (has_up_[i]) dz_up[i] = mu_ / s_up[i] - z_up_[i] + z_up_[i] / s_up[i] * dx[i];
    }

    const double tau = std::max(cfg_.fraction_to_boundary_min, 1.0 - mu_);
    const double alpha_max = std::min(fraction_to_boundary(s_lo, dx, has_lo_, tau),
                                      fraction_to_boundary(s_up, -dx, has_up_, tau));
    const double alpha_z = std::min(fraction_to_boundary(z_lo_, dz_lo, has_lo_, tau),
                                    fraction_to_boundary(z_up_, dz_up, has_up_, tau));

    // Penalty parameter so that dx is a descent direction of the merit.
    const double c_norm1 = c_.lpNorm<1>();
    const Vector barrier_grad = r_x - (m_ > 0 ? Vector(jac_.transpose() * nu_)
                                              : Vector::Zero(n_));
    const double slope_f = barrier_grad.dot(dx);
    const double curvature =
        dx.dot(w * dx) + dx.dot(sigma.cwiseProduct(dx)) + delta_w * dx.squaredNorm();
    const bool aug = cfg_.merit == MeritFunction::augmented_lagrangian;
    double slope = 0.0;
    if (aug) {
      // Line search over (x, nu) on f + barrier + nu'c + rho/2 |c|^2.
      const double c_sq = c_.squaredNorm();
      const double base = slope_f + nu_.dot(jac_ * dx) + c_.dot(dnu);
      if (c_sq > 0.0) {
        const double required = (base + 0.5 * std::max(curvature, 0.0)) / c_sq;
        if (rho_ < required) rho_ = std::max(2.0 * rho_, required);
      }
      slope = base - rho_ * c_sq;
    } else {
      if (c_norm1 > 0.0) {
        const double required = (slope_f + 0.5 * std::max(curvature, 0.0)) / (0.9 * c_norm1);
        if (rho_ < required) rho_ = 1.1 * required + 1e-6;
      }
      slope = slope_f - rho_ * c_norm1;
    }
    auto merit_full = [&](const Vector& x, double f, const Vector& c, const Vector& nu) {
      if (aug) return f + barrier(x) + nu.dot(c) + 0.5 * rho_ * c.squaredNorm();
      return f + barrier(x) + rho_ * c.lpNorm<1>();
    };
    const double merit0 = merit_full(x_, f_, c_, nu_);
    double alpha = alpha_max;
    auto merit_at = [&](const Vector& x, double f, const Vector& c) {
      return merit_full(x, f, c, m_ > 0 ? Vector(nu_ + alpha * dnu) : nu_);
    };

    // Near the solution the merit change drops below what its evaluation
    // resolves; differences at that level are treated as zero.
    const double roundoff =
        10.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(merit0));
    bool accepted = false;
    Vector x_new;
    double f_new = 0.0, merit_new = 0.0;
    Vector c_new;
    const bool tiny_step =
        dx.lpNorm<Eigen::Infinity>() <=
        10.0 * std::numeric_limits<double>::epsilon() * (1.0 + x_.lpNorm<Eigen::Infinity>());
    for (int k = 0; k < cfg_.max_backtracks; ++k) {
      x_new = x_ + alpha * dx;
      const bool ok = evaluate_trial(x_new, f_new, c_new);
      if (ok) {
        merit_new = merit_at(x_new, f_new, c_new);
        if (merit_new <= merit0 + cfg_.sufficient_decrease * alpha * slope + roundoff ||
            (tiny_step && k == 0 && std::isfinite(merit_new))) {
          accepted = true;
          break;
        }
        if (k == 0 && m_ > 0) {
          // Second-order correction with the same factorization.
          Vector rhs_soc(n_ + m_);
          rhs_soc.head(n_) = -r_x;
          rhs_soc.tail(m_) = -(alpha * c_ + c_new);
          const Vector dx_soc = fac.solve(rhs_soc).head(n_);
          const double a_soc = std::min(fraction_to_boundary(s_lo, dx_soc, has_lo_, tau),
                                        fraction_to_boundary(s_up, -dx_soc, has_up_, tau));
          Vector x_soc = x_ + a_soc * dx_soc;
          double f_soc = 0.0;
          Vector c_soc;
          if (evaluate_trial(x_soc, f_soc, c_soc)) {
            const double m_soc = merit_at(x_soc, f_soc, c_soc);
            if (m_soc <= merit0 + cfg_.sufficient_decrease * alpha * slope + roundoff) {
              x_new = std::move(x_soc);
              f_new = f_soc;
              c_new = std::move(c_soc);
              merit_new = m_soc;
              accepted = true;
              break;
            }
          }
        }
      }
      alpha *= cfg_.backtracking_factor;
    }

    // Backtracking stalled: the merit no longer resolves progress (typically
    // large multipliers times round-off in c). Take the full step if it cuts
    // the primal-dual error, as in a soft restoration phase.
    bool soft = false;
    if (!accepted || alpha < kSoftStepThreshold * alpha_max) {
      const double err0 = residuals(mu_, false).max();
      const Vector x_old = x_, nu_old = nu_, zl_old = z_lo_, zu_old = z_up_;
      const double f_old = f_;
      const Vector grad_old = grad_, c_old = c_;
      const SparseMatrix jac_old = jac_;
      x_ = x_ + alpha_max * dx;
      if (m_ > 0) nu_ += alpha_max * dnu;
      z_lo_ += alpha_z * dz_lo;
      z_up_ += alpha_z * dz_up;
      double err1 = kInf;
      try {
        refresh();
        err1 = residuals(mu_, false).max();
      } catch (const ModelEvaluationError&) {
      }
      if (std::isfinite(barrier(x_)) && err1 <= kSoftReduction * err0) {
        soft = true;
        accepted = true;
        alpha = alpha_max;
        merit_new = merit_full(x_, f_, c_, nu_);
      } else {
        x_ = x_old;
        nu_ = nu_old;
        z_lo_ = zl_old;
        z_up_ = zu_old;
        f_ = f_old;
        grad_ = grad_old;
        c_ = c_old;
        jac_ = jac_old;
      }
    }

    if (!accepted) {
      NlpSolution s = snapshot(iter, SolveStatus::line_search_failure);
      if (best.kkt_residual < s.kkt_residual) {
        best.status = SolveStatus::line_search_failure;
        best.iterations = iter;
        return finish(best);
      }
      return finish(s);
    }

    if (!soft) {
      x_ = std::move(x_new);
      if (m_ > 0) nu_ += alpha * dnu;
      z_lo_ += alpha_z * dz_lo;
      z_up_ += alpha_z * dz_up;
      refresh();
    }

    // Keep z close to mu / s (primal-dual Hessian stays bounded).
    slacks(x_, s_lo, s_up);
    for (int i = 0; i < n_; ++i) {
      if (has_lo_[i]) {
        z_lo_[i] = std::clamp(z_lo_[i], mu_ / (kKappaSigma * s_lo[i]),
                              kKappaSigma * mu_ / s_lo[i]);
      }
      if (has_up_[i]) {
        z_up_[i] = std::clamp(z_up_[i], mu_ / (kKappaSigma * s_up[i]),
                              kKappaSigma * mu_ / s_up[i]);
      }
    }

    IterationRecord rec;
    rec.mu = mu_;
    rec.objective = f_ / obj_scale_;
    const Residuals r = residuals(0.0, true);
    rec.stationarity = r.stationarity;
    rec.infeasibility = r.infeasibility;
    rec.complementarity = r.complementarity;
    rec.regularization = delta_w;
    rec.step = alpha;
    rec.merit_before = merit0;
    rec.merit_after = merit_new;
    history.push_back(rec);
  }
}

}  // namespace

NlpSolution solve(const Nlp& nlp, const Vector& x_init, const SolverConfig& config) {
  config.validate();
  InteriorPoint ipm(nlp, config);
  return ipm.run(x_init);
}

}  // namespace ocpsens
