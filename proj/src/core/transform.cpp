#include "ocpsens/core/transform.hpp"

#include <stdexcept>

namespace ocpsens {

namespace {

// hess(T * s) = T hess(s) + e_T grad(s)^T + grad(s) e_T^T, gradient over (y, g).
Matrix times_duration_hessian(const Matrix& hess, const Vector& grad, double T,
                              int k) {
  Matrix h = T * hess;
  h.row(k) += grad.transpose();
  h.col(k) += grad;
  return h;
}

}  // namespace

ProblemFunctions normalize_time(const ProblemFunctions& funcs, const Dims& dims,
                                int duration_index, bool scale_running_cost) {
  if (duration_index < 0 || duration_index >= dims.n_p) {
    throw std::invalid_argument("duration index outside parameter vector");
  }
  const int k = dims.p_offset() + duration_index;
  ProblemFunctions out;
  out.terminal_cost = funcs.terminal_cost;

  const DynamicsFunction f = funcs.dynamics;
  out.dynamics.value = [f, k](double t, const Vector& y, const Vector& g) {
    return Vector(y[k] * f.value(t, y, g));
  };
  out.dynamics.jacobian = [f, k](double t, const Vector& y, const Vector& g) {
    Matrix j = y[k] * f.jacobian(t, y, g);
    j.col(k) += f.value(t, y, g);
    return j;
  };
  if (f.weighted_hessian) {
    out.dynamics.weighted_hessian = [f, k](double t, const Vector& y,
                                           const Vector& g, const Vector& w) {
      const Vector grad = f.jacobian(t, y, g).transpose() * w;
      return times_duration_hessian(f.weighted_hessian(t, y, g, w), grad, y[k], k);
    };
  }

  if (funcs.running_cost && scale_running_cost) {
    const RunningCostFunction l = *funcs.running_cost;
    RunningCostFunction lt;
    lt.value = [l, k](double t, const Vector& y, const Vector& g) {
      return y[k] * l.value(t, y, g);
    };
    lt.gradient = [l, k](double t, const Vector& y, const Vector& g) {
      Vector grad = y[k] * l.gradient(t, y, g);
      grad[k] += l.value(t, y, g);
      return grad;
    };
    if (l.hessian) {
      lt.hessian = [l, k](double t, const Vector& y, const Vector& g) {
        return times_duration_hessian(l.hessian(t, y, g), l.gradient(t, y, g),
                                      y[k], k);
      };
    }
    out.running_cost = lt;
  } else {
    out.running_cost = funcs.running_cost;
  }
  return out;
}

VariableScaling VariableScaling::identity(const Dims& dims) {
  return {Vector::Ones(dims.n_x), Vector::Ones(dims.n_u), Vector::Ones(dims.n_p),
          1.0};
}

namespace {

struct ScaleMaps {
  Vector y;   // physical y = y_scale .* y_scaled
  Vector yg;  // y_scale followed by ones for g
  Vector xp;  // (x, p) scaling for terminal terms
};

ScaleMaps make_maps(const Dims& d, const VariableScaling& s) {
  ScaleMaps m;
  m.y.resize(d.n_y());
  m.y << s.x, s.u, s.p;
  m.yg = Vector::Ones(d.n_yg());
  m.yg.head(d.n_y()) = m.y;
  m.xp.resize(d.n_x + d.n_p);
  m.xp << s.x, s.p;
  return m;
}

RunningCostFunction scale_running(const RunningCostFunction& l, const ScaleMaps& m,
                                  double c) {
  RunningCostFunction out;
  const Vector sy = m.y;
  const Vector syg = m.yg;
  out.value = [l, sy, c](double t, const Vector& y, const Vector& g) {
    return c * l.value(t, sy.cwiseProduct(y), g);
  };
  out.gradient = [l, sy, syg, c](double t, const Vector& y, const Vector& g) {
    return Vector(c * syg.cwiseProduct(l.gradient(t, sy.cwiseProduct(y), g)));
  };
  if (l.hessian) {
    out.hessian = [l, sy, syg, c](double t, const Vector& y, const Vector& g) {
      return Matrix(c * syg.asDiagonal() * l.hessian(t, sy.cwiseProduct(y), g) *
                    syg.asDiagonal());
    };
  }
  return out;
}

TerminalCostFunction scale_terminal(const TerminalCostFunction& phi,
                                    const VariableScaling& s, const Vector& sxp,
                                    double c) {
  TerminalCostFunction out;
  const Vector sx = s.x;
  const Vector sp = s.p;
  out.value = [phi, sx, sp, c](const Vector& x, const Vector& p) {
    return c * phi.value(sx.cwiseProduct(x), sp.cwiseProduct(p));
  };
  out.gradient = [phi, sx, sp, sxp, c](const Vector& x, const Vector& p) {
    return Vector(c * sxp.cwiseProduct(phi.gradient(sx.cwiseProduct(x),
                                                    sp.cwiseProduct(p))));
  };
  if (phi.hessian) {
    out.hessian = [phi, sx, sp, sxp, c](const Vector& x, const Vector& p) {
      return Matrix(c * sxp.asDiagonal() *
                    phi.hessian(sx.cwiseProduct(x), sp.cwiseProduct(p)) *
                    sxp.asDiagonal());
    };
  }
  return out;
}

}  // namespace

OcpProblem scale_problem(const OcpProblem& physical, const VariableScaling& s) {
  const Dims& d = physical.dims;
  if (s.x.size() != d.n_x || s.u.size() != d.n_u || s.p.size() != d.n_p) {
    throw std::invalid_argument("scaling vector sizes disagree with dims");
  }
  const ScaleMaps m = make_maps(d, s);
  OcpProblem out = physical;

  const Vector sy = m.y;
  const Vector syg = m.yg;
  const Vector sx = s.x;
  const Vector inv_sx = s.x.cwiseInverse();

  const DynamicsFunction f = physical.funcs.dynamics;
  out.funcs.dynamics.value = [f, sy, inv_sx](double t, const Vector& y,
                                             const Vector& g) {
    return Vector(inv_sx.cwiseProduct(f.value(t, sy.cwiseProduct(y), g)));
  };
  out.funcs.dynamics.jacobian = [f, sy, syg, inv_sx](double t, const Vector& y,
                                                     const Vector& g) {
    return Matrix(inv_sx.asDiagonal() * f.jacobian(t, sy.cwiseProduct(y), g) *
                  syg.asDiagonal());
  };
  if (f.weighted_hessian) {
    out.funcs.dynamics.weighted_hessian =
        [f, sy, syg, inv_sx](double t, const Vector& y, const Vector& g,
                             const Vector& w) {
          return Matrix(syg.asDiagonal() *
                        f.weighted_hessian(t, sy.cwiseProduct(y), g,
                                           inv_sx.cwiseProduct(w)) *
                        syg.asDiagonal());
        };
  }
  if (physical.funcs.running_cost) {
    out.funcs.running_cost = scale_running(*physical.funcs.running_cost, m, s.objective);
  }
  if (physical.funcs.terminal_cost) {
    out.funcs.terminal_cost =
        scale_terminal(*physical.funcs.terminal_cost, s, m.xp, s.objective);
  }

  const ComponentFunction g = physical.g;
  out.g.value = [g, sy](double t, const Vector& y) {
    return g.value(t, sy.cwiseProduct(y));
  };
  out.g.jacobian = [g, sy](double t, const Vector& y) {
    return Matrix(g.jacobian(t, sy.cwiseProduct(y)) * sy.asDiagonal());
  };
  if (g.hessians) {
    out.g.hessians = [g, sy](double t, const Vector& y) {
      auto hs = g.hessians(t, sy.cwiseProduct(y));
      for (auto& h : hs) h = sy.asDiagonal() * h * sy.asDiagonal();
      return hs;
    };
  }

  out.x0 = physical.x0.cwiseQuotient(s.x);
  out.bounds.x_lower = physical.bounds.x_lower.cwiseQuotient(s.x);
  out.bounds.x_upper = physical.bounds.x_upper.cwiseQuotient(s.x);
  out.bounds.u_lower = physical.bounds.u_lower.cwiseQuotient(s.u);
  out.bounds.u_upper = physical.bounds.u_upper.cwiseQuotient(s.u);
  out.bounds.p_lower = physical.bounds.p_lower.cwiseQuotient(s.p);
  out.bounds.p_upper = physical.bounds.p_upper.cwiseQuotient(s.p);
  return out;
}

QoiFunctions scale_qoi(const QoiFunctions& physical, const Dims& dims,
                       const VariableScaling& s, double qoi_scale) {
  const ScaleMaps m = make_maps(dims, s);
  QoiFunctions out;
  if (physical.running) out.running = scale_running(*physical.running, m, qoi_scale);
  if (physical.terminal) {
    out.terminal = scale_terminal(*physical.terminal, s, m.xp, qoi_scale);
  }
  return out;
}

}  // namespace ocpsens
