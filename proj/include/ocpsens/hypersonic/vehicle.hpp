#pragma once

#include <array>
#include <string>
#include <vector>

#include "ocpsens/collocation/grid.hpp"
#include "ocpsens/collocation/ocp_solve.hpp"
#include "ocpsens/collocation/transcription.hpp"
#include "ocpsens/core/problem.hpp"
#include "ocpsens/core/transform.hpp"

namespace ocpsens::hypersonic {

// State (x1, x2, v, gamma, alpha, q), control delta, parameter T.
inline constexpr int kNx = 6;
inline constexpr int kNu = 1;
inline constexpr int kNp = 1;
inline constexpr int kNg = 3;
inline constexpr double kDeg = 3.14159265358979323846 / 180.0;

struct VehicleParams {
  double mass = 1000.0;           // kg
  double inertia = 247.0;         // kg m^2
  double area = 4.4;              // m^2
  double length = 3.6;            // m
  double mu = 3.986e14;           // m^3 / s^2
  double earth_radius = 6.371e6;  // m
  double rho0 = 1.225;            // kg / m^3
  double scale_height_inv = 1.4e-4;  // 1 / m

  void validate() const;
};

/// c0 + ca a + cd d + caa a^2 + cdd d^2 + cad a d
struct Quadratic2 {
  double c0 = 0, ca = 0, cd = 0, caa = 0, cdd = 0, cad = 0;
  double operator()(double a, double d) const {
    return c0 + ca * a + cd * d + caa * a * a + cdd * d * d + cad * a * d;
  }
};

/// Lift, drag, moment coefficients. The truth model scales the surrogate
/// polynomials by (1 + eps), (1 - eps), (1 + eps).
struct AeroModel {
  std::array<Quadratic2, 3> poly;
  std::array<double, 3> factor{1.0, 1.0, 1.0};
  double epsilon = 0.0;
  bool truth = false;

  static AeroModel surrogate();
  static AeroModel truth_model(double epsilon);
};

struct AeroCoefficients {
  Vector value;                  // (C_L, C_D, C_M)
  Matrix jacobian;               // 3 x 2 over (alpha, delta)
  std::vector<Matrix> hessians;  // 2 x 2 each
};

AeroCoefficients aero_coeffs(const AeroModel& model, double alpha, double delta);

double density(const VehicleParams& vp, double altitude);
double gravity(const VehicleParams& vp, double altitude);

/// Physical-time right-hand side. Throws ModelEvaluationError when v <= 0.
Vector hypersonic_dynamics(const VehicleParams& vp, const AeroModel& model,
                           const Vector& state, double delta);

/// g(t, y) = aero coefficients at (alpha, delta) with y = (x, delta, T).
ComponentFunction aero_component(const AeroModel& model);

/// f(t, y, g) in physical time with analytic first and second partials.
DynamicsFunction vehicle_dynamics(const VehicleParams& vp);

Vector initial_state();

/// Max-downrange OCP in normalized time tau in [0, 1], SI units. The
/// objective is -x1(1) in km.
OcpProblem build_max_downrange(const VehicleParams& vp, const AeroModel& model);

/// Uncontrolled glide (delta = 0, T = 2000) integrated from the initial
/// condition and sampled at the state points of `grid`.
DiscreteTrajectory max_downrange_guess(const VehicleParams& vp, const AeroModel& model,
                                       const CollocationGrid& grid);

/// Solution of the max-downrange problem on its grid, in SI units.
struct Reference {
  CollocationGrid grid{CollocationGrid::uniform(1, 1, 0.0, 1.0)};
  DiscreteTrajectory traj;
};

struct TrackingWeights {
  // Per state, with lengths in km as printed in the problem statement.
  Vector q_km = (Vector(kNx) << 1e-3, 1e1, 0.0, 0.0, 1e1, 0.0).finished();
  double r_u = 1e8;
  double r_p = 1e-3;

  /// The same weights applied to SI states (lengths in m).
  Vector q_si() const;
};

/// Tracking OCP in normalized time, no inequality constraints, SI units.
/// The integrand compares x(tau) with the reference interpolant at tau and
/// is integrated over tau in [0, 1].
OcpProblem build_tracking(const VehicleParams& vp, const AeroModel& model,
                          const Reference& reference, const TrackingWeights& w = {});

/// QoI x1(1), downrange in km.
QoiFunctions downrange_qoi();

enum class UnitScheme { si, kgkms };

/// Throws std::invalid_argument for anything but "si" or "kgkms".
UnitScheme parse_unit_scheme(const std::string& name);
std::string to_string(UnitScheme s);

/// Problem rewritten in the chosen units plus the maps back and forth.
struct ScaledProblem {
  OcpProblem problem;
  VariableScaling scaling;

  DiscreteTrajectory to_physical(const DiscreteTrajectory& scaled) const;
  DiscreteTrajectory to_scaled(const DiscreteTrajectory& physical) const;
};

/// kgkms divides the lengths x1, x2 and the speed v by 1000.
VariableScaling unit_scaling_factors(UnitScheme scheme);
ScaledProblem unit_scaling(const OcpProblem& physical, UnitScheme scheme);

/// Grid used when none is given: 16 intervals of 4 nodes.
CollocationGrid default_grid();

/// A solve of one vehicle problem in the chosen units. `solution` is in
/// scaled variables; `physical` is its SI copy.
struct VehicleSolve {
  ScaledProblem scaled;
  KktSolution solution;
  DiscreteTrajectory physical;
};

/// Max-downrange solve from the glide guess. If that fails on a grid other
/// than the default, the default-grid optimum is resampled and used as a
/// warm start.
VehicleSolve solve_max_downrange(const VehicleParams& vp, const AeroModel& model,
                                 const CollocationGrid& grid, UnitScheme units,
                                 const SolverConfig& config = {});

/// Tracking solve for `model`, started from the reference on its own grid.
VehicleSolve solve_tracking(const VehicleParams& vp, const AeroModel& model,
                            const Reference& reference, UnitScheme units,
                            const SolverConfig& config = {});

Reference as_reference(const VehicleSolve& s);

}  // namespace ocpsens::hypersonic
