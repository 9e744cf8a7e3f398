#pragma once

#include "ocpsens/core/linalg.hpp"

namespace ocpsens {

/// Flipped Legendre-Gauss-Radau points on (-1, 1] (right endpoint included)
/// with their quadrature weights. Exact for polynomials of degree <= 2n-2.
struct RadauRule {
  Vector nodes;    // strictly increasing, nodes[n-1] == 1
  Vector weights;  // positive, sum == 2
};

/// Throws std::invalid_argument for n == 0.
RadauRule lgr_nodes(int n);

/// Barycentric weights b_j = 1 / prod_{k != j} (s_j - s_k).
Vector barycentric_weights(const Vector& support);

/// Square differentiation matrix on `support`: (D v)_i is the derivative at
/// support[i] of the interpolating polynomial of v. Rows sum to zero.
/// Throws std::invalid_argument on duplicate points.
Matrix differentiation_matrix(const Vector& support);

/// Barycentric Lagrange interpolation of column-sampled values
/// (rows = components, cols = support points). Returns the stored column
/// unchanged when t coincides with a support point.
Vector barycentric_interpolate(const Vector& support, const Vector& bary_weights,
                               const Matrix& values, double t);

}  // namespace ocpsens
