#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "qmepi/core.hpp"

namespace qmepi {

/// Coefficients c >= 0 with sum 1 and sum c_i p_i close to v.
struct ConvexFit {
  Eigen::VectorXd c;
  double residual = 0.0;  // |[P;1] c - [v;1]|
};

/// Nonnegative least squares (Lawson-Hanson) for v against the affine
/// system [points; 1]. Residual zero iff v lies in the convex hull.
ConvexFit nnls_convex(const std::vector<Vec3>& points, const Vec3& v);

/// Minimum-norm nonnegative convex coefficients via active-set elimination,
/// falling back to nnls_convex. The residual tells whether v was reached.
ConvexFit min_norm_convex(const std::vector<Vec3>& points, const Vec3& v, double tol);

/// Barycentric coordinates of v for affinely independent points, by least
/// squares. Residual measures the distance of v from the affine hull.
ConvexFit barycentric(const std::vector<Vec3>& points, const Vec3& v);

/// True when the points are affinely independent.
bool affinely_independent(const std::vector<Vec3>& points, double tol = 1e-12);

/// Point of the affine hull of the given weighted points where all the
/// eta_k + |a_k - v| coincide, found by Newton iteration from `guess`.
/// Empty when the points are dependent or the iteration does not settle.
std::optional<Vec3> equal_phi_point(const std::vector<double>& weights, const std::vector<Vec3>& points,
                                    const Vec3& guess);

}  // namespace qmepi
