#include "qmepi/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace qmepi {

namespace {

Eigen::MatrixXd augmented(const std::vector<Vec3>& points) {
  Eigen::MatrixXd a(4, points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    a.block<3, 1>(0, k) = points[k];
    a(3, k) = 1.0;
  }
  return a;
}

Eigen::Vector4d augmented(const Vec3& v) { return Eigen::Vector4d(v.x(), v.y(), v.z(), 1.0); }

// Minimum-norm least squares restricted to the columns in `cols`.
Eigen::VectorXd solve_columns(const Eigen::MatrixXd& a, const Eigen::Vector4d& b, const std::vector<int>& cols) {
  Eigen::MatrixXd sub(a.rows(), cols.size());
  for (std::size_t k = 0; k < cols.size(); ++k) sub.col(k) = a.col(cols[k]);
  Eigen::VectorXd z = sub.completeOrthogonalDecomposition().solve(b);
  Eigen::VectorXd full = Eigen::VectorXd::Zero(a.cols());
  for (std::size_t k = 0; k < cols.size(); ++k) full(cols[k]) = z(k);
  return full;
}

}  // namespace

ConvexFit nnls_convex(const std::vector<Vec3>& points, const Vec3& v) {
  const Eigen::MatrixXd a = augmented(points);
  const Eigen::Vector4d b = augmented(v);
  const int n = static_cast<int>(points.size());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(n, false);
  const double eps = 1e-14;
  int outer = 0;
  while (outer++ < 3 * n + 10) {
    Eigen::VectorXd w = a.transpose() * (b - a * x);
    int t = -1;
    double best = eps;
    for (int j = 0; j < n; ++j)
      if (!passive[j] && w(j) > best) {
        best = w(j);
        t = j;
      }
    if (t < 0) break;
    passive[t] = true;
    int inner = 0;
    while (inner++ < 3 * n + 10) {
      std::vector<int> cols;
      for (int j = 0; j < n; ++j)
        if (passive[j]) cols.push_back(j);
      Eigen::VectorXd z = solve_columns(a, b, cols);
      bool positive = true;
      for (int j : cols)
        if (z(j) <= 0.0) positive = false;
      if (positive) {
        x = z;
        break;
      }
      double alpha = 1.0;
      for (int j : cols)
        if (z(j) <= 0.0) {
          double denom = x(j) - z(j);
          if (denom > 0.0) alpha = std::min(alpha, x(j) / denom);
        }
      x += alpha * (z - x);
      for (int j : cols)
        if (x(j) <= eps) {
          passive[j] = false;
          x(j) = 0.0;
        }
    }
  }
  ConvexFit fit;
  fit.c = x.cwiseMax(0.0);
  fit.residual = (a * fit.c - b).norm();
  return fit;
}

ConvexFit min_norm_convex(const std::vector<Vec3>& points, const Vec3& v, double tol) {
  const Eigen::MatrixXd a = augmented(points);
  const Eigen::Vector4d b = augmented(v);
  std::vector<int> cols(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) cols[k] = static_cast<int>(k);
  while (!cols.empty()) {
    Eigen::VectorXd c = solve_columns(a, b, cols);
    int worst = -1;
    double most_negative = -tol;
    for (int j : cols)
      if (c(j) < most_negative) {
        most_negative = c(j);
        worst = j;
      }
    if (worst < 0) {
      ConvexFit fit;
      fit.c = c.cwiseMax(0.0);
      fit.residual = (a * fit.c - b).norm();
      if (fit.residual <= tol) {
        fit.c /= fit.c.sum();
        return fit;
      }
      break;
    }
    cols.erase(std::find(cols.begin(), cols.end(), worst));
  }
  ConvexFit fit = nnls_convex(points, v);
  if (fit.c.sum() > 0.0) fit.c /= fit.c.sum();
  fit.residual = (a * fit.c - b).norm();
  return fit;
}

ConvexFit barycentric(const std::vector<Vec3>& points, const Vec3& v) {
  const Eigen::MatrixXd a = augmented(points);
  const Eigen::Vector4d b = augmented(v);
  ConvexFit fit;
  fit.c = a.completeOrthogonalDecomposition().solve(b);
  fit.residual = (a * fit.c - b).norm();
  return fit;
}

bool affinely_independent(const std::vector<Vec3>& points, double tol) {
  if (points.size() > 4) return false;
  if (points.size() <= 1) return true;
  Eigen::MatrixXd d(3, points.size() - 1);
  for (std::size_t i = 1; i < points.size(); ++i) d.col(i - 1) = points[i] - points[0];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(d);
  double scale = std::max(1.0, svd.singularValues()(0));
  return svd.singularValues()(svd.singularValues().size() - 1) > tol * scale;
}

std::optional<Vec3> equal_phi_point(const std::vector<double>& weights, const std::vector<Vec3>& points,
                                    const Vec3& guess) {
  const std::size_t k = points.size();
  if (k == 0 || weights.size() != k) return std::nullopt;
  if (k == 1) return points[0];
  if (!affinely_independent(points)) return std::nullopt;
  if (k == 2) {
    Vec3 d = points[1] - points[0];
    double len = d.norm();
    double t = 0.5 * (len + weights[1] - weights[0]);
    if (t < 0.0 || t > len) return std::nullopt;
    return Vec3(points[0] + (t / len) * d);
  }
  const int dim = static_cast<int>(k) - 1;
  Eigen::MatrixXd diffs(3, dim);
  for (int j = 0; j < dim; ++j) diffs.col(j) = points[j + 1] - points[0];
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(diffs);
  Eigen::MatrixXd basis = qr.householderQ() * Eigen::MatrixXd::Identity(3, dim);

  auto residual = [&](const Eigen::VectorXd& y, Eigen::VectorXd& g, Eigen::MatrixXd* jac) {
    Vec3 v = points[0] + basis * y;
    Vec3 d0 = v - points[0];
    double n0 = d0.norm();
    g.resize(dim);
    if (jac) jac->resize(dim, dim);
    for (int j = 0; j < dim; ++j) {
      Vec3 dj = v - points[j + 1];
      double nj = dj.norm();
      g(j) = weights[j + 1] + nj - weights[0] - n0;
      if (jac) {
        Vec3 grad = (nj > 0 ? Vec3(dj / nj) : Vec3::Zero()) - (n0 > 0 ? Vec3(d0 / n0) : Vec3::Zero());
        jac->row(j) = (basis.transpose() * grad).transpose();
      }
    }
    return g.norm();
  };

  std::vector<Vec3> starts{guess};
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : points) centroid += p;
  starts.push_back(centroid / static_cast<double>(k));

  for (const Vec3& s : starts) {
    Eigen::VectorXd y = basis.transpose() * (s - points[0]);
    Eigen::VectorXd g;
    Eigen::MatrixXd jac;
    double gn = residual(y, g, &jac);
    for (int it = 0; it < 100 && gn > 1e-15; ++it) {
      Eigen::VectorXd step = jac.colPivHouseholderQr().solve(-g);
      if (!step.allFinite()) break;
      double t = 1.0;
      Eigen::VectorXd g2;
      double gn2 = residual(y + step, g2, nullptr);
      while (gn2 >= gn && t > 1e-10) {
        t *= 0.5;
        gn2 = residual(y + t * step, g2, nullptr);
      }
      if (gn2 >= gn) break;
      y += t * step;
      gn = residual(y, g, &jac);
    }
    if (gn <= 1e-13) return Vec3(points[0] + basis * y);
  }
  return std::nullopt;
}

}  // namespace qmepi
