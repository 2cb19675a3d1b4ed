#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "cusp/error.hpp"

// Gyrovector algebra of the kappa-stereographic model
//   M = { z in R^d : -kappa |z|^2 < 1 },  lambda_z = 2 / (1 + kappa |z|^2).
// kappa < 0 is the Poincare ball of radius 1/sqrt(-kappa), kappa > 0 the
// stereographic sphere, kappa = 0 flat space.

namespace cusp::stereo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Points this close to the hyperbolic boundary (relative) are pulled back.
inline constexpr double kBoundaryMargin = 1e-5;
inline constexpr double kMinDenominator = 1e-15;

struct StereoPoint {
  Vec coords;
  double kappa = 0.0;
};

inline double tan_k(double u, double kappa) {
  if (kappa > 0.0) {
    if (std::abs(std::cos(u)) < 1e-12) throw NumericalError("tan_k: argument at a pole of tan");
    return std::tan(u);
  }
  if (kappa < 0.0) return std::tanh(u);
  return u;
}

inline double arctan_k(double u, double kappa) {
  if (kappa > 0.0) return std::atan(u);
  if (kappa < 0.0) {
    if (std::abs(u) >= 1.0) throw NumericalError("arctan_k: |u| >= 1 outside artanh domain");
    return std::atanh(u);
  }
  return u;
}

inline double conformal_factor(const Vec& x, double kappa) { return 2.0 / (1.0 + kappa * x.squaredNorm()); }

inline bool in_domain(const Vec& x, double kappa) { return -kappa * x.squaredNorm() < 1.0; }

inline double max_norm(double kappa) {
  return kappa < 0.0 ? (1.0 - kBoundaryMargin) / std::sqrt(-kappa) : std::numeric_limits<double>::infinity();
}

// Radial pull-back of hyperbolic points that drifted to the boundary.
inline Vec project(Vec x, double kappa) {
  if (kappa < 0.0) {
    const double r = x.norm(), cap = max_norm(kappa);
    if (r >= cap) x *= cap / r;
  }
  return x;
}

inline Vec mobius_add(const Vec& x, const Vec& y, double kappa) {
  if (x.size() != y.size()) throw InputError("mobius_add: dimension mismatch");
  const double xy = x.dot(y), x2 = x.squaredNorm(), y2 = y.squaredNorm();
  const double den = 1.0 - 2.0 * kappa * xy + kappa * kappa * x2 * y2;
  if (std::abs(den) < kMinDenominator) throw NumericalError("mobius_add: vanishing denominator");
  Vec num = (1.0 - 2.0 * kappa * xy - kappa * y2) * x + (1.0 + kappa * x2) * y;
  return project(num / den, kappa);
}

// tan_k(sqrt|k| n) / (sqrt|k| n), continuous at n = 0 and at k = 0.
inline double exp0_gain(double n, double kappa) {
  if (kappa == 0.0 || n == 0.0) return 1.0;
  const double s = std::sqrt(std::abs(kappa)) * n;
  return tan_k(s, kappa) / s;
}

inline double log0_gain(double n, double kappa) {
  if (kappa == 0.0 || n == 0.0) return 1.0;
  const double s = std::sqrt(std::abs(kappa)) * n;
  return arctan_k(s, kappa) / s;
}

inline Vec exp0(const Vec& v, double kappa) { return project(exp0_gain(v.norm(), kappa) * v, kappa); }

inline Vec log0(const Vec& y, double kappa) {
  Vec p = project(y, kappa);
  return log0_gain(p.norm(), kappa) * p;
}

inline Vec exp_map(const Vec& x, const Vec& v, double kappa) {
  if (x.size() != v.size()) throw InputError("exp_map: dimension mismatch");
  const double nv = v.norm();
  if (nv == 0.0) return x;
  if (kappa == 0.0) return x + v;
  const double sk = std::sqrt(std::abs(kappa));
  Vec step = tan_k(sk * conformal_factor(x, kappa) * nv / 2.0, kappa) / (sk * nv) * v;
  return mobius_add(x, step, kappa);
}

// Inverse of exp_map. The flat case returns y - x.
inline Vec log_map(const Vec& x, const Vec& y, double kappa) {
  if (x.size() != y.size()) throw InputError("log_map: dimension mismatch");
  if (kappa == 0.0) return y - x;
  Vec w = mobius_add(-x, y, kappa);
  const double nw = w.norm();
  if (nw == 0.0) return Vec::Zero(x.size());
  const double sk = std::sqrt(std::abs(kappa));
  return 2.0 / (sk * conformal_factor(x, kappa)) * arctan_k(sk * nw, kappa) / nw * w;
}

// The flat case is the plain Euclidean distance; note the curved formula
// tends to 2 |x - y| as kappa -> 0.
inline double distance(const Vec& x, const Vec& y, double kappa) {
  if (x.size() != y.size()) throw InputError("distance: dimension mismatch");
  if (kappa == 0.0) return (x - y).norm();
  const double sk = std::sqrt(std::abs(kappa));
  return 2.0 / sk * arctan_k(sk * mobius_add(-x, y, kappa).norm(), kappa);
}

// r (x) x = exp0(r log0(x)): moves x along the geodesic through the origin.
inline Vec kappa_scale(double r, const Vec& x, double kappa) { return exp0(r * log0(x, kappa), kappa); }

// Row-wise exp0(log0(X) W), evaluated through the closed form
//   tan_k(a_i arctan_k(sqrt|k| |x_i|)) / sqrt|k| * (x_i W) / |x_i W|,  a_i = |x_i W| / |x_i|.
inline Mat kappa_right_matmul(const Mat& x, const Mat& w, double kappa) {
  if (x.cols() != w.rows()) throw InputError("kappa_right_matmul: inner dimension mismatch");
  Mat xw = x * w;
  if (kappa == 0.0) return xw;
  Mat out(x.rows(), w.cols());
  const double sk = std::sqrt(std::abs(kappa));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Vec xi = project(x.row(i).transpose(), kappa);
    const double nx = xi.norm();
    Vec u = xi.transpose() * w;
    const double nu = u.norm();
    if (nx == 0.0 || nu == 0.0) {
      out.row(i).setZero();
      continue;
    }
    const double scale = tan_k(nu / nx * arctan_k(sk * nx, kappa), kappa) / sk;
    out.row(i) = project(scale / nu * u, kappa).transpose();
  }
  return out;
}

// Weighted gyromidpoint  m = 1/2 (x) ( sum_i a_i lambda_i x_i / sum_j a_j (lambda_j - 1) ).
// Rows of `x` are the points. Returns the origin when every weight is zero.
inline Vec gyromidpoint(const Mat& x, const Vec& a, double kappa) {
  if (a.size() != x.rows()) throw InputError("gyromidpoint: weight count != point count");
  Vec num = Vec::Zero(x.cols());
  double den = 0.0;
  bool any = false;
  for (Eigen::Index j = 0; j < x.rows(); ++j) {
    if (a[j] == 0.0) continue;
    any = true;
    Vec xj = x.row(j).transpose();
    const double lam = conformal_factor(xj, kappa);
    num += a[j] * lam * xj;
    den += a[j] * (lam - 1.0);
  }
  if (!any) return Vec::Zero(x.cols());
  if (std::abs(den) < kMinDenominator) throw NumericalError("gyromidpoint: vanishing weight normalizer");
  return kappa_scale(0.5, num / den, kappa);
}

// Row i: (sum_j A_ij) (x) m_kappa(X; A_i).
inline Mat kappa_left_matmul(const Eigen::SparseMatrix<double, Eigen::RowMajor>& a, const Mat& x, double kappa) {
  if (a.cols() != x.rows()) throw InputError("kappa_left_matmul: inner dimension mismatch");
  if (kappa == 0.0) return a * x;
  Mat out = Mat::Zero(a.rows(), x.cols());
  for (Eigen::Index i = 0; i < a.outerSize(); ++i) {
    Vec num = Vec::Zero(x.cols());
    double den = 0.0, rowsum = 0.0;
    bool any = false;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(a, i); it; ++it) {
      if (it.value() == 0.0) continue;
      any = true;
      Vec xj = x.row(it.col()).transpose();
      const double lam = conformal_factor(xj, kappa);
      num += it.value() * lam * xj;
      den += it.value() * (lam - 1.0);
      rowsum += it.value();
    }
    if (!any) continue;
    if (std::abs(den) < kMinDenominator) throw NumericalError("kappa_left_matmul: vanishing weight normalizer");
    Vec mid = kappa_scale(0.5, num / den, kappa);
    out.row(i) = kappa_scale(rowsum, mid, kappa).transpose();
  }
  return out;
}

inline Mat kappa_left_matmul(const Mat& a, const Mat& x, double kappa) {
  return kappa_left_matmul(Eigen::SparseMatrix<double, Eigen::RowMajor>(a.sparseView(0.0, 0.0)), x, kappa);
}

// Row-wise exp0 / log0 over a matrix of points.
inline Mat exp0_rows(const Mat& v, double kappa) {
  Mat out(v.rows(), v.cols());
  for (Eigen::Index i = 0; i < v.rows(); ++i) out.row(i) = exp0(v.row(i).transpose(), kappa).transpose();
  return out;
}

inline Mat log0_rows(const Mat& y, double kappa) {
  Mat out(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i) out.row(i) = log0(y.row(i).transpose(), kappa).transpose();
  return out;
}

// ---------------------------------------------------------------------------
// StereoPoint wrappers

inline void check_same(const StereoPoint& x, const StereoPoint& y, const char* op) {
  if (x.kappa != y.kappa) throw InputError(std::string(op) + ": curvature mismatch");
  if (x.coords.size() != y.coords.size()) throw InputError(std::string(op) + ": dimension mismatch");
}

inline StereoPoint make_point(Vec coords, double kappa) {
  if (!in_domain(coords, kappa)) throw InputError("stereo point outside the model domain");
  return {std::move(coords), kappa};
}

inline StereoPoint mobius_add(const StereoPoint& x, const StereoPoint& y) {
  check_same(x, y, "mobius_add");
  return {mobius_add(x.coords, y.coords, x.kappa), x.kappa};
}

inline StereoPoint exp_map(const StereoPoint& x, const Vec& v) { return {exp_map(x.coords, v, x.kappa), x.kappa}; }

inline Vec log_map(const StereoPoint& x, const StereoPoint& y) {
  check_same(x, y, "log_map");
  return log_map(x.coords, y.coords, x.kappa);
}

inline double distance(const StereoPoint& x, const StereoPoint& y) {
  check_same(x, y, "distance");
  return distance(x.coords, y.coords, x.kappa);
}

inline StereoPoint kappa_scale(double r, const StereoPoint& x) { return {kappa_scale(r, x.coords, x.kappa), x.kappa}; }

}  // namespace cusp::stereo
