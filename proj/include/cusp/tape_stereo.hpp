#pragma once

#include <cmath>
#include <cstdint>
#include <memory>

#include "cusp/autodiff.hpp"
#include "cusp/product_manifold.hpp"
#include "cusp/stereo.hpp"

// kappa-stereographic operations recorded on the tape. Curvature is itself a
// 1x1 variable so it can be trained; every function works row-wise.

namespace cusp::ad {

struct Curvature {
  ManifoldKind kind = ManifoldKind::Euclidean;
  Var k;   // kappa (unused for E)
  Var sk;  // sqrt(|kappa|)

  bool flat() const { return kind == ManifoldKind::Euclidean; }
  bool hyperbolic() const { return kind == ManifoldKind::Hyperbolic; }
};

// H: kappa = -softplus(raw); S: kappa = softplus(raw).
inline Curvature curvature_from_raw(Var raw, ManifoldKind kind) {
  Curvature c;
  c.kind = kind;
  if (kind == ManifoldKind::Euclidean) return c;
  Var mag = softplus(raw);
  c.k = kind == ManifoldKind::Hyperbolic ? -mag : mag;
  c.sk = sqrt(mag);
  return c;
}

inline Curvature fixed_curvature(Tape& t, double kappa, ManifoldKind kind) {
  Curvature c;
  c.kind = kind;
  if (kind == ManifoldKind::Euclidean) return c;
  c.k = t.constant(kappa);
  c.sk = t.constant(std::sqrt(std::abs(kappa)));
  return c;
}

// Radial pull-back onto the ball of radius (1 - margin)/sqrt|kappa|.
inline Var project(Var y, const Curvature& c) {
  if (!c.hyperbolic()) return y;
  Tape& t = *y.tape;
  const double c0 = 1.0 - stereo::kBoundaryMargin;
  const double sk = c.sk.scalar();
  const double cap = c0 / sk;
  Mat out = y.value();
  std::vector<int> clipped;
  std::uint64_t bits = 0;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double r = out.row(i).norm();
    if (r >= cap) {
      out.row(i) *= cap / r;
      clipped.push_back(static_cast<int>(i));
      bits = bits * 131 + static_cast<std::uint64_t>(i) + 1;
    }
  }
  t.note_branch(bits);
  if (clipped.empty()) return y;
  const int iy = y.id, is = c.sk.id;
  const int self = static_cast<int>(t.size());
  const bool rg = t.requires_grad(iy) || t.requires_grad(is);
  return t.record(std::move(out), rg, [iy, is, self, clipped, c0](Tape& tp, const Mat& g) {
    const Mat& yv = tp.value(iy);
    const Mat& ov = tp.value(self);
    const double skv = tp.value(is)(0, 0);
    const double capv = c0 / skv;
    Mat gy = g;
    double gs = 0.0;
    for (int i : clipped) {
      const double r = yv.row(i).norm();
      const double gdoty = g.row(i).dot(yv.row(i));
      gy.row(i) = capv / r * (g.row(i) - gdoty / (r * r) * yv.row(i));
      gs -= g.row(i).dot(ov.row(i)) / skv;
    }
    tp.accumulate(iy, gy);
    tp.accumulate(is, Mat::Constant(1, 1, gs));
  });
}

inline Var exp0(Var v, const Curvature& c) {
  if (c.flat()) return v;
  Var u = row_norm(v) * c.sk;
  Var gain = c.hyperbolic() ? tanh_over(u) : tan_over(u);
  return project(v * gain, c);
}

inline Var log0(Var y, const Curvature& c) {
  if (c.flat()) return y;
  Var p = project(y, c);
  Var u = row_norm(p) * c.sk;
  Var gain = c.hyperbolic() ? atanh_over(u) : atan_over(u);
  return p * gain;
}

inline Var mobius_add(Var x, Var y, const Curvature& c) {
  if (c.flat()) return x + y;
  Var xy = rowsum(x * y), x2 = rowsum(x * x), y2 = rowsum(y * y);
  Var a = 1.0 - (2.0 * (c.k * xy) + c.k * y2);
  Var b = 1.0 + c.k * x2;
  Var den = 1.0 - 2.0 * (c.k * xy) + square(c.k) * (x2 * y2);
  return project((a * x + b * y) / den, c);
}

// r (x) x with r a 1x1 scalar or an n x 1 column of per-row factors.
inline Var kappa_scale(Var r, Var x, const Curvature& c) {
  if (c.flat()) return x * r;
  return exp0(log0(x, c) * r, c);
}

// Scaling of points already mapped to the tangent space (saves a log0).
inline Var kappa_scale_tangent(Var r, Var tangent, const Curvature& c) { return exp0(tangent * r, c); }

// W (x) X = exp0(log0(X) W).
inline Var kappa_right_matmul(Var x, Var w, const Curvature& c) {
  if (c.flat()) return matmul(x, w);
  return exp0(matmul(log0(x, c), w), c);
}

// A [x] X: per-row weighted gyromidpoint scaled by the row sum of A.
inline Var kappa_left_matmul(const std::shared_ptr<const SparseMat>& a, Var a_rowsum, Var x, const Curvature& c) {
  if (c.flat()) return spmm(a, x);
  Tape& t = *x.tape;
  Var lam = t.constant(2.0) / (1.0 + c.k * rowsum(x * x));
  Var num = spmm(a, x * lam);
  Var den = spmm(a, lam - 1.0);
  Var mid = kappa_scale(t.constant(0.5), num / den, c);
  return kappa_scale(a_rowsum, mid, c);
}

// Squared geodesic distance between matching rows of x and y (n x 1).
inline Var squared_distance(Var x, Var y, const Curvature& c) {
  if (c.flat()) return rowsum(square(x - y));
  Var w = row_norm(mobius_add(-x, y, c));
  Var u = w * c.sk;
  Var d = 2.0 * (w * (c.hyperbolic() ? atanh_over(u) : atan_over(u)));
  return square(d);
}

}  // namespace cusp::ad
