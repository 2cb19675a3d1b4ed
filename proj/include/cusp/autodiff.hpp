#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "cusp/error.hpp"

// Reverse-mode differentiation over dense matrices.
//
// A Tape records every intermediate value together with a closure that
// pushes the output gradient back to its inputs. Binary elementwise ops
// broadcast a 1x1, n x 1 or 1 x m operand against the other one.

namespace cusp::ad {

using Mat = Eigen::MatrixXd;
using SparseMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Mat& grad_out)>;

  Var leaf(Mat value, bool requires_grad) {
    nodes_.push_back({std::move(value), Mat(), nullptr, requires_grad});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }
  Var constant(Mat value) { return leaf(std::move(value), false); }
  Var constant(double v) { return leaf(Mat::Constant(1, 1, v), false); }
  Var parameter(Mat value) { return leaf(std::move(value), true); }

  Var record(Mat value, std::initializer_list<Var> parents, Backward bw) {
    bool rg = false;
    for (Var p : parents) rg = rg || nodes_[p.id].requires_grad;
    return record(std::move(value), rg, std::move(bw));
  }
  Var record(Mat value, bool requires_grad, Backward bw) {
    if (!value.allFinite()) throw NumericalError("autodiff: non-finite value produced");
    nodes_.push_back({std::move(value), Mat(), requires_grad ? std::move(bw) : nullptr, requires_grad});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  const Mat& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  // Gradient of the last backward() target w.r.t. v (zeros if unreached).
  Mat grad(Var v) const {
    const Node& n = nodes_[v.id];
    return n.grad.size() ? n.grad : Mat::Zero(n.value.rows(), n.value.cols());
  }

  void accumulate(int id, const Mat& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  void backward(Var target) {
    if (target.rows() != 1 || target.cols() != 1) throw InputError("backward: target must be a scalar");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    nodes_[target.id].grad = Mat::Ones(1, 1);
    for (int i = target.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.size() == 0) continue;
      Mat g = n.grad;  // closure may touch nodes_, keep a private copy
      n.backward(*this, g);
    }
  }

  // Folds which side of every non-smooth branch was taken (projection
  // clips, relu). Two evaluations with equal hashes sit on the same smooth piece.
  void note_branch(std::uint64_t bits) { branch_hash_ = (branch_hash_ ^ bits) * 0x100000001b3ull; }
  std::uint64_t branch_hash() const { return branch_hash_; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward backward;
    bool requires_grad;
  };
  std::deque<Node> nodes_;  // stable references across push_back
  std::uint64_t branch_hash_ = 0xcbf29ce484222325ull;
};

inline const Mat& Var::value() const { return tape->value(id); }

namespace detail {

inline Mat expand(const Mat& b, Eigen::Index r, Eigen::Index c) {
  if (b.rows() == r && b.cols() == c) return b;
  if (b.rows() == 1 && b.cols() == 1) return Mat::Constant(r, c, b(0, 0));
  if (b.rows() == r && b.cols() == 1) return b.replicate(1, c);
  if (b.rows() == 1 && b.cols() == c) return b.replicate(r, 1);
  throw InputError("autodiff: cannot broadcast " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + " to " +
                   std::to_string(r) + "x" + std::to_string(c));
}

// Sum a full-shape gradient back down to the operand's shape.
inline Mat reduce(const Mat& g, Eigen::Index r, Eigen::Index c) {
  if (g.rows() == r && g.cols() == c) return g;
  if (r == 1 && c == 1) return Mat::Constant(1, 1, g.sum());
  if (c == 1) return g.rowwise().sum();
  return g.colwise().sum();
}

inline std::pair<Eigen::Index, Eigen::Index> broadcast_shape(const Mat& a, const Mat& b) {
  return {std::max(a.rows(), b.rows()), std::max(a.cols(), b.cols())};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic with broadcasting

inline Var add(Var a, Var b) {
  auto [r, c] = detail::broadcast_shape(a.value(), b.value());
  Mat out = detail::expand(a.value(), r, c) + detail::expand(b.value(), r, c);
  int ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {a, b}, [ia, ib](Tape& t, const Mat& g) {
    t.accumulate(ia, detail::reduce(g, t.value(ia).rows(), t.value(ia).cols()));
    t.accumulate(ib, detail::reduce(g, t.value(ib).rows(), t.value(ib).cols()));
  });
}

inline Var sub(Var a, Var b) {
  auto [r, c] = detail::broadcast_shape(a.value(), b.value());
  Mat out = detail::expand(a.value(), r, c) - detail::expand(b.value(), r, c);
  int ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {a, b}, [ia, ib](Tape& t, const Mat& g) {
    t.accumulate(ia, detail::reduce(g, t.value(ia).rows(), t.value(ia).cols()));
    t.accumulate(ib, detail::reduce(-g, t.value(ib).rows(), t.value(ib).cols()));
  });
}

inline Var mul(Var a, Var b) {
  auto [r, c] = detail::broadcast_shape(a.value(), b.value());
  Mat ea = detail::expand(a.value(), r, c), eb = detail::expand(b.value(), r, c);
  Mat out = ea.cwiseProduct(eb);
  int ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {a, b}, [ia, ib, r, c](Tape& t, const Mat& g) {
    const Mat& va = t.value(ia);
    const Mat& vb = t.value(ib);
    if (t.requires_grad(ia)) t.accumulate(ia, detail::reduce(g.cwiseProduct(detail::expand(vb, r, c)), va.rows(), va.cols()));
    if (t.requires_grad(ib)) t.accumulate(ib, detail::reduce(g.cwiseProduct(detail::expand(va, r, c)), vb.rows(), vb.cols()));
  });
}

inline Var div(Var a, Var b) {
  auto [r, c] = detail::broadcast_shape(a.value(), b.value());
  Mat ea = detail::expand(a.value(), r, c), eb = detail::expand(b.value(), r, c);
  Mat out = ea.cwiseQuotient(eb);
  int ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {a, b}, [ia, ib, r, c](Tape& t, const Mat& g) {
    const Mat& va = t.value(ia);
    const Mat& vb = t.value(ib);
    Mat eb = detail::expand(vb, r, c);
    if (t.requires_grad(ia)) t.accumulate(ia, detail::reduce(g.cwiseQuotient(eb), va.rows(), va.cols()));
    if (t.requires_grad(ib)) {
      Mat ea = detail::expand(va, r, c);
      Mat gb = -g.cwiseProduct(ea).cwiseQuotient(eb.cwiseProduct(eb));
      t.accumulate(ib, detail::reduce(gb, vb.rows(), vb.cols()));
    }
  });
}

inline Var scale(Var a, double s) {
  int ia = a.id;
  return a.tape->record(a.value() * s, {a}, [ia, s](Tape& t, const Mat& g) { t.accumulate(ia, g * s); });
}

inline Var add_scalar(Var a, double s) {
  int ia = a.id;
  return a.tape->record((a.value().array() + s).matrix(), {a}, [ia](Tape& t, const Mat& g) { t.accumulate(ia, g); });
}

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return scale(a, -1.0); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator+(Var a, double s) { return add_scalar(a, s); }
inline Var operator+(double s, Var a) { return add_scalar(a, s); }
inline Var operator-(Var a, double s) { return add_scalar(a, -s); }
inline Var operator-(double s, Var a) { return add_scalar(scale(a, -1.0), s); }

// ---------------------------------------------------------------------------
// Linear algebra and reductions

inline Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw InputError("matmul: inner dimension mismatch");
  int ia = a.id, ib = b.id;
  return a.tape->record(a.value() * b.value(), {a, b}, [ia, ib](Tape& t, const Mat& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

// Constant sparse matrix times variable.
inline Var spmm(std::shared_ptr<const SparseMat> pa, Var x) {
  if (pa->cols() != x.rows()) throw InputError("spmm: inner dimension mismatch");
  int ix = x.id;
  return x.tape->record(Mat(*pa * x.value()), {x}, [ix, pa](Tape& t, const Mat& g) {
    t.accumulate(ix, Mat(pa->transpose() * g));
  });
}

inline Var sum(Var a) {
  int ia = a.id;
  return a.tape->record(Mat::Constant(1, 1, a.value().sum()), {a}, [ia](Tape& t, const Mat& g) {
    t.accumulate(ia, Mat::Constant(t.value(ia).rows(), t.value(ia).cols(), g(0, 0)));
  });
}

inline Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

inline Var rowsum(Var a) {
  int ia = a.id;
  return a.tape->record(Mat(a.value().rowwise().sum()), {a}, [ia](Tape& t, const Mat& g) {
    t.accumulate(ia, g.replicate(1, t.value(ia).cols()));
  });
}

// Column means: n x m -> 1 x m.
inline Var colmean(Var a) {
  int ia = a.id;
  const double inv = 1.0 / static_cast<double>(a.rows());
  return a.tape->record(Mat(a.value().colwise().sum() * inv), {a}, [ia, inv](Tape& t, const Mat& g) {
    t.accumulate(ia, (g * inv).replicate(t.value(ia).rows(), 1));
  });
}

// Euclidean norm of each row (n x 1). Zero rows get a zero subgradient.
inline Var row_norm(Var a) {
  Mat n = a.value().rowwise().norm();
  int ia = a.id;
  return a.tape->record(n, {a}, [ia](Tape& t, const Mat& g) {
    const Mat& x = t.value(ia);
    Mat gx(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double nr = x.row(i).norm();
      if (nr > 0.0)
        gx.row(i) = x.row(i) * (g(i, 0) / nr);
      else
        gx.row(i).setZero();
    }
    t.accumulate(ia, gx);
  });
}

inline Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  int ia = a.id;
  return a.tape->record(Mat(a.value().middleCols(start, count)), {a}, [ia, start, count](Tape& t, const Mat& g) {
    Mat full = Mat::Zero(t.value(ia).rows(), t.value(ia).cols());
    full.middleCols(start, count) = g;
    t.accumulate(ia, full);
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw InputError("concat_cols: nothing to concatenate");
  Tape* tape = parts.front().tape;
  const Eigen::Index r = parts.front().rows();
  Eigen::Index c = 0;
  for (Var p : parts) {
    if (p.rows() != r) throw InputError("concat_cols: row count mismatch");
    c += p.cols();
  }
  Mat out(r, c);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index off = 0;
  bool rg = false;
  for (Var p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    spans.emplace_back(p.id, off);
    off += p.cols();
    rg = rg || tape->requires_grad(p.id);
  }
  return tape->record(std::move(out), rg, [spans](Tape& t, const Mat& g) {
    for (auto [id, o] : spans) t.accumulate(id, Mat(g.middleCols(o, t.value(id).cols())));
  });
}

inline Var gather_rows(Var a, const std::vector<int>& idx) {
  Mat out(idx.size(), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(i) = a.value().row(idx[i]);
  int ia = a.id;
  return a.tape->record(std::move(out), {a}, [ia, idx](Tape& t, const Mat& g) {
    Mat full = Mat::Zero(t.value(ia).rows(), t.value(ia).cols());
    for (std::size_t i = 0; i < idx.size(); ++i) full.row(idx[i]) += g.row(i);
    t.accumulate(ia, full);
  });
}

inline Var pick(Var a, Eigen::Index i, Eigen::Index j) {
  int ia = a.id;
  return a.tape->record(Mat::Constant(1, 1, a.value()(i, j)), {a}, [ia, i, j](Tape& t, const Mat& g) {
    Mat full = Mat::Zero(t.value(ia).rows(), t.value(ia).cols());
    full(i, j) = g(0, 0);
    t.accumulate(ia, full);
  });
}

// Softmax over all entries of a row or column vector.
inline Var softmax(Var a) {
  Mat x = a.value();
  Mat e = (x.array() - x.maxCoeff()).exp().matrix();
  Mat s = e / e.sum();
  int ia = a.id;
  return a.tape->record(s, {a}, [ia, s](Tape& t, const Mat& g) {
    const double dot = g.cwiseProduct(s).sum();
    t.accumulate(ia, s.cwiseProduct((g.array() - dot).matrix()));
  });
}

// ---------------------------------------------------------------------------
// Elementwise functions

template <typename F, typename D>
Var unary(Var a, F f, D df) {
  Mat out = a.value().unaryExpr(f);
  int ia = a.id;
  int self = static_cast<int>(a.tape->size());
  return a.tape->record(std::move(out), {a}, [ia, self, df](Tape& t, const Mat& g) {
    const Mat& x = t.value(ia);
    const Mat& y = t.value(self);
    Mat d(x.rows(), x.cols());
    for (Eigen::Index k = 0; k < x.size(); ++k) d.data()[k] = df(x.data()[k], y.data()[k]);
    t.accumulate(ia, g.cwiseProduct(d));
  });
}

inline Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}
inline Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}
inline Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}
inline Var sigmoid(Var a) {
  return unary(
      a, [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}
inline Var softplus(Var a) {
  return unary(
      a, [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
      [](double x, double) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); });
}
inline Var sqrt(Var a) {
  return unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}
inline Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

inline Var relu(Var a) {
  std::uint64_t bits = 0;
  const Mat& x = a.value();
  for (Eigen::Index k = 0; k < x.size(); ++k) bits = bits * 31 + (x.data()[k] > 0.0);
  a.tape->note_branch(bits);
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

// Smooth "sinc-like" gains used by the stereographic maps. Each maps u >= 0
// to f(u)/u with the removable singularity at 0 filled in by its series.
namespace gain {

inline constexpr double kSeries = 1e-4;

inline double tanh_over(double u) { return std::abs(u) < kSeries ? 1.0 - u * u / 3.0 : std::tanh(u) / u; }
inline double tanh_over_d(double u) {
  if (std::abs(u) < kSeries) return -2.0 * u / 3.0;
  const double th = std::tanh(u);
  return ((1.0 - th * th) * u - th) / (u * u);
}
inline double tan_over(double u) { return std::abs(u) < kSeries ? 1.0 + u * u / 3.0 : std::tan(u) / u; }
inline double tan_over_d(double u) {
  if (std::abs(u) < kSeries) return 2.0 * u / 3.0;
  const double tn = std::tan(u);
  return ((1.0 + tn * tn) * u - tn) / (u * u);
}
inline double atanh_over(double u) { return std::abs(u) < kSeries ? 1.0 + u * u / 3.0 : std::atanh(u) / u; }
inline double atanh_over_d(double u) {
  if (std::abs(u) < kSeries) return 2.0 * u / 3.0;
  return (u / (1.0 - u * u) - std::atanh(u)) / (u * u);
}
inline double atan_over(double u) { return std::abs(u) < kSeries ? 1.0 - u * u / 3.0 : std::atan(u) / u; }
inline double atan_over_d(double u) {
  if (std::abs(u) < kSeries) return -2.0 * u / 3.0;
  return (u / (1.0 + u * u) - std::atan(u)) / (u * u);
}

}  // namespace gain

inline Var tanh_over(Var a) {
  return unary(a, gain::tanh_over, [](double x, double) { return gain::tanh_over_d(x); });
}
inline Var tan_over(Var a) {
  return unary(a, gain::tan_over, [](double x, double) { return gain::tan_over_d(x); });
}
inline Var atanh_over(Var a) {
  return unary(a, gain::atanh_over, [](double x, double) { return gain::atanh_over_d(x); });
}
inline Var atan_over(Var a) {
  return unary(a, gain::atan_over, [](double x, double) { return gain::atan_over_d(x); });
}

// ---------------------------------------------------------------------------
// Losses

// Mean softmax cross-entropy of logits[rows] against labels.
inline Var cross_entropy(Var logits, const std::vector<int>& rows, const std::vector<int>& labels) {
  if (rows.empty()) throw InputError("cross_entropy: empty mask");
  const Mat& z = logits.value();
  const double inv = 1.0 / static_cast<double>(rows.size());
  Mat probs(rows.size(), z.cols());
  double loss = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= z.rows() || rows[k] >= static_cast<int>(labels.size()))
      throw InputError("cross_entropy: row " + std::to_string(rows[k]) + " out of range");
    if (labels[rows[k]] < 0 || labels[rows[k]] >= z.cols())
      throw InputError("cross_entropy: label " + std::to_string(labels[rows[k]]) + " outside [0, " +
                       std::to_string(z.cols()) + ")");
    Eigen::RowVectorXd r = z.row(rows[k]);
    const double m = r.maxCoeff();
    Eigen::RowVectorXd e = (r.array() - m).exp().matrix();
    const double s = e.sum();
    loss += -(r(labels[rows[k]]) - m - std::log(s));
    probs.row(k) = e / s;
  }
  int il = logits.id;
  return logits.tape->record(Mat::Constant(1, 1, loss * inv), {logits},
                             [il, rows, labels, probs, inv](Tape& t, const Mat& g) {
                               Mat full = Mat::Zero(t.value(il).rows(), t.value(il).cols());
                               for (std::size_t k = 0; k < rows.size(); ++k) {
                                 full.row(rows[k]) += probs.row(k) * (g(0, 0) * inv);
                                 full(rows[k], labels[rows[k]]) -= g(0, 0) * inv;
                               }
                               t.accumulate(il, full);
                             });
}

// Mean binary cross-entropy of sigmoid(logits) (n x 1) against 0/1 targets.
inline Var bce_with_logits(Var logits, const std::vector<double>& targets) {
  const Mat& z = logits.value();
  if (z.cols() != 1 || z.rows() != static_cast<Eigen::Index>(targets.size()))
    throw InputError("bce_with_logits: shape mismatch");
  if (targets.empty()) throw InputError("bce_with_logits: empty mask");
  const double inv = 1.0 / static_cast<double>(targets.size());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double x = z(i, 0), y = targets[i];
    loss += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
  }
  int il = logits.id;
  return logits.tape->record(Mat::Constant(1, 1, loss * inv), {logits}, [il, targets, inv](Tape& t, const Mat& g) {
    const Mat& z = t.value(il);
    Mat d(z.rows(), 1);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double x = z(i, 0);
      const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      d(i, 0) = (s - targets[i]) * inv * g(0, 0);
    }
    t.accumulate(il, d);
  });
}

}  // namespace cusp::ad
