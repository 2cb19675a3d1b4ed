#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cusp/error.hpp"
#include "cusp/graph.hpp"
#include "cusp/orc.hpp"
#include "cusp/product_manifold.hpp"
#include "cusp/stereo.hpp"

namespace cusp {

enum class GprInit { Ppr, HighPass, Custom };

// Hop weights gamma_0..gamma_L of the polynomial filter sum_l gamma_l lambda^l.
struct GprWeights {
  Eigen::VectorXd gamma;
  GprInit init = GprInit::Custom;
  double alpha = 0.0;
  bool trainable = true;

  int order() const { return static_cast<int>(gamma.size()) - 1; }
};

// gamma_l = alpha (1 - alpha)^l for l < L, gamma_L = (1 - alpha)^L. Sums to 1.
inline GprWeights gpr_weights_ppr(double alpha, int L) {
  detail::require(alpha > 0.0 && alpha < 1.0, "gpr_weights_ppr: alpha must lie in (0, 1)");
  detail::require(L >= 0, "gpr_weights_ppr: negative order");
  GprWeights w{Eigen::VectorXd(L + 1), GprInit::Ppr, alpha, true};
  for (int l = 0; l < L; ++l) w.gamma[l] = alpha * std::pow(1.0 - alpha, l);
  w.gamma[L] = std::pow(1.0 - alpha, L);
  return w;
}

// (-alpha)^l for l = 0..L, in any arithmetic type.
template <typename T>
std::vector<T> highpass_coefficients(const T& alpha, int L) {
  std::vector<T> c;
  T p = T(1);
  for (int l = 0; l <= L; ++l, p *= -alpha) c.push_back(p);
  return c;
}

// Horner evaluation of sum_l c[l] lambda^l.
template <typename T, typename Coeffs>
T polynomial_response(const Coeffs& c, const T& lambda) {
  T acc = T(0);
  for (auto l = static_cast<std::ptrdiff_t>(c.size()) - 1; l >= 0; --l) acc = acc * lambda + T(c[l]);
  return acc;
}

inline GprWeights gpr_weights_highpass(double alpha, int L) {
  detail::require(alpha > 0.0 && alpha < 1.0, "gpr_weights_highpass: alpha must lie in (0, 1)");
  detail::require(L >= 0, "gpr_weights_highpass: negative order");
  auto c = highpass_coefficients(alpha, L);
  return {Eigen::Map<Eigen::VectorXd>(c.data(), L + 1), GprInit::HighPass, alpha, true};
}

inline GprWeights gpr_weights_custom(Eigen::VectorXd gamma) {
  detail::require(gamma.size() >= 1 && gamma.allFinite(), "gpr_weights_custom: need finite weights");
  return {std::move(gamma), GprInit::Custom, 0.0, true};
}

inline double filter_response(const GprWeights& w, double lambda) {
  if (std::abs(lambda) > 1.0 + 1e-9) throw InputError("filter_response: |lambda| > 1");
  return polynomial_response(w.gamma, lambda);
}

// One hop: every component block goes through the kappa-left-multiplication.
inline ProductMatrix propagate_step(const SparseMatrix& a_norm, const ProductMatrix& h) {
  if (a_norm.rows() != h.rows.rows() || a_norm.cols() != h.rows.rows())
    throw InputError("propagate_step: adjacency does not match node count");
  ProductMatrix out{Eigen::MatrixXd(h.rows.rows(), h.rows.cols()), h.signature};
  for (int q = 0; q < h.signature.size(); ++q)
    out.set_block(q, stereo::kappa_left_matmul(a_norm, h.block(q), h.signature[q].curvature));
  return out;
}

// gamma_0 (x) H0  (+)  gamma_1 (x) H1  (+) ... folded left to right, per node and component.
inline ProductMatrix gpr_combine(const GprWeights& w, const std::vector<ProductMatrix>& hops) {
  if (static_cast<int>(hops.size()) != w.order() + 1)
    throw InputError("gpr_combine: " + std::to_string(hops.size()) + " hops for " + std::to_string(w.order() + 1) +
                     " weights");
  const Signature& sig = hops.front().signature;
  const Eigen::Index n = hops.front().rows.rows();
  for (const auto& h : hops)
    if (!(h.signature == sig) || h.rows.rows() != n) throw InputError("gpr_combine: hop shapes differ");
  ProductMatrix out{Eigen::MatrixXd(n, sig.total_dim()), sig};
  for (int q = 0; q < sig.size(); ++q) {
    const double k = sig[q].curvature;
    const int off = sig.offset(q), d = sig[q].dim;
    if (sig[q].kind == ManifoldKind::Euclidean) {
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, d);
      for (int l = 0; l <= w.order(); ++l) acc += w.gamma[l] * hops[l].rows.middleCols(off, d);
      out.set_block(q, acc);
      continue;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd acc = stereo::kappa_scale(w.gamma[0], hops[0].rows.row(i).segment(off, d).transpose(), k);
      for (int l = 1; l <= w.order(); ++l)
        acc = stereo::mobius_add(acc, stereo::kappa_scale(w.gamma[l], hops[l].rows.row(i).segment(off, d).transpose(), k), k);
      out.rows.row(i).segment(off, d) = acc.transpose();
    }
  }
  return out;
}

inline GprWeights truncate(const GprWeights& w, int order) {
  detail::require(order >= 0 && order <= w.order(), "truncate: order out of range");
  GprWeights t = w;
  t.gamma = w.gamma.head(order + 1);
  return t;
}

// [Z^I, Z^(1), ..., Z^(L)]. Entry 0 runs the identity filter (every hop is H0);
// entry l combines hops 0..l with the first l+1 weights of filter l.
struct FilterBank {
  std::vector<ProductMatrix> entries;
  std::vector<GprWeights> weights;
  Eigen::VectorXd epsilon_logits;

  int order() const { return static_cast<int>(entries.size()) - 1; }

  Eigen::VectorXd epsilon() const {
    Eigen::VectorXd e = (epsilon_logits.array() - epsilon_logits.maxCoeff()).exp();
    return e / e.sum();
  }
};

// H^(0..L) with H^(l) = A_n [x] H^(l-1).
inline std::vector<ProductMatrix> propagate_hops(const SparseMatrix& a_norm, const ProductMatrix& h0, int L) {
  std::vector<ProductMatrix> hops{h0};
  for (int l = 1; l <= L; ++l) hops.push_back(propagate_step(a_norm, hops.back()));
  return hops;
}

inline FilterBank build_filter_bank(const SparseMatrix& a_norm, const ProductMatrix& h0,
                                    const std::vector<GprWeights>& banks, int L, int workers = 1) {
  detail::require(L >= 1, "build_filter_bank: L >= 1 required");
  detail::require(static_cast<int>(banks.size()) == L + 1, "build_filter_bank: need one weight vector per entry");
  for (const auto& b : banks) detail::require(b.order() == L, "build_filter_bank: every weight vector needs L+1 entries");
  std::vector<ProductMatrix> hops = propagate_hops(a_norm, h0, L);
  FilterBank bank;
  bank.weights = banks;
  bank.entries.resize(L + 1);
  bank.epsilon_logits = Eigen::VectorXd::Zero(L + 1);
  detail::parallel_for(L + 1, workers, [&](int l) {
    if (l == 0) {
      bank.entries[0] = gpr_combine(banks[0], std::vector<ProductMatrix>(L + 1, h0));
    } else {
      std::vector<ProductMatrix> prefix(hops.begin(), hops.begin() + l + 1);
      bank.entries[l] = gpr_combine(truncate(banks[l], l), prefix);
    }
  });
  return bank;
}

}  // namespace cusp
