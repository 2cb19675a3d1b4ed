#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "cusp/error.hpp"
#include "cusp/product_manifold.hpp"
#include "cusp/stereo.hpp"

namespace cusp {

// Random Fourier features of node curvature, lifted onto a product manifold.
//
// The Euclidean map sends k to sqrt(1/d_C) [cos w_1 k, sin w_1 k, ..., cos w_dC k, sin w_dC k],
// whose inner products approximate the shift-invariant kernel with spectral
// density p(w). Component q then gets a linear image of those 2 d_C features,
// exp0-mapped with that component's curvature.
struct CurvatureEncoder {
  Eigen::VectorXd frequencies;  // d_C samples of p(w)
  Signature signature;          // encoding layout; dims sum to d_C
  std::vector<Eigen::MatrixXd> projectors;  // per component: 2 d_C x dim_q

  int dim() const { return static_cast<int>(frequencies.size()); }
};

// Splits d_C over the components of `model` in proportion to their dims.
inline Signature encoding_signature(const Signature& model, int d_c) {
  detail::require(d_c >= model.size(), "curvature encoder: d_C smaller than the number of components");
  const int total = model.total_dim();
  std::vector<Component> comps = model.components();
  int used = 0;
  for (auto& c : comps) {
    c.dim = std::max(1, d_c * c.dim / total);
    used += c.dim;
  }
  for (int q = 0; used != d_c; q = (q + 1) % static_cast<int>(comps.size())) {
    if (used < d_c) {
      ++comps[q].dim;
      ++used;
    } else if (comps[q].dim > 1) {
      --comps[q].dim;
      --used;
    }
  }
  return Signature(std::move(comps));
}

enum class ProjectorInit { Random, Identity, Zero };

// Frequencies ~ N(0, sigma^2). Identity projectors copy the first dim_q
// Euclidean features of each block (starting after the previous blocks).
inline CurvatureEncoder make_curvature_encoder(int d_c, const Signature& model, std::uint64_t seed, double sigma = 1.0,
                                               ProjectorInit init = ProjectorInit::Random) {
  detail::require(d_c >= 1, "curvature encoder: d_C must be positive");
  detail::require(sigma > 0.0, "curvature encoder: sigma must be positive");
  CurvatureEncoder enc;
  enc.signature = encoding_signature(model, d_c);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  enc.frequencies.resize(d_c);
  for (int i = 0; i < d_c; ++i) enc.frequencies[i] = normal(rng);
  int start = 0;
  for (int q = 0; q < enc.signature.size(); ++q) {
    const int dq = enc.signature[q].dim;
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(2 * d_c, dq);
    if (init == ProjectorInit::Identity) {
      for (int j = 0; j < dq && start + j < 2 * d_c; ++j) p(start + j, j) = 1.0;
    } else if (init == ProjectorInit::Random) {
      std::normal_distribution<double> w(0.0, std::sqrt(1.0 / (2.0 * d_c)));
      for (Eigen::Index k = 0; k < p.size(); ++k) p.data()[k] = w(rng);
    }
    start += dq;
    enc.projectors.push_back(std::move(p));
  }
  return enc;
}

inline Eigen::VectorXd phi_euclidean(const CurvatureEncoder& enc, double orc) {
  const int d = enc.dim();
  const double s = std::sqrt(1.0 / d);
  Eigen::VectorXd out(2 * d);
  for (int i = 0; i < d; ++i) {
    out[2 * i] = s * std::cos(enc.frequencies[i] * orc);
    out[2 * i + 1] = s * std::sin(enc.frequencies[i] * orc);
  }
  return out;
}

// n x 2 d_C matrix of Euclidean encodings.
inline Eigen::MatrixXd phi_euclidean_rows(const CurvatureEncoder& enc, const std::vector<double>& orc) {
  Eigen::MatrixXd out(orc.size(), 2 * enc.dim());
  for (std::size_t x = 0; x < orc.size(); ++x) out.row(x) = phi_euclidean(enc, orc[x]).transpose();
  return out;
}

inline double curvature_kernel(const CurvatureEncoder& enc, double a, double b) {
  return phi_euclidean(enc, a).dot(phi_euclidean(enc, b));
}

inline ProductPoint phi_product(const CurvatureEncoder& enc, double orc) {
  if (static_cast<int>(enc.projectors.size()) != enc.signature.size())
    throw InputError("phi_product: projector count does not match the encoding signature");
  Eigen::VectorXd e = phi_euclidean(enc, orc);
  ProductPoint p{Eigen::VectorXd(enc.signature.total_dim()), enc.signature};
  for (int q = 0; q < enc.signature.size(); ++q) {
    const auto& pq = enc.projectors[q];
    if (pq.rows() != e.size() || pq.cols() != enc.signature[q].dim)
      throw InputError("phi_product: projector shape inconsistent with the d_C split");
    p.coords.segment(enc.signature.offset(q), enc.signature[q].dim) =
        stereo::exp0(pq.transpose() * e, enc.signature[q].curvature);
  }
  return p;
}

inline ProductMatrix encode_all(const CurvatureEncoder& enc, const std::vector<double>& node_orc) {
  ProductMatrix m{Eigen::MatrixXd(node_orc.size(), enc.signature.total_dim()), enc.signature};
  for (std::size_t x = 0; x < node_orc.size(); ++x) {
    if (!std::isfinite(node_orc[x])) throw InputError("encode_all: missing curvature for node " + std::to_string(x));
    m.rows.row(x) = phi_product(enc, node_orc[x]).coords.transpose();
  }
  return m;
}

}  // namespace cusp
