#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cusp/error.hpp"
#include "cusp/stereo.hpp"

namespace cusp {

enum class ManifoldKind { Hyperbolic, Spherical, Euclidean };

inline char kind_letter(ManifoldKind k) {
  switch (k) {
    case ManifoldKind::Hyperbolic: return 'H';
    case ManifoldKind::Spherical: return 'S';
    case ManifoldKind::Euclidean: return 'E';
  }
  return '?';
}

struct Component {
  ManifoldKind kind = ManifoldKind::Euclidean;
  int dim = 0;
  double curvature = 0.0;
  bool trainable = true;  // ignored for E
};

inline std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

// Ordered product of constant-curvature components. Component q occupies
// columns [offset(q), offset(q) + dim) of every point.
class Signature {
 public:
  Signature() = default;
  explicit Signature(std::vector<Component> comps) : comps_(std::move(comps)) { validate(); }

  const std::vector<Component>& components() const { return comps_; }
  int size() const { return static_cast<int>(comps_.size()); }
  const Component& operator[](int q) const { return comps_[q]; }
  int total_dim() const { return offsets_.empty() ? 0 : offsets_.back(); }
  int offset(int q) const { return offsets_[q]; }

  // Same layout with new curvatures (kinds must keep their sign).
  Signature with_curvatures(const std::vector<double>& k) const {
    detail::require(static_cast<int>(k.size()) == size(), "signature: curvature count mismatch");
    auto c = comps_;
    for (int q = 0; q < size(); ++q) c[q].curvature = k[q];
    return Signature(std::move(c));
  }

  // `H:16:-0.45,S:16:0.25,E:16:0`
  std::string to_string() const {
    std::string s;
    for (int q = 0; q < size(); ++q) {
      if (q) s += ',';
      s += kind_letter(comps_[q].kind);
      s += ':' + std::to_string(comps_[q].dim) + ':' + format_double(comps_[q].curvature);
    }
    return s;
  }

  static Signature parse(const std::string& text) {
    std::vector<Component> comps;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      std::stringstream is(item);
      std::string kind, dim, curv;
      if (!std::getline(is, kind, ':') || !std::getline(is, dim, ':') || !std::getline(is, curv, ':'))
        throw InputError("signature: expected kind:dim:curvature, got '" + item + "'");
      Component c;
      if (kind == "H")
        c.kind = ManifoldKind::Hyperbolic;
      else if (kind == "S")
        c.kind = ManifoldKind::Spherical;
      else if (kind == "E")
        c.kind = ManifoldKind::Euclidean;
      else
        throw InputError("signature: unknown component kind '" + kind + "'");
      try {
        std::size_t used = 0;
        c.dim = std::stoi(dim, &used);
        if (used != dim.size()) throw std::invalid_argument(dim);
        c.curvature = std::stod(curv, &used);
        if (used != curv.size()) throw std::invalid_argument(curv);
      } catch (const std::logic_error&) {
        throw InputError("signature: bad number in '" + item + "'");
      }
      c.trainable = c.kind != ManifoldKind::Euclidean;
      comps.push_back(c);
    }
    return Signature(std::move(comps));
  }

  bool operator==(const Signature& o) const {
    if (size() != o.size()) return false;
    for (int q = 0; q < size(); ++q)
      if (comps_[q].kind != o.comps_[q].kind || comps_[q].dim != o.comps_[q].dim ||
          comps_[q].curvature != o.comps_[q].curvature)
        return false;
    return true;
  }

 private:
  void validate() {
    detail::require(!comps_.empty(), "signature: no components");
    int euclid = 0;
    offsets_.assign(1, 0);
    for (const Component& c : comps_) {
      detail::require(c.dim > 0, "signature: component dimensions must be positive");
      switch (c.kind) {
        case ManifoldKind::Hyperbolic:
          detail::require(c.curvature < 0.0, "signature: H component needs negative curvature");
          break;
        case ManifoldKind::Spherical:
          detail::require(c.curvature > 0.0, "signature: S component needs positive curvature");
          break;
        case ManifoldKind::Euclidean:
          detail::require(c.curvature == 0.0, "signature: E component needs zero curvature");
          ++euclid;
          break;
      }
      offsets_.push_back(offsets_.back() + c.dim);
    }
    detail::require(euclid <= 1, "signature: at most one Euclidean component");
  }

  std::vector<Component> comps_;
  std::vector<int> offsets_{0};
};

// A point of the product manifold: concatenated component coordinates.
struct ProductPoint {
  Eigen::VectorXd coords;
  Signature signature;

  Eigen::VectorXd block(int q) const { return coords.segment(signature.offset(q), signature[q].dim); }
};

// n points of the product manifold, one per row.
struct ProductMatrix {
  Eigen::MatrixXd rows;
  Signature signature;

  Eigen::MatrixXd block(int q) const { return rows.middleCols(signature.offset(q), signature[q].dim); }
  void set_block(int q, const Eigen::MatrixXd& b) { rows.middleCols(signature.offset(q), signature[q].dim) = b; }
};

inline ProductPoint product_exp0(const Eigen::VectorXd& v, const Signature& sig) {
  if (v.size() != sig.total_dim()) throw InputError("product_exp0: dimension mismatch");
  ProductPoint p{Eigen::VectorXd(v.size()), sig};
  for (int q = 0; q < sig.size(); ++q)
    p.coords.segment(sig.offset(q), sig[q].dim) = stereo::exp0(v.segment(sig.offset(q), sig[q].dim), sig[q].curvature);
  return p;
}

inline Eigen::VectorXd product_log0(const ProductPoint& p) {
  const Signature& sig = p.signature;
  if (p.coords.size() != sig.total_dim()) throw InputError("product_log0: dimension mismatch");
  Eigen::VectorXd v(p.coords.size());
  for (int q = 0; q < sig.size(); ++q) v.segment(sig.offset(q), sig[q].dim) = stereo::log0(p.block(q), sig[q].curvature);
  return v;
}

inline ProductMatrix product_exp0_rows(const Eigen::MatrixXd& v, const Signature& sig) {
  if (v.cols() != sig.total_dim()) throw InputError("product_exp0_rows: dimension mismatch");
  ProductMatrix m{Eigen::MatrixXd(v.rows(), v.cols()), sig};
  for (int q = 0; q < sig.size(); ++q)
    m.set_block(q, stereo::exp0_rows(v.middleCols(sig.offset(q), sig[q].dim), sig[q].curvature));
  return m;
}

inline Eigen::MatrixXd product_log0_rows(const ProductMatrix& m) {
  Eigen::MatrixXd v(m.rows.rows(), m.rows.cols());
  for (int q = 0; q < m.signature.size(); ++q)
    v.middleCols(m.signature.offset(q), m.signature[q].dim) = stereo::log0_rows(m.block(q), m.signature[q].curvature);
  return v;
}

// sqrt(sum_q d_q(x_q, y_q)^2).
inline double product_distance(const ProductPoint& x, const ProductPoint& y) {
  if (!(x.signature == y.signature)) throw InputError("product_distance: signature mismatch");
  double s = 0.0;
  for (int q = 0; q < x.signature.size(); ++q) {
    double d = stereo::distance(x.block(q), y.block(q), x.signature[q].curvature);
    s += d * d;
  }
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Curvature parameterization

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

// Keeps each component's curvature sign fixed: H -> -softplus(raw),
// S -> softplus(raw), E -> 0.
inline double clamp_trainable_curvature(double raw, ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::Hyperbolic: return -softplus(raw);
    case ManifoldKind::Spherical: return softplus(raw);
    case ManifoldKind::Euclidean: return 0.0;
  }
  return 0.0;
}

inline double curvature_to_raw(double curvature, ManifoldKind kind) {
  if (kind == ManifoldKind::Euclidean) return 0.0;
  return softplus_inverse(std::abs(curvature));
}

// ---------------------------------------------------------------------------
// Signature estimation from a curvature histogram

struct CurvatureBin {
  double curvature = 0.0;
  double frequency = 0.0;
};

struct WeightedKMeans {
  std::vector<double> centroids;  // ascending
  std::vector<int> assignment;    // per input point
  double inertia = 0.0;           // weighted within-cluster sum of squares
};

// Lloyd iterations on weighted 1-D data with k-means++ seeding and restarts.
// Clusters come back ordered by centroid; ties go to the lower index.
inline WeightedKMeans weighted_kmeans(const std::vector<double>& x, const std::vector<double>& w, int k,
                                      std::uint64_t seed, int restarts = 50, int max_iters = 100) {
  const int n = static_cast<int>(x.size());
  detail::require(k >= 1 && k <= n, "weighted_kmeans: need 1 <= k <= number of points");
  std::mt19937_64 rng(seed);
  WeightedKMeans best;
  best.inertia = std::numeric_limits<double>::infinity();
  auto assign = [&](const std::vector<double>& c, std::vector<int>& a) {
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
      int arg = 0;
      double bd = std::abs(x[i] - c[0]);
      for (int j = 1; j < k; ++j) {
        double d = std::abs(x[i] - c[j]);
        if (d < bd) {
          bd = d;
          arg = j;
        }
      }
      a[i] = arg;
      inertia += w[i] * bd * bd;
    }
    return inertia;
  };
  for (int r = 0; r < restarts; ++r) {
    std::vector<double> c;
    std::discrete_distribution<int> first(w.begin(), w.end());
    c.push_back(x[first(rng)]);
    while (static_cast<int>(c.size()) < k) {
      std::vector<double> d2(n);
      for (int i = 0; i < n; ++i) {
        double m = std::numeric_limits<double>::infinity();
        for (double cj : c) m = std::min(m, (x[i] - cj) * (x[i] - cj));
        d2[i] = w[i] * m;
      }
      if (std::accumulate(d2.begin(), d2.end(), 0.0) <= 0.0) {
        // fewer distinct weighted points than k: reuse the furthest unused value
        for (int i = 0; i < n; ++i)
          if (std::find(c.begin(), c.end(), x[i]) == c.end()) {
            c.push_back(x[i]);
            break;
          }
        if (static_cast<int>(c.size()) < k) c.push_back(c.back());
        continue;
      }
      std::discrete_distribution<int> next(d2.begin(), d2.end());
      c.push_back(x[next(rng)]);
    }
    std::vector<int> a(n);
    double inertia = assign(c, a);
    for (int it = 0; it < max_iters; ++it) {
      std::vector<double> sw(k, 0.0), sx(k, 0.0);
      for (int i = 0; i < n; ++i) {
        sw[a[i]] += w[i];
        sx[a[i]] += w[i] * x[i];
      }
      for (int j = 0; j < k; ++j)
        if (sw[j] > 0.0) c[j] = sx[j] / sw[j];
      std::vector<int> a2(n);
      double next = assign(c, a2);
      bool same = a2 == a;
      a.swap(a2);
      inertia = next;
      if (same) break;
    }
    if (inertia < best.inertia - 1e-15) {
      best.inertia = inertia;
      best.centroids = c;
      best.assignment = a;
    }
  }
  // relabel clusters by ascending centroid
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return best.centroids[a] < best.centroids[b]; });
  std::vector<int> rank(k);
  for (int j = 0; j < k; ++j) rank[order[j]] = j;
  std::vector<double> sorted(k);
  for (int j = 0; j < k; ++j) sorted[j] = best.centroids[order[j]];
  best.centroids = sorted;
  for (int& a : best.assignment) a = rank[a];
  return best;
}

struct PreferredDims {
  int hyperbolic = 16;
  int spherical = 16;
  int euclidean = 16;
};

struct SignatureEstimate {
  Signature signature;
  int clusters = 0;                  // K picked by the elbow rule
  std::vector<double> inertia;       // inertia for K = 1..K_max
  std::vector<double> cluster_mass;  // per signature component
};

struct SignatureOptions {
  double eps = 0.05;  // |centroid| <= eps counts as flat
  int h_max = 2;
  int s_max = 2;
  int total_dim = 48;
  std::optional<PreferredDims> preferred;
  double elbow_gain = 0.10;  // stop when one more cluster explains < 10% of total variance
  std::uint64_t seed = 0;
};

inline SignatureEstimate estimate_signature(const std::vector<CurvatureBin>& hist, const SignatureOptions& opt) {
  detail::require(!hist.empty(), "estimate_signature: empty histogram");
  detail::require(opt.eps > 0.0, "estimate_signature: eps must be positive");
  detail::require(opt.h_max >= 0 && opt.s_max >= 0, "estimate_signature: negative component caps");
  double total = 0.0;
  for (const auto& b : hist) {
    detail::require(b.frequency >= 0.0 && std::isfinite(b.frequency), "estimate_signature: negative frequency");
    detail::require(std::isfinite(b.curvature), "estimate_signature: non-finite curvature");
    total += b.frequency;
  }
  detail::require(total > 0.0, "estimate_signature: all frequencies are zero");

  std::vector<double> x, w;
  for (const auto& b : hist)
    if (b.frequency > 0.0) {
      x.push_back(b.curvature);
      w.push_back(b.frequency / total);
    }
  const int k_cap = std::min<int>(opt.h_max + opt.s_max + 1, static_cast<int>(x.size()));

  SignatureEstimate est;
  std::vector<WeightedKMeans> fits;
  for (int k = 1; k <= k_cap; ++k) {
    fits.push_back(weighted_kmeans(x, w, k, opt.seed + static_cast<std::uint64_t>(k)));
    est.inertia.push_back(fits.back().inertia);
  }
  // Elbow: smallest K whose successor explains < elbow_gain of the total variance.
  int k_best = 1;
  const double base = est.inertia.front();
  while (k_best < k_cap && base > 0.0 && (est.inertia[k_best - 1] - est.inertia[k_best]) >= opt.elbow_gain * base)
    ++k_best;
  est.clusters = k_best;
  const WeightedKMeans& fit = fits[k_best - 1];

  struct Pick {
    ManifoldKind kind;
    double curvature;
    double mass;
  };
  std::vector<Pick> hyp, sph;
  double flat_mass = 0.0;
  bool any_flat = false;
  for (int c = 0; c < k_best; ++c) {
    double sum = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (fit.assignment[i] == c) {
        sum += w[i] * x[i];
        mass += w[i];
      }
    if (mass <= 0.0) continue;
    const double kc = sum / mass;  // frequency-weighted centroid
    if (kc < -opt.eps && static_cast<int>(hyp.size()) < opt.h_max) {
      hyp.push_back({ManifoldKind::Hyperbolic, kc, mass});
    } else if (kc > opt.eps && static_cast<int>(sph.size()) < opt.s_max) {
      sph.push_back({ManifoldKind::Spherical, kc, mass});
    } else {
      flat_mass += mass;
      any_flat = true;
    }
  }
  std::vector<Pick> picks = hyp;
  picks.insert(picks.end(), sph.begin(), sph.end());
  if (any_flat) picks.push_back({ManifoldKind::Euclidean, 0.0, flat_mass});

  std::vector<int> dims(picks.size());
  if (opt.preferred) {
    for (std::size_t q = 0; q < picks.size(); ++q) {
      switch (picks[q].kind) {
        case ManifoldKind::Hyperbolic: dims[q] = opt.preferred->hyperbolic; break;
        case ManifoldKind::Spherical: dims[q] = opt.preferred->spherical; break;
        case ManifoldKind::Euclidean: dims[q] = opt.preferred->euclidean; break;
      }
    }
  } else {
    const int q_count = static_cast<int>(picks.size());
    detail::require(opt.total_dim >= q_count, "estimate_signature: total dimension smaller than component count");
    double mass = 0.0;
    for (const auto& p : picks) mass += p.mass;
    int used = 0;
    for (int q = 0; q < q_count; ++q) {
      dims[q] = static_cast<int>(std::floor(opt.total_dim * picks[q].mass / mass));
      used += dims[q];
    }
    std::vector<int> by_mass(q_count);
    std::iota(by_mass.begin(), by_mass.end(), 0);
    std::stable_sort(by_mass.begin(), by_mass.end(), [&](int a, int b) { return picks[a].mass > picks[b].mass; });
    for (int r = 0; used < opt.total_dim; ++r, ++used) dims[by_mass[r % q_count]]++;
    // every component needs at least one dimension; take from the largest
    for (int q = 0; q < q_count; ++q)
      while (dims[q] == 0) {
        int donor = static_cast<int>(std::max_element(dims.begin(), dims.end()) - dims.begin());
        --dims[donor];
        ++dims[q];
      }
  }
  std::vector<Component> comps;
  for (std::size_t q = 0; q < picks.size(); ++q) {
    comps.push_back({picks[q].kind, dims[q], picks[q].curvature, picks[q].kind != ManifoldKind::Euclidean});
    est.cluster_mass.push_back(picks[q].mass);
  }
  est.signature = Signature(std::move(comps));
  return est;
}

}  // namespace cusp
