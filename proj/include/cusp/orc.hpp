#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "cusp/error.hpp"
#include "cusp/graph.hpp"
#include "cusp/transport.hpp"

namespace cusp {

// Probability measure on graph nodes.
struct Measure {
  std::vector<NodeId> support;
  std::vector<double> mass;
};

enum class OrcMethod { Exact, Sinkhorn, Bounds };

inline const char* to_string(OrcMethod m) {
  switch (m) {
    case OrcMethod::Exact: return "exact";
    case OrcMethod::Sinkhorn: return "sinkhorn";
    case OrcMethod::Bounds: return "bounds";
  }
  return "?";
}

inline OrcMethod parse_orc_method(const std::string& s) {
  if (s == "exact") return OrcMethod::Exact;
  if (s == "sinkhorn") return OrcMethod::Sinkhorn;
  if (s == "bounds") return OrcMethod::Bounds;
  throw InputError("unknown ORC method '" + s + "' (expected exact|sinkhorn|bounds)");
}

struct OrcConfig {
  double delta = 0.5;  // mass kept at the node by the lazy walk
  OrcMethod method = OrcMethod::Exact;
  // Unset: 0.01 x median pairwise support distance, chosen per edge.
  std::optional<double> sinkhorn_eps;
  int sinkhorn_max_iters = 1000;
  double sinkhorn_tol = 1e-9;
  bool normalize = false;  // clamp curvatures to [-1, 1]
  int workers = 0;         // 0: CUSP_WORKERS env var, else hardware concurrency

  void validate() const {
    detail::require(delta >= 0.0 && delta <= 1.0, "orc: delta must lie in [0, 1]");
    detail::require(!sinkhorn_eps || *sinkhorn_eps > 0.0, "orc: sinkhorn eps must be positive");
    detail::require(sinkhorn_max_iters >= 1, "orc: sinkhorn max iterations must be positive");
    detail::require(sinkhorn_tol > 0.0, "orc: sinkhorn tolerance must be positive");
  }
};

struct OrcResult {
  std::vector<double> edge_orc;  // aligned with Graph::edges()
  std::vector<double> node_orc;
  OrcMethod method = OrcMethod::Exact;
  bool normalized = false;
  int unconverged_edges = 0;  // Sinkhorn only

  double edge(const Graph& g, NodeId u, NodeId v) const {
    auto e = g.edge_index(u, v);
    if (!e) throw InputError("orc: (" + std::to_string(u) + "," + std::to_string(v) + ") is not an edge");
    return edge_orc[*e];
  }
};

// Lazy random-walk measure: delta at x, (1 - delta)/deg(x) on each neighbor.
// Atoms with zero mass are omitted.
inline Measure node_measure(const Graph& g, NodeId x, double delta) {
  detail::require(delta >= 0.0 && delta <= 1.0, "node_measure: delta must lie in [0, 1]");
  const int d = g.degree(x);
  if (d == 0) throw InputError("node_measure: node " + std::to_string(x) + " is isolated");
  Measure m;
  if (delta > 0.0) {
    m.support.push_back(x);
    m.mass.push_back(delta);
  }
  if (delta < 1.0) {
    const double share = (1.0 - delta) / d;
    for (NodeId y : g.neighbors(x)) {
      m.support.push_back(y);
      m.mass.push_back(share);
    }
  }
  return m;
}

namespace detail {

inline bool sorted_intersect(std::span<const NodeId> a, std::span<const NodeId> b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) return true;
    if (*i < *j)
      ++i;
    else
      ++j;
  }
  return false;
}

inline int sorted_intersection_size(std::span<const NodeId> a, std::span<const NodeId> b) {
  int count = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) {
      ++count;
      ++i;
      ++j;
    } else if (*i < *j) {
      ++i;
    } else {
      ++j;
    }
  }
  return count;
}

// Hop distance between x and y when both lie within one hop of an edge's
// endpoints; such pairs are never more than three hops apart.
inline double local_hop_distance(const Graph& g, NodeId x, NodeId y) {
  if (x == y) return 0.0;
  if (g.has_edge(x, y)) return 1.0;
  if (sorted_intersect(g.neighbors(x), g.neighbors(y))) return 2.0;
  return 3.0;
}

inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("CUSP_WORKERS")) {
    int w = std::atoi(env);
    if (w > 0) return w;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

template <typename Fn>
void parallel_for(int count, int workers, Fn&& fn) {
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

// Hop-distance matrix between two supports, computed by BFS on g.
inline Eigen::MatrixXd support_distances(const Graph& g, const Measure& mu, const Measure& nu) {
  const int na = static_cast<int>(mu.support.size()), nb = static_cast<int>(nu.support.size());
  Eigen::MatrixXd d(na, nb);
  std::vector<int> dist(g.num_nodes(), -1);
  std::vector<NodeId> frontier, next, touched;
  for (int i = 0; i < na; ++i) {
    // targets left to find
    std::vector<char> want(g.num_nodes(), 0);
    int remaining = 0;
    for (NodeId y : nu.support)
      if (!want[y]) {
        want[y] = 1;
        ++remaining;
      }
    frontier.assign(1, mu.support[i]);
    dist[mu.support[i]] = 0;
    touched.assign(1, mu.support[i]);
    if (want[mu.support[i]]) --remaining;
    for (int depth = 1; remaining > 0 && !frontier.empty(); ++depth) {
      next.clear();
      for (NodeId u : frontier)
        for (NodeId w : g.neighbors(u))
          if (dist[w] < 0) {
            dist[w] = depth;
            touched.push_back(w);
            next.push_back(w);
            if (want[w]) --remaining;
          }
      frontier.swap(next);
    }
    for (int j = 0; j < nb; ++j) {
      int dj = dist[nu.support[j]];
      d(i, j) = dj < 0 ? std::numeric_limits<double>::infinity() : static_cast<double>(dj);
    }
    for (NodeId t : touched) dist[t] = -1;
  }
  return d;
}

inline void check_measure(const Measure& m, const char* what) {
  if (m.support.size() != m.mass.size()) throw InputError(std::string(what) + ": support/mass size mismatch");
  double s = 0.0;
  for (double x : m.mass) {
    if (!(x >= 0.0)) throw InputError(std::string(what) + ": negative mass");
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-9) throw InputError(std::string(what) + ": masses do not sum to 1");
}

// Exact W1 between measures; dist(i, j) is the ground distance between
// mu.support[i] and nu.support[j].
inline double wasserstein_exact(const Measure& mu, const Measure& nu, const Eigen::MatrixXd& dist) {
  check_measure(mu, "wasserstein_exact(mu)");
  check_measure(nu, "wasserstein_exact(nu)");
  return transport_exact(mu.mass, nu.mass, dist).cost;
}

inline double median_positive(const Eigen::MatrixXd& d) {
  std::vector<double> v;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d.data()[i] > 0.0) v.push_back(d.data()[i]);
  if (v.empty()) return 1.0;
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

inline SinkhornResult wasserstein_sinkhorn(const Measure& mu, const Measure& nu, const Eigen::MatrixXd& dist,
                                           const OrcConfig& cfg) {
  check_measure(mu, "wasserstein_sinkhorn(mu)");
  check_measure(nu, "wasserstein_sinkhorn(nu)");
  SinkhornOptions opt;
  opt.eps = cfg.sinkhorn_eps ? *cfg.sinkhorn_eps : 0.01 * median_positive(dist);
  opt.max_iters = cfg.sinkhorn_max_iters;
  opt.tol = cfg.sinkhorn_tol;
  return transport_sinkhorn(mu.mass, nu.mass, dist, opt);
}

struct OrcBounds {
  double lower = 0.0;
  double upper = 0.0;
  double approx = 0.0;
};

// Jost-Liu bounds on the curvature of the non-lazy (delta = 0) walk,
// and their midpoint as a linear-time estimate. Unweighted graphs only.
inline OrcBounds orc_bounds(const Graph& g, NodeId u, NodeId v) {
  if (!g.has_edge(u, v)) throw InputError("orc_bounds: (" + std::to_string(u) + "," + std::to_string(v) + ") is not an edge");
  if (!g.is_unweighted()) throw InputError("orc_bounds: unsupported method for weighted graphs");
  const double du = g.degree(u), dv = g.degree(v);
  const double tri = detail::sorted_intersection_size(g.neighbors(u), g.neighbors(v));
  const double dmin = std::min(du, dv), dmax = std::max(du, dv);
  auto pos = [](double x) { return x > 0.0 ? x : 0.0; };
  OrcBounds b;
  b.upper = tri / dmax;
  b.lower = -pos(1.0 - 1.0 / du - 1.0 / dv - tri / dmin) - pos(1.0 - 1.0 / du - 1.0 / dv - tri / dmax) + tri / dmax;
  b.approx = 0.5 * (b.lower + b.upper);
  return b;
}

struct EdgeCurvature {
  double value = 0.0;
  bool converged = true;
};

inline EdgeCurvature edge_orc_detail(const Graph& g, NodeId u, NodeId v, const OrcConfig& cfg) {
  if (!g.has_edge(u, v)) throw InputError("edge_orc: (" + std::to_string(u) + "," + std::to_string(v) + ") is not an edge");
  if (cfg.method == OrcMethod::Bounds) return {orc_bounds(g, u, v).approx, true};
  // Canonical orientation makes the result exactly symmetric in (u, v).
  if (u > v) std::swap(u, v);
  Measure mu = node_measure(g, u, cfg.delta);
  Measure nu = node_measure(g, v, cfg.delta);
  Eigen::MatrixXd dist(mu.support.size(), nu.support.size());
  for (std::size_t i = 0; i < mu.support.size(); ++i)
    for (std::size_t j = 0; j < nu.support.size(); ++j)
      dist(i, j) = detail::local_hop_distance(g, mu.support[i], nu.support[j]);
  if (cfg.method == OrcMethod::Exact) return {1.0 - wasserstein_exact(mu, nu, dist), true};
  SinkhornResult s = wasserstein_sinkhorn(mu, nu, dist, cfg);
  return {1.0 - s.cost, s.converged};
}

// 1 - W1(m_u, m_v) / d(u, v) with d(u, v) = 1 for adjacent nodes.
inline double edge_orc(const Graph& g, NodeId u, NodeId v, const OrcConfig& cfg) {
  return edge_orc_detail(g, u, v, cfg).value;
}

inline double node_orc(std::span<const double> edge_values, const Graph& g, NodeId x) {
  detail::require(static_cast<int>(edge_values.size()) == g.num_edges(), "node_orc: edge map does not cover the graph");
  if (g.degree(x) == 0) throw InputError("node_orc: node " + std::to_string(x) + " is isolated");
  double s = 0.0;
  for (int e : g.incident_edges(x)) s += edge_values[e];
  return s / g.degree(x);
}

inline double clamp_curvature(double k) { return std::clamp(k, -1.0, 1.0); }

// Per-edge and per-node curvature of the whole graph. Edge results are
// written by index, so any worker count gives identical output.
inline OrcResult compute_all(const Graph& g, const OrcConfig& cfg) {
  cfg.validate();
  if (auto iso = g.isolated_nodes(); !iso.empty())
    throw InputError("compute_all: node " + std::to_string(iso.front()) + " is isolated");
  if (cfg.method == OrcMethod::Bounds && !g.is_unweighted())
    throw InputError("compute_all: bounds method requires an unweighted graph");
  OrcResult r;
  r.method = cfg.method;
  r.normalized = cfg.normalize;
  r.edge_orc.assign(g.num_edges(), 0.0);
  std::vector<char> converged(g.num_edges(), 1);
  detail::parallel_for(g.num_edges(), detail::resolve_workers(cfg.workers), [&](int i) {
    const Edge& e = g.edges()[i];
    EdgeCurvature c = edge_orc_detail(g, e.u, e.v, cfg);
    r.edge_orc[i] = cfg.normalize ? clamp_curvature(c.value) : c.value;
    converged[i] = c.converged;
  });
  r.unconverged_edges = static_cast<int>(std::count(converged.begin(), converged.end(), 0));
  r.node_orc.resize(g.num_nodes());
  for (NodeId x = 0; x < g.num_nodes(); ++x) r.node_orc[x] = node_orc(r.edge_orc, g, x);
  return r;
}

// Returns a copy with every value clamped to [-1, 1] and node values recomputed.
inline OrcResult normalized(const Graph& g, OrcResult r) {
  for (double& k : r.edge_orc) k = clamp_curvature(k);
  for (NodeId x = 0; x < g.num_nodes(); ++x) r.node_orc[x] = node_orc(r.edge_orc, g, x);
  r.normalized = true;
  return r;
}

struct Histogram {
  double lo = -1.0;
  double hi = 1.0;
  std::vector<int> counts;

  double bin_left(int i) const { return lo + (hi - lo) * i / static_cast<double>(counts.size()); }
  double bin_right(int i) const { return lo + (hi - lo) * (i + 1) / static_cast<double>(counts.size()); }
  double bin_center(int i) const { return 0.5 * (bin_left(i) + bin_right(i)); }
};

// Equal-width histogram on [lo, hi]; values outside are counted in the end bins.
inline Histogram histogram(std::span<const double> values, int bins = 40, double lo = -1.0, double hi = 1.0) {
  detail::require(bins >= 1, "histogram: need at least one bin");
  detail::require(hi > lo, "histogram: empty range");
  Histogram h{lo, hi, std::vector<int>(bins, 0)};
  for (double x : values) {
    int b = static_cast<int>(std::floor((x - lo) / (hi - lo) * bins));
    h.counts[std::clamp(b, 0, bins - 1)]++;
  }
  return h;
}

}  // namespace cusp
