#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cusp/error.hpp"

namespace cusp {

// Successive-shortest-path min-cost flow over real capacities. Shortest paths
// use queue-based Bellman-Ford, which tolerates the negative residual costs.
// Sized for transport problems with a few dozen atoms per side.
template <typename Flow, typename Cost>
class MinCostFlow {
 public:
  struct Arc {
    int to;
    Flow cap;
    Cost cost;
    int rev;
  };

  explicit MinCostFlow(int n) : g_(n) {}

  int add_arc(int from, int to, Flow cap, Cost cost) {
    g_[from].push_back({to, cap, cost, static_cast<int>(g_[to].size())});
    g_[to].push_back({from, Flow(0), -cost, static_cast<int>(g_[from].size()) - 1});
    return static_cast<int>(g_[from].size()) - 1;
  }

  // Pushes up to `limit` units from s to t. Returns {flow, cost}.
  std::pair<Flow, Cost> solve(int s, int t, Flow limit, Flow zero_tol) {
    const int n = static_cast<int>(g_.size());
    Flow flow = 0;
    Cost cost = 0;
    std::vector<Cost> dist(n);
    std::vector<int> prev_node(n), prev_arc(n);
    std::vector<char> in_queue(n);
    while (limit - flow > zero_tol) {
      std::fill(dist.begin(), dist.end(), std::numeric_limits<Cost>::infinity());
      std::fill(in_queue.begin(), in_queue.end(), 0);
      dist[s] = 0;
      std::deque<int> q{s};
      in_queue[s] = 1;
      while (!q.empty()) {
        int u = q.front();
        q.pop_front();
        in_queue[u] = 0;
        for (int k = 0; k < static_cast<int>(g_[u].size()); ++k) {
          const Arc& a = g_[u][k];
          if (a.cap <= zero_tol) continue;
          Cost nd = dist[u] + a.cost;
          // strict improvement beyond rounding noise; avoids cycling on zero-cost loops
          if (nd < dist[a.to] - 1e-15) {
            dist[a.to] = nd;
            prev_node[a.to] = u;
            prev_arc[a.to] = k;
            if (!in_queue[a.to]) {
              q.push_back(a.to);
              in_queue[a.to] = 1;
            }
          }
        }
      }
      if (dist[t] == std::numeric_limits<Cost>::infinity()) break;
      Flow push = limit - flow;
      for (int v = t; v != s; v = prev_node[v]) push = std::min(push, g_[prev_node[v]][prev_arc[v]].cap);
      for (int v = t; v != s; v = prev_node[v]) {
        Arc& a = g_[prev_node[v]][prev_arc[v]];
        a.cap -= push;
        g_[v][a.rev].cap += push;
      }
      flow += push;
      cost += push * dist[t];
    }
    return {flow, cost};
  }

  const std::vector<Arc>& arcs(int u) const { return g_[u]; }

 private:
  std::vector<std::vector<Arc>> g_;
};

struct TransportResult {
  double cost = 0.0;
  Eigen::MatrixXd plan;  // rows: source atoms, cols: target atoms
};

// Exact optimal transport between discrete measures a and b under `cost`.
// Infinite cost entries mean "no path" and are rejected.
inline TransportResult transport_exact(std::span<const double> a, std::span<const double> b,
                                       const Eigen::MatrixXd& cost) {
  const int na = static_cast<int>(a.size()), nb = static_cast<int>(b.size());
  if (cost.rows() != na || cost.cols() != nb) throw InputError("transport_exact: cost shape mismatch");
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j)
      if (!std::isfinite(cost(i, j)))
        throw InputError("transport_exact: missing distance for pair (" + std::to_string(i) + "," +
                         std::to_string(j) + ")");
  const int s = na + nb, t = na + nb + 1;
  MinCostFlow<double, double> mcf(na + nb + 2);
  double total = 0.0;
  for (int i = 0; i < na; ++i) {
    mcf.add_arc(s, i, a[i], 0.0);
    total += a[i];
  }
  std::vector<std::vector<int>> handle(na, std::vector<int>(nb));
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) handle[i][j] = mcf.add_arc(i, na + j, std::numeric_limits<double>::infinity(), cost(i, j));
  for (int j = 0; j < nb; ++j) mcf.add_arc(na + j, t, b[j], 0.0);

  auto [flow, c] = mcf.solve(s, t, total, 1e-15);
  if (std::abs(flow - total) > 1e-9)
    throw NumericalError("transport_exact: could not route all mass (" + std::to_string(flow) + " of " +
                         std::to_string(total) + ")");
  TransportResult r;
  r.plan = Eigen::MatrixXd::Zero(na, nb);
  double plan_cost = 0.0;
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) {
      const auto& arc = mcf.arcs(i)[handle[i][j]];
      double moved = mcf.arcs(na + j)[arc.rev].cap;
      r.plan(i, j) = moved;
      plan_cost += moved * cost(i, j);
    }
  // recompute from the plan: the accumulated path cost carries per-path rounding
  r.cost = plan_cost;
  (void)c;
  return r;
}

struct SinkhornOptions {
  double eps = 0.01;
  int max_iters = 1000;
  double tol = 1e-9;
};

struct SinkhornResult {
  double cost = 0.0;  // <P, C> for the entropic plan P
  bool converged = false;
  int iterations = 0;
  double marginal_error = 0.0;  // L1 violation of the row marginal
};

// Entropic OT with log-domain Sinkhorn updates on dual potentials.
inline SinkhornResult transport_sinkhorn(std::span<const double> a, std::span<const double> b,
                                         const Eigen::MatrixXd& cost, const SinkhornOptions& opt) {
  if (!(opt.eps > 0.0)) throw InputError("sinkhorn: eps must be positive");
  if (opt.max_iters < 1) throw InputError("sinkhorn: max_iters must be positive");
  const int na = static_cast<int>(a.size()), nb = static_cast<int>(b.size());
  if (cost.rows() != na || cost.cols() != nb) throw InputError("sinkhorn: cost shape mismatch");
  if (!cost.allFinite()) throw InputError("sinkhorn: missing distance in cost matrix");

  // zero-mass atoms carry no plan entries
  std::vector<int> ia, ib;
  for (int i = 0; i < na; ++i)
    if (a[i] > 0.0) ia.push_back(i);
  for (int j = 0; j < nb; ++j)
    if (b[j] > 0.0) ib.push_back(j);
  const int ma = static_cast<int>(ia.size()), mb = static_cast<int>(ib.size());
  Eigen::MatrixXd c(ma, mb);
  Eigen::VectorXd loga(ma), logb(mb);
  for (int i = 0; i < ma; ++i) {
    loga[i] = std::log(a[ia[i]]);
    for (int j = 0; j < mb; ++j) c(i, j) = cost(ia[i], ib[j]);
  }
  for (int j = 0; j < mb; ++j) logb[j] = std::log(b[ib[j]]);

  const double eps = opt.eps;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(ma), g = Eigen::VectorXd::Zero(mb);
  auto lse = [](const Eigen::VectorXd& v) {
    double m = v.maxCoeff();
    return m + std::log((v.array() - m).exp().sum());
  };
  SinkhornResult r;
  Eigen::VectorXd tmp_a(mb), tmp_b(ma);
  for (int it = 1; it <= opt.max_iters; ++it) {
    for (int i = 0; i < ma; ++i) {
      for (int j = 0; j < mb; ++j) tmp_a[j] = (g[j] - c(i, j)) / eps;
      f[i] = eps * (loga[i] - lse(tmp_a));
    }
    for (int j = 0; j < mb; ++j) {
      for (int i = 0; i < ma; ++i) tmp_b[i] = (f[i] - c(i, j)) / eps;
      g[j] = eps * (logb[j] - lse(tmp_b));
    }
    double err = 0.0;
    for (int i = 0; i < ma; ++i) {
      double row = 0.0;
      for (int j = 0; j < mb; ++j) row += std::exp((f[i] + g[j] - c(i, j)) / eps);
      err += std::abs(row - a[ia[i]]);
    }
    r.iterations = it;
    r.marginal_error = err;
    if (err < opt.tol) {
      r.converged = true;
      break;
    }
  }
  double total = 0.0;
  for (int i = 0; i < ma; ++i)
    for (int j = 0; j < mb; ++j) total += std::exp((f[i] + g[j] - c(i, j)) / eps) * c(i, j);
  r.cost = total;
  return r;
}

}  // namespace cusp
