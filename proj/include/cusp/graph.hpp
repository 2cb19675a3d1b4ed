#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "cusp/error.hpp"

namespace cusp {

using NodeId = int;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Edge {
  NodeId u = 0;
  NodeId v = 0;
  double weight = 1.0;
};

// Simple undirected weighted graph. Edges are stored once with u < v;
// neighbor lists (CSR) are built at construction. Immutable afterwards.
class Graph {
 public:
  Graph() = default;

  Graph(int n, std::vector<Edge> edges,
        std::optional<Eigen::MatrixXd> features = std::nullopt,
        std::optional<std::vector<int>> labels = std::nullopt)
      : n_(n), edges_(std::move(edges)), features_(std::move(features)), labels_(std::move(labels)) {
    detail::require(n_ >= 0, "graph: negative node count");
    index_.reserve(edges_.size() * 2);
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      Edge& e = edges_[i];
      if (e.u < 0 || e.v < 0 || e.u >= n_ || e.v >= n_)
        throw InputError("graph: edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                         ") out of range for n=" + std::to_string(n_));
      if (e.u == e.v) throw InputError("graph: self-loop at node " + std::to_string(e.u));
      if (!(e.weight > 0.0) || !std::isfinite(e.weight))
        throw InputError("graph: edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                         ") has non-positive weight");
      if (e.u > e.v) std::swap(e.u, e.v);
      if (!index_.emplace(key(e.u, e.v), i).second)
        throw InputError("graph: duplicate edge (" + std::to_string(e.u) + "," +
                         std::to_string(e.v) + ")");
    }
    if (features_) detail::require(features_->rows() == n_, "graph: feature row count != n");
    if (labels_) detail::require(static_cast<int>(labels_->size()) == n_, "graph: label count != n");
    build_csr();
  }

  int num_nodes() const { return n_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }

  // Neighbors of x in ascending id order, with matching edge indices.
  std::span<const NodeId> neighbors(NodeId x) const {
    return {adj_.data() + offsets_[x], adj_.data() + offsets_[x + 1]};
  }
  std::span<const int> incident_edges(NodeId x) const {
    return {adj_edge_.data() + offsets_[x], adj_edge_.data() + offsets_[x + 1]};
  }
  int degree(NodeId x) const { return offsets_[x + 1] - offsets_[x]; }

  double weighted_degree(NodeId x) const {
    double s = 0.0;
    for (int e : incident_edges(x)) s += edges_[e].weight;
    return s;
  }

  std::optional<int> edge_index(NodeId u, NodeId v) const {
    if (u > v) std::swap(u, v);
    auto it = index_.find(key(u, v));
    if (it == index_.end()) return std::nullopt;
    return static_cast<int>(it->second);
  }
  bool has_edge(NodeId u, NodeId v) const { return edge_index(u, v).has_value(); }

  bool is_unweighted() const {
    return std::all_of(edges_.begin(), edges_.end(), [](const Edge& e) { return e.weight == 1.0; });
  }

  const std::optional<Eigen::MatrixXd>& features() const { return features_; }
  const std::optional<std::vector<int>>& labels() const { return labels_; }

  Graph with_features(Eigen::MatrixXd f) const { return Graph(n_, edges_, std::move(f), labels_); }
  Graph with_labels(std::vector<int> y) const { return Graph(n_, edges_, features_, std::move(y)); }

  // Same nodes, features and labels; only the listed edges kept.
  Graph edge_subgraph(std::span<const int> keep) const {
    std::vector<Edge> sub;
    sub.reserve(keep.size());
    for (int e : keep) sub.push_back(edges_.at(e));
    return Graph(n_, std::move(sub), features_, labels_);
  }

  std::vector<NodeId> isolated_nodes() const {
    std::vector<NodeId> out;
    for (NodeId x = 0; x < n_; ++x)
      if (degree(x) == 0) out.push_back(x);
    return out;
  }

 private:
  std::uint64_t key(NodeId u, NodeId v) const {
    return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint32_t>(v);
  }

  void build_csr() {
    offsets_.assign(n_ + 1, 0);
    for (const Edge& e : edges_) {
      ++offsets_[e.u + 1];
      ++offsets_[e.v + 1];
    }
    for (int i = 0; i < n_; ++i) offsets_[i + 1] += offsets_[i];
    std::vector<std::pair<NodeId, int>> slots(offsets_[n_]);
    std::vector<int> fill(offsets_.begin(), offsets_.end() - 1);
    for (int i = 0; i < num_edges(); ++i) {
      slots[fill[edges_[i].u]++] = {edges_[i].v, i};
      slots[fill[edges_[i].v]++] = {edges_[i].u, i};
    }
    adj_.resize(slots.size());
    adj_edge_.resize(slots.size());
    for (int x = 0; x < n_; ++x) {
      std::sort(slots.begin() + offsets_[x], slots.begin() + offsets_[x + 1]);
      for (int k = offsets_[x]; k < offsets_[x + 1]; ++k) {
        adj_[k] = slots[k].first;
        adj_edge_[k] = slots[k].second;
      }
    }
  }

  int n_ = 0;
  std::vector<Edge> edges_;
  std::optional<Eigen::MatrixXd> features_;
  std::optional<std::vector<int>> labels_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<int> offsets_{0};
  std::vector<NodeId> adj_;
  std::vector<int> adj_edge_;
};

// ---------------------------------------------------------------------------
// Edge list I/O

struct EdgeListFile {
  Graph graph;
  std::vector<std::int64_t> original_ids;  // original_ids[i] = id in the file of node i
};

// Parses `u v [w]` lines; `#` starts a comment. Without n_hint, ids are
// compacted to 0..n-1 in order of first appearance. With n_hint, ids are
// kept as-is and must lie in [0, n_hint). Repeated edges keep the first weight.
inline EdgeListFile parse_edge_list(std::istream& in, std::optional<int> n_hint = std::nullopt,
                                    const std::string& source = "<stream>") {
  std::unordered_map<std::int64_t, NodeId> remap;
  std::vector<std::int64_t> ids;
  std::vector<Edge> edges;
  std::unordered_map<std::uint64_t, bool> seen;
  auto map_id = [&](std::int64_t raw, int lineno) -> NodeId {
    if (n_hint) {
      if (raw < 0 || raw >= *n_hint)
        throw InputError(source + ":" + std::to_string(lineno) + ": node id " + std::to_string(raw) +
                         " outside [0, " + std::to_string(*n_hint) + ")");
      return static_cast<NodeId>(raw);
    }
    auto [it, inserted] = remap.emplace(raw, static_cast<NodeId>(ids.size()));
    if (inserted) ids.push_back(raw);
    return it->second;
  };

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    auto where = [&] { return source + ":" + std::to_string(lineno) + ": "; };
    if (tok.size() < 2 || tok.size() > 3) throw InputError(where() + "expected `u v [weight]`");
    std::int64_t a = 0, b = 0;
    double w = 1.0;
    auto int_ok = [](const std::string& t, std::int64_t& out) {
      auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
      return ec == std::errc() && p == t.data() + t.size();
    };
    if (!int_ok(tok[0], a) || !int_ok(tok[1], b)) throw InputError(where() + "node ids must be integers");
    if (tok.size() == 3) {
      auto [p, ec] = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), w);
      if (ec != std::errc() || p != tok[2].data() + tok[2].size()) throw InputError(where() + "bad weight '" + tok[2] + "'");
    }
    if (a == b)
      throw InputError(source + ":" + std::to_string(lineno) + ": self-loop at node " + std::to_string(a));
    if (!(w > 0.0) || !std::isfinite(w))
      throw InputError(source + ":" + std::to_string(lineno) + ": weight must be positive");
    NodeId u = map_id(a, lineno), v = map_id(b, lineno);
    auto k = (static_cast<std::uint64_t>(std::min(u, v)) << 32) | static_cast<std::uint32_t>(std::max(u, v));
    if (!seen.emplace(k, true).second) continue;
    edges.push_back({u, v, w});
  }
  int n = n_hint ? *n_hint : static_cast<int>(ids.size());
  if (n_hint) {
    ids.resize(n);
    for (int i = 0; i < n; ++i) ids[i] = i;
  }
  return {Graph(n, std::move(edges)), std::move(ids)};
}

inline EdgeListFile read_edge_list(const std::string& path, std::optional<int> n_hint = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open edge list '" + path + "'");
  return parse_edge_list(in, n_hint, path);
}

inline Graph load_edge_list(const std::string& path, std::optional<int> n_hint = std::nullopt) {
  return read_edge_list(path, n_hint).graph;
}

inline void write_edge_list(std::ostream& out, const Graph& g) {
  out << "# nodes " << g.num_nodes() << " edges " << g.num_edges() << "\n";
  out << std::setprecision(17);
  for (const Edge& e : g.edges()) {
    out << e.u << ' ' << e.v;
    if (e.weight != 1.0) out << ' ' << e.weight;
    out << '\n';
  }
}

inline void save_edge_list(const std::string& path, const Graph& g) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  write_edge_list(out, g);
}

// Headerless numeric CSV; row i belongs to node i.
inline Eigen::MatrixXd load_features_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open features '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InputError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw InputError(path + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError("features file '" + path + "' is empty");
  Eigen::MatrixXd f(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) f(i, j) = rows[i][j];
  return f;
}

inline std::vector<int> load_labels_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open labels '" + path + "'");
  std::vector<int> y;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      y.push_back(std::stoi(line));
    } catch (const std::exception&) {
      throw InputError(path + ":" + std::to_string(lineno) + ": bad label '" + line + "'");
    }
    if (y.back() < 0) throw InputError(path + ":" + std::to_string(lineno) + ": negative label");
  }
  return y;
}

// ---------------------------------------------------------------------------
// Generators

namespace gen {

inline Graph path(int n) {
  detail::require(n >= 1, "path: need at least one node");
  std::vector<Edge> e;
  for (int i = 0; i + 1 < n; ++i) e.push_back({i, i + 1, 1.0});
  return Graph(n, std::move(e));
}

inline Graph cycle(int n) {
  detail::require(n >= 3, "cycle: need at least three nodes");
  std::vector<Edge> e;
  for (int i = 0; i < n; ++i) e.push_back({i, (i + 1) % n, 1.0});
  return Graph(n, std::move(e));
}

// Node 0 is the hub; n counts all nodes.
inline Graph star(int n) {
  detail::require(n >= 2, "star: need at least two nodes");
  std::vector<Edge> e;
  for (int i = 1; i < n; ++i) e.push_back({0, i, 1.0});
  return Graph(n, std::move(e));
}

inline Graph complete(int n) {
  detail::require(n >= 1, "complete: need at least one node");
  std::vector<Edge> e;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) e.push_back({i, j, 1.0});
  return Graph(n, std::move(e));
}

// Balanced tree: every internal node has `branching` children, `depth` levels below the root.
inline Graph tree(int branching, int depth) {
  detail::require(branching >= 1 && depth >= 0, "tree: branching >= 1 and depth >= 0 required");
  std::vector<Edge> e;
  int n = 1;
  std::vector<int> frontier{0};
  for (int d = 0; d < depth; ++d) {
    std::vector<int> next;
    for (int p : frontier)
      for (int c = 0; c < branching; ++c) {
        e.push_back({p, n, 1.0});
        next.push_back(n++);
      }
    frontier = std::move(next);
  }
  return Graph(n, std::move(e));
}

struct SbmParams {
  std::vector<int> block_sizes;
  double p_in = 0.1;
  double p_out = 0.01;
  std::uint64_t seed = 0;
  int max_attempts = 100;
};

// Stochastic block model. Labels are block ids. Draws containing isolated
// nodes are rejected and redrawn from the next seed in sequence.
inline Graph sbm(const SbmParams& p) {
  detail::require(!p.block_sizes.empty(), "sbm: no blocks");
  detail::require(p.p_in >= 0.0 && p.p_in <= 1.0 && p.p_out >= 0.0 && p.p_out <= 1.0,
                  "sbm: probabilities must lie in [0, 1]");
  int n = 0;
  std::vector<int> labels;
  for (std::size_t b = 0; b < p.block_sizes.size(); ++b) {
    detail::require(p.block_sizes[b] > 0, "sbm: block sizes must be positive");
    n += p.block_sizes[b];
    labels.insert(labels.end(), p.block_sizes[b], static_cast<int>(b));
  }
  detail::require(n >= 2, "sbm: need at least two nodes");
  for (int attempt = 0; attempt < p.max_attempts; ++attempt) {
    std::mt19937_64 rng(p.seed + static_cast<std::uint64_t>(attempt));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Edge> e;
    std::vector<int> deg(n, 0);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        double prob = labels[i] == labels[j] ? p.p_in : p.p_out;
        if (unif(rng) < prob) {
          e.push_back({i, j, 1.0});
          ++deg[i];
          ++deg[j];
        }
      }
    if (std::find(deg.begin(), deg.end(), 0) == deg.end())
      return Graph(n, std::move(e), std::nullopt, labels);
  }
  throw InputError("sbm: every draw contained isolated nodes; increase edge probabilities");
}

// Connected G(n, p): a random spanning tree plus independent extra edges.
inline Graph random_connected(int n, double p, std::uint64_t seed) {
  detail::require(n >= 1, "random_connected: zero-node request");
  detail::require(p >= 0.0 && p <= 1.0, "random_connected: p must lie in [0, 1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Edge> e;
  std::vector<std::vector<bool>> used(n, std::vector<bool>(n, false));
  for (int i = 1; i < n; ++i) {
    int parent = order[std::uniform_int_distribution<int>(0, i - 1)(rng)];
    int child = order[i];
    e.push_back({parent, child, 1.0});
    used[parent][child] = used[child][parent] = true;
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (!used[i][j] && unif(rng) < p) e.push_back({i, j, 1.0});
  return Graph(n, std::move(e));
}

struct GeneratorParams {
  int n = 0;
  int branching = 2;
  int depth = 0;
  SbmParams sbm;
  double p = 0.1;
  std::uint64_t seed = 0;
};

inline Graph generate(std::string_view kind, const GeneratorParams& params) {
  if (kind == "path") return path(params.n);
  if (kind == "cycle") return cycle(params.n);
  if (kind == "star") return star(params.n);
  if (kind == "complete") return complete(params.n);
  if (kind == "tree") return tree(params.branching, params.depth);
  if (kind == "sbm") return sbm(params.sbm);
  if (kind == "random") return random_connected(params.n, params.p, params.seed);
  throw InputError("unknown generator '" + std::string(kind) + "'");
}

}  // namespace gen

// ---------------------------------------------------------------------------
// Statistics and operators

// Edge homophily: fraction of edges whose endpoints share a label.
inline double homophily_ratio(const Graph& g) {
  if (!g.labels()) throw InputError("homophily_ratio: graph has no labels");
  if (g.num_edges() == 0) throw InputError("homophily_ratio: graph has no edges");
  const auto& y = *g.labels();
  int same = 0;
  for (const Edge& e : g.edges()) same += y[e.u] == y[e.v];
  return static_cast<double>(same) / g.num_edges();
}

inline SparseMatrix adjacency(const Graph& g, std::span<const double> weights = {}) {
  detail::require(weights.empty() || static_cast<int>(weights.size()) == g.num_edges(),
                  "adjacency: weight override length != edge count");
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(2 * g.num_edges());
  for (int i = 0; i < g.num_edges(); ++i) {
    const Edge& e = g.edges()[i];
    double w = weights.empty() ? e.weight : weights[i];
    if (w == 0.0) continue;
    t.emplace_back(e.u, e.v, w);
    t.emplace_back(e.v, e.u, w);
  }
  SparseMatrix a(g.num_nodes(), g.num_nodes());
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

// D^{-1/2} A D^{-1/2}. Zero-degree nodes are an error.
inline SparseMatrix normalize_symmetric(const SparseMatrix& a) {
  Eigen::VectorXd deg = a * Eigen::VectorXd::Ones(a.cols());
  Eigen::VectorXd inv_sqrt(deg.size());
  for (Eigen::Index i = 0; i < deg.size(); ++i) {
    if (!(deg[i] > 0.0)) throw InputError("node " + std::to_string(i) + " has zero degree");
    inv_sqrt[i] = 1.0 / std::sqrt(deg[i]);
  }
  SparseMatrix out = a;
  for (Eigen::Index r = 0; r < out.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(out, r); it; ++it) it.valueRef() *= inv_sqrt[r] * inv_sqrt[it.col()];
  return out;
}

inline SparseMatrix normalized_adjacency(const Graph& g, std::span<const double> weights = {}) {
  return normalize_symmetric(adjacency(g, weights));
}

// Combinatorial Laplacian D - A.
inline Eigen::MatrixXd laplacian_dense(const Graph& g) {
  Eigen::MatrixXd a = Eigen::MatrixXd(adjacency(g));
  Eigen::MatrixXd l = -a;
  l.diagonal() = a.rowwise().sum();
  return l;
}

}  // namespace cusp
