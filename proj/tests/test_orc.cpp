#include <gtest/gtest.h>

#include <algorithm>

#include "cusp/orc.hpp"

using namespace cusp;

namespace {
OrcConfig cfg(double delta, OrcMethod m = OrcMethod::Exact) {
  OrcConfig c;
  c.delta = delta;
  c.method = m;
  c.workers = 1;
  return c;
}
}  // namespace

TEST(Measure, LazyWalk) {
  Graph g = gen::star(4);  // center 0
  Measure m = node_measure(g, 0, 0.4);
  ASSERT_EQ(m.support.size(), 4u);
  double total = 0;
  for (double x : m.mass) total += x;
  EXPECT_NEAR(total, 1.0, 1e-15);
  Measure z = node_measure(g, 0, 0.0);
  EXPECT_EQ(z.support.size(), 3u);  // zero atom at the node itself is dropped
}

TEST(Orc, TriangleAnalytic) {
  Graph k3 = gen::complete(3);
  EXPECT_NEAR(edge_orc(k3, 0, 1, cfg(0.5)), 0.75, 1e-12);
  EXPECT_NEAR(edge_orc(k3, 0, 1, cfg(0.0)), 0.5, 1e-12);
  OrcResult r = compute_all(k3, cfg(0.5));
  for (double x : r.node_orc) EXPECT_NEAR(x, 0.75, 1e-12);
}

TEST(Orc, PathEdge) {
  Graph p = gen::path(3);
  EXPECT_NEAR(edge_orc(p, 0, 1, cfg(0.5)), 0.5, 1e-12);
}

TEST(Orc, SymmetricInEndpoints) {
  Graph g = gen::random_connected(20, 0.2, 4);
  for (const Edge& e : g.edges()) EXPECT_EQ(edge_orc(g, e.u, e.v, cfg(0.3)), edge_orc(g, e.v, e.u, cfg(0.3)));
}

TEST(Orc, AtMostOne) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    Graph g = gen::random_connected(15, 0.3, s);
    OrcResult r = compute_all(g, cfg(0.5));
    for (double x : r.edge_orc) EXPECT_LE(x, 1.0 + 1e-12);
  }
}

TEST(Orc, TreeIsNonPositiveAtDeltaZero) {
  // Leaf edges are exactly flat; every internal edge is negative.
  Graph t = gen::tree(2, 5);
  OrcResult r = compute_all(t, cfg(0.0));
  double mean = 0.0;
  for (int i = 0; i < t.num_edges(); ++i) {
    const Edge& e = t.edges()[i];
    mean += r.edge_orc[i] / t.num_edges();
    if (t.degree(e.u) == 1 || t.degree(e.v) == 1)
      EXPECT_NEAR(r.edge_orc[i], 0.0, 1e-12);
    else
      EXPECT_LT(r.edge_orc[i], 0.0);
  }
  EXPECT_LT(mean, 0.0);
}

TEST(Orc, NodeCurvatureIsMeanOfIncidentEdges) {
  Graph g(3, {{0, 1}, {0, 2}});
  std::vector<double> ev{0.4, -0.2};
  EXPECT_NEAR(node_orc(ev, g, 0), 0.1, 1e-15);
}

TEST(Orc, WorkerCountDoesNotChangeResult) {
  Graph g = gen::random_connected(40, 0.15, 8);
  OrcConfig a = cfg(0.5), b = cfg(0.5);
  b.workers = 4;
  EXPECT_EQ(compute_all(g, a).edge_orc, compute_all(g, b).edge_orc);
}

TEST(Orc, SinkhornCloseToExact) {
  Graph g = gen::random_connected(20, 0.25, 2);
  OrcConfig s = cfg(0.5, OrcMethod::Sinkhorn);
  s.sinkhorn_eps = 1e-3;
  s.sinkhorn_max_iters = 20000;
  OrcResult ex = compute_all(g, cfg(0.5)), sk = compute_all(g, s);
  for (int i = 0; i < g.num_edges(); ++i) EXPECT_NEAR(sk.edge_orc[i], ex.edge_orc[i], 0.05);
}

TEST(Orc, BoundsBracketExact) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    Graph g = gen::random_connected(18, 0.25, s);
    OrcResult r = compute_all(g, cfg(0.0));
    for (int i = 0; i < g.num_edges(); ++i) {
      OrcBounds b = orc_bounds(g, g.edges()[i].u, g.edges()[i].v);
      EXPECT_LE(b.lower, r.edge_orc[i] + 1e-12);
      EXPECT_GE(b.upper, r.edge_orc[i] - 1e-12);
      EXPECT_DOUBLE_EQ(b.approx, 0.5 * (b.lower + b.upper));
    }
  }
}

TEST(Orc, BoundsMethodUsesMidpoint) {
  Graph k3 = gen::complete(3);
  EXPECT_NEAR(edge_orc(k3, 0, 1, cfg(0.0, OrcMethod::Bounds)), 0.5, 1e-12);
}

TEST(Orc, Errors) {
  Graph g(3, {{0, 1}});
  EXPECT_THROW(compute_all(g, cfg(0.5)), InputError);  // node 2 isolated
  Graph k3 = gen::complete(3);
  EXPECT_THROW(edge_orc(gen::path(3), 0, 2, cfg(0.5)), InputError);
  EXPECT_THROW(compute_all(k3, cfg(1.5)), InputError);
  Graph w(3, {{0, 1, 2.0}, {1, 2, 1.0}, {0, 2, 1.0}});
  EXPECT_THROW(orc_bounds(w, 0, 1), InputError);
  EXPECT_THROW(parse_orc_method("hungarian"), InputError);
}

TEST(Orc, NormalizeClamps) {
  Graph s = gen::star(30);
  OrcConfig c = cfg(0.0);
  OrcResult raw = compute_all(s, c);
  c.normalize = true;
  OrcResult clamped = compute_all(s, c);
  for (double x : clamped.edge_orc) EXPECT_GE(x, -1.0);
  for (int i = 0; i < s.num_edges(); ++i) EXPECT_DOUBLE_EQ(clamped.edge_orc[i], clamp_curvature(raw.edge_orc[i]));
}

TEST(Histogram, FortyBinsCoverRange) {
  std::vector<double> v{-1.0, -0.99, 0.0, 0.5, 1.0, 2.0};
  Histogram h = histogram(v);
  ASSERT_EQ(h.counts.size(), 40u);
  EXPECT_EQ(h.counts.front(), 2);
  EXPECT_EQ(h.counts.back(), 2);
  int total = 0;
  for (int c : h.counts) total += c;
  EXPECT_EQ(total, 6);
  EXPECT_DOUBLE_EQ(h.bin_left(0), -1.0);
  EXPECT_DOUBLE_EQ(h.bin_right(39), 1.0);
}
