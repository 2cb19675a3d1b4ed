#include <gtest/gtest.h>

#include <random>

#include "cusp/cusp_laplacian.hpp"
#include "cusp/spectral_filter.hpp"

using namespace cusp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
SparseMatrix test_adjacency(int n, std::uint64_t seed) {
  Graph g = gen::random_connected(n, 0.3, seed);
  return build_cusp_laplacian(g, compute_all(g, OrcConfig{})).norm_adjacency;
}

ProductMatrix random_points(int n, const Signature& sig, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 0.3);
  MatrixXd v(n, sig.total_dim());
  for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] = nd(rng);
  return product_exp0_rows(v, sig);
}
}  // namespace

TEST(GprWeights, PprSumsToOne) {
  GprWeights w = gpr_weights_ppr(0.3, 10);
  EXPECT_EQ(w.order(), 10);
  EXPECT_NEAR(w.gamma.sum(), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(w.gamma[0], 0.3);
  EXPECT_DOUBLE_EQ(w.gamma[10], std::pow(0.7, 10));
  EXPECT_NEAR(filter_response(w, 1.0), 1.0, 1e-15);
  EXPECT_THROW(gpr_weights_ppr(0.0, 10), InputError);
  EXPECT_THROW(gpr_weights_ppr(1.0, 10), InputError);
}

TEST(GprWeights, HighPassAlternates) {
  GprWeights w = gpr_weights_highpass(0.5, 4);
  VectorXd expect(5);
  expect << 1, -0.5, 0.25, -0.125, 0.0625;
  EXPECT_EQ(w.gamma, expect);
  EXPECT_NEAR(filter_response(gpr_weights_highpass(0.3, 64), 0.4), 1.0 / (1.0 + 0.3 * 0.4), 1e-15);
}

TEST(FilterResponse, HornerAndDomain) {
  VectorXd g(3);
  g << 1, 2, 3;
  GprWeights w = gpr_weights_custom(g);
  EXPECT_DOUBLE_EQ(filter_response(w, 0.5), 1 + 1 + 0.75);
  EXPECT_THROW(filter_response(w, 1.5), InputError);
}

TEST(FilterResponse, PprIsLowPass) {
  for (double a : {0.1, 0.3, 0.5, 0.9}) {
    GprWeights w = gpr_weights_ppr(a, 10);
    for (double lam = -0.99; lam < 0.99; lam += 0.01) EXPECT_LT(std::abs(filter_response(w, lam)), filter_response(w, 1.0));
  }
}

TEST(Propagate, FlatStepIsMatrixProduct) {
  SparseMatrix a = test_adjacency(12, 1);
  Signature sig = Signature::parse("E:3:0");
  ProductMatrix h = random_points(12, sig, 2);
  EXPECT_LT((propagate_step(a, h).rows - MatrixXd(a) * h.rows).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(propagate_step(test_adjacency(5, 1), h), InputError);
}

TEST(Propagate, CurvedStepStaysInDomain) {
  SparseMatrix a = test_adjacency(15, 3);
  Signature sig = Signature::parse("H:3:-1,S:3:1,E:2:0");
  ProductMatrix h = random_points(15, sig, 4);
  std::vector<ProductMatrix> hops = propagate_hops(a, h, 5);
  ASSERT_EQ(hops.size(), 6u);
  for (const auto& p : hops) {
    EXPECT_TRUE(p.rows.allFinite());
    EXPECT_LT(p.block(0).rowwise().norm().maxCoeff(), 1.0);
  }
}

TEST(GprCombine, FlatIsWeightedSum) {
  SparseMatrix a = test_adjacency(10, 5);
  Signature sig = Signature::parse("E:4:0");
  ProductMatrix h = random_points(10, sig, 6);
  auto hops = propagate_hops(a, h, 3);
  GprWeights w = gpr_weights_ppr(0.2, 3);
  MatrixXd expect = MatrixXd::Zero(10, 4);
  for (int l = 0; l <= 3; ++l) expect += w.gamma[l] * hops[l].rows;
  EXPECT_LT((gpr_combine(w, hops).rows - expect).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(gpr_combine(gpr_weights_ppr(0.2, 2), hops), InputError);
}

TEST(GprCombine, SingleWeightIsScaling) {
  Signature sig = Signature::parse("H:3:-0.7");
  ProductMatrix h = random_points(6, sig, 7);
  VectorXd g(1);
  g << 1.0;
  EXPECT_LT((gpr_combine(gpr_weights_custom(g), {h}).rows - h.rows).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FilterBank, ShapesAndIdentityEntry) {
  SparseMatrix a = test_adjacency(10, 8);
  Signature sig = Signature::parse("E:2:0");
  ProductMatrix h = random_points(10, sig, 9);
  const int L = 4;
  std::vector<GprWeights> banks(L + 1, gpr_weights_ppr(0.3, L));
  FilterBank bank = build_filter_bank(a, h, banks, L);
  ASSERT_EQ(bank.order(), L);
  // Entry 0 sees H0 at every hop: (sum gamma) H0 = H0 for ppr weights.
  EXPECT_LT((bank.entries[0].rows - h.rows).cwiseAbs().maxCoeff(), 1e-12);
  // Entry 1 uses hops 0..1 with the first two weights.
  MatrixXd e1 = 0.3 * h.rows + 0.21 * (MatrixXd(a) * h.rows);
  EXPECT_LT((bank.entries[1].rows - e1).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(bank.epsilon().sum(), 1.0, 1e-15);
}

TEST(FilterBank, FlatEntryMatchesSpectralForm) {
  SparseMatrix a = test_adjacency(14, 10);
  Signature sig = Signature::parse("E:3:0");
  ProductMatrix h = random_points(14, sig, 11);
  const int L = 6;
  std::vector<GprWeights> banks(L + 1, gpr_weights_ppr(0.4, L));
  FilterBank bank = build_filter_bank(a, h, banks, L);
  Spectrum s = spectrum(MatrixXd(a), true);
  VectorXd g(s.eigenvalues.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = filter_response(banks[L], std::clamp(s.eigenvalues[i], -1.0, 1.0));
  MatrixXd expect = *s.eigenvectors * g.asDiagonal() * s.eigenvectors->transpose() * h.rows;
  EXPECT_LT((bank.entries[L].rows - expect).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FilterBank, WorkersDoNotChangeResult) {
  SparseMatrix a = test_adjacency(12, 12);
  Signature sig = Signature::parse("H:2:-1,S:2:0.5");
  ProductMatrix h = random_points(12, sig, 13);
  std::vector<GprWeights> banks(4, gpr_weights_ppr(0.3, 3));
  FilterBank one = build_filter_bank(a, h, banks, 3, 1), many = build_filter_bank(a, h, banks, 3, 4);
  for (int l = 0; l <= 3; ++l) EXPECT_EQ(one.entries[l].rows, many.entries[l].rows);
}

TEST(FilterBank, Errors) {
  SparseMatrix a = test_adjacency(6, 14);
  ProductMatrix h = random_points(6, Signature::parse("E:2:0"), 15);
  EXPECT_THROW(build_filter_bank(a, h, {gpr_weights_ppr(0.3, 0)}, 0), InputError);
  EXPECT_THROW(build_filter_bank(a, h, {gpr_weights_ppr(0.3, 2)}, 2), InputError);
  EXPECT_THROW(build_filter_bank(a, h, std::vector<GprWeights>(3, gpr_weights_ppr(0.3, 3)), 2), InputError);
}
