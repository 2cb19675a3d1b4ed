#include <gtest/gtest.h>

#include <random>

#include "cusp/cusp_laplacian.hpp"

using namespace cusp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
OrcResult uniform(const Graph& g, double k) {
  OrcResult r;
  r.edge_orc.assign(g.num_edges(), k);
  r.node_orc.assign(g.num_nodes(), k);
  return r;
}

OrcResult random_orc(const Graph& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 0.99);
  OrcResult r = uniform(g, 0.0);
  for (double& k : r.edge_orc) k = u(rng);
  return r;
}
}  // namespace

TEST(CurvatureWeight, Anchors) {
  EXPECT_NEAR(curvature_weight(0.0), 0.3678794, 1e-7);
  EXPECT_NEAR(curvature_weight(-1.0), 0.6065307, 1e-7);
  EXPECT_EQ(curvature_weight(1.0), 0.0);
  EXPECT_THROW(curvature_weight(1.5), InputError);
}

TEST(CurvatureWeight, StrictlyDecreasing) {
  for (double k = -1.0; k < 0.98; k += 0.01) EXPECT_GT(curvature_weight(k), curvature_weight(k + 0.01));
}

TEST(CuspLaplacian, TriangleUniform) {
  Graph k3 = gen::complete(3);
  CuspLaplacian cl = build_cusp_laplacian(k3, uniform(k3, 0.75));
  for (double w : cl.weights) EXPECT_NEAR(w, std::exp(-4.0), 1e-15);
  MatrixXd an(cl.norm_adjacency);
  EXPECT_NEAR(an(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(an(0, 0), 0.0, 1e-15);
  Spectrum s = spectrum(MatrixXd(cl.norm_laplacian), false);
  EXPECT_NEAR(s.eigenvalues[0], 0.0, 1e-12);
  EXPECT_NEAR(s.eigenvalues[1], 1.5, 1e-12);
  EXPECT_NEAR(s.eigenvalues[2], 1.5, 1e-12);
}

TEST(CuspLaplacian, SingleEdge) {
  Graph g(2, {{0, 1}});
  CuspLaplacian cl = build_cusp_laplacian(g, uniform(g, 0.0));
  const double w = std::exp(-1.0);
  MatrixXd l(cl.laplacian);
  EXPECT_NEAR(l(0, 0), w, 1e-15);
  EXPECT_NEAR(l(0, 1), -w, 1e-15);
  EXPECT_NEAR(l(1, 1), w, 1e-15);
}

TEST(CuspLaplacian, RowSumsVanishAndQuadraticForm) {
  Graph g = gen::random_connected(25, 0.2, 1);
  CuspLaplacian cl = build_cusp_laplacian(g, random_orc(g, 2));
  MatrixXd l(cl.laplacian);
  EXPECT_LT(l.rowwise().sum().cwiseAbs().maxCoeff(), 1e-14);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 100; ++t) {
    VectorXd f(g.num_nodes());
    for (auto& x : f) x = nd(rng);
    double q = 0.0;
    for (int i = 0; i < g.num_edges(); ++i) {
      const Edge& e = g.edges()[i];
      q += cl.weights[i] * (f[e.u] - f[e.v]) * (f[e.u] - f[e.v]);
    }
    EXPECT_NEAR(f.dot(l * f), q, 1e-10 * (1.0 + q));
  }
}

TEST(CuspLaplacian, UniformCurvatureRecoversClassicalNormalization) {
  Graph g = gen::random_connected(20, 0.25, 5);
  CuspLaplacian cl = build_cusp_laplacian(g, uniform(g, -0.3));
  MatrixXd classical = MatrixXd::Identity(20, 20) - MatrixXd(normalized_adjacency(g));
  EXPECT_LT((MatrixXd(cl.norm_laplacian) - classical).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CuspLaplacian, NativeWeightsMultiply) {
  Graph g(3, {{0, 1, 2.0}, {1, 2, 1.0}});
  CuspLaplacian cl = build_cusp_laplacian(g, uniform(g, 0.0));
  EXPECT_NEAR(cl.weights[0], 2.0 * std::exp(-1.0), 1e-15);
}

TEST(CuspLaplacian, ClampsInputCurvature) {
  Graph g(2, {{0, 1}});
  OrcResult r = uniform(g, -3.0);
  CuspLaplacian cl = build_cusp_laplacian(g, r);
  EXPECT_NEAR(cl.weights[0], curvature_weight(-1.0), 1e-15);
}

TEST(CuspLaplacian, ZeroWeightedDegreeNamesNode) {
  Graph g(3, {{0, 1}, {1, 2}});
  OrcResult r = uniform(g, 0.0);
  r.edge_orc[0] = 1.0;
  try {
    build_cusp_laplacian(g, r);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("node 0"), std::string::npos);
  }
  EXPECT_THROW(build_cusp_laplacian(g, OrcResult{}), InputError);
}

TEST(VerifySpectrum, StarHasZeroEigenvalue) {
  Graph s = gen::star(9);
  OrcResult r = compute_all(s, OrcConfig{});
  SpectrumReport rep = verify_spectrum(build_cusp_laplacian(s, r));
  EXPECT_NEAR(rep.min_eig, 0.0, 1e-9);
  EXPECT_TRUE(rep.pass());
}

TEST(VerifySpectrum, RandomCurvatureSweep) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    Graph g = gen::random_connected(5 + static_cast<int>(s), 0.3, s);
    SpectrumReport rep = verify_spectrum(build_cusp_laplacian(g, random_orc(g, s + 100)));
    EXPECT_TRUE(rep.psd);
    EXPECT_TRUE(rep.in_range);
    EXPECT_LE(rep.kernel_vector_residual, 1e-8);
    Spectrum a = spectrum(MatrixXd(build_cusp_laplacian(g, random_orc(g, s + 100)).norm_adjacency), false);
    EXPECT_GE(a.eigenvalues.minCoeff(), -1.0 - 1e-9);
    EXPECT_LE(a.eigenvalues.maxCoeff(), 1.0 + 1e-9);
  }
}

TEST(SpectralEnergy, FractionsSumToOne) {
  Graph g = gen::random_connected(12, 0.3, 7);
  CuspLaplacian cl = build_cusp_laplacian(g, compute_all(g, OrcConfig{}));
  Spectrum s = spectrum(MatrixXd(cl.norm_laplacian), true);
  VectorXd f = VectorXd::LinSpaced(12, -1.0, 2.0);
  VectorXd e = spectral_energy(s, f);
  EXPECT_NEAR(e.sum(), 1.0, 1e-12);
  EXPECT_GE(e.minCoeff(), 0.0);
  EXPECT_THROW(spectral_energy(spectrum(MatrixXd(cl.norm_laplacian), false), f), InputError);
  EXPECT_THROW(spectral_energy(s, VectorXd::Zero(12)), InputError);
}

TEST(SpectralEnergy, ConstantOnRegularGraphSitsAtZeroFrequency) {
  Graph c = gen::cycle(8);
  CuspLaplacian cl = build_cusp_laplacian(c, compute_all(c, OrcConfig{}));
  VectorXd e = spectral_energy(spectrum(MatrixXd(cl.norm_laplacian), true), VectorXd::Ones(8));
  EXPECT_NEAR(e[0], 1.0, 1e-12);
}
