#include <gtest/gtest.h>

#include <limits>
#include <random>
#include <vector>

#include "cusp/transport.hpp"

using namespace cusp;
using Eigen::MatrixXd;

TEST(TransportExact, IdenticalMeasuresCostZero) {
  std::vector<double> a{0.2, 0.3, 0.5};
  MatrixXd c(3, 3);
  c << 0, 1, 2, 1, 0, 1, 2, 1, 0;
  EXPECT_NEAR(transport_exact(a, a, c).cost, 0.0, 1e-15);
}

TEST(TransportExact, PointMassesAtDistance) {
  std::vector<double> a{1.0}, b{1.0};
  MatrixXd c(1, 1);
  c << 3.0;
  EXPECT_DOUBLE_EQ(transport_exact(a, b, c).cost, 3.0);
}

TEST(TransportExact, TriangleLazyWalk) {
  // K3 with delta = 0.5: supports {0,1,2}, masses (.5,.25,.25) and (.25,.5,.25).
  std::vector<double> a{0.5, 0.25, 0.25}, b{0.25, 0.5, 0.25};
  MatrixXd c = MatrixXd::Ones(3, 3) - MatrixXd::Identity(3, 3);
  TransportResult r = transport_exact(a, b, c);
  EXPECT_NEAR(r.cost, 0.25, 1e-15);
  EXPECT_NEAR(r.plan.rowwise().sum()(0), 0.5, 1e-15);
  EXPECT_NEAR(r.plan.colwise().sum()(1), 0.5, 1e-15);
}

TEST(TransportExact, PlanHasRequestedMarginals) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int t = 0; t < 50; ++t) {
    const int p = 2 + t % 5, q = 1 + t % 4;
    std::vector<double> a(p), b(q);
    for (double& x : a) x = u(rng);
    for (double& x : b) x = u(rng);
    double sa = 0, sb = 0;
    for (double x : a) sa += x;
    for (double x : b) sb += x;
    for (double& x : a) x /= sa;
    for (double& x : b) x /= sb;
    MatrixXd c(p, q);
    for (Eigen::Index k = 0; k < c.size(); ++k) c.data()[k] = std::floor(3 * u(rng));
    TransportResult r = transport_exact(a, b, c);
    for (int i = 0; i < p; ++i) EXPECT_NEAR(r.plan.row(i).sum(), a[i], 1e-12);
    for (int j = 0; j < q; ++j) EXPECT_NEAR(r.plan.col(j).sum(), b[j], 1e-12);
    EXPECT_GE(r.plan.minCoeff(), -1e-15);
    EXPECT_NEAR((r.plan.array() * c.array()).sum(), r.cost, 1e-12);
  }
}

TEST(TransportExact, RejectsShapeMismatchAndMissingDistances) {
  std::vector<double> a{0.5, 0.5}, b{1.0};
  EXPECT_THROW(transport_exact(a, b, MatrixXd::Zero(1, 1)), InputError);
  MatrixXd c(2, 1);
  c << 1.0, std::numeric_limits<double>::infinity();
  EXPECT_THROW(transport_exact(a, b, c), InputError);
}

TEST(Sinkhorn, PointMasses) {
  std::vector<double> a{1.0}, b{1.0};
  MatrixXd c(1, 1);
  c << 2.0;
  SinkhornResult r = transport_sinkhorn(a, b, c, {1e-3, 1000, 1e-9});
  EXPECT_NEAR(r.cost, 2.0, 1e-3);
  EXPECT_TRUE(r.converged);
}

TEST(Sinkhorn, TriangleWithinEps) {
  std::vector<double> a{0.5, 0.25, 0.25}, b{0.25, 0.5, 0.25};
  MatrixXd c = MatrixXd::Ones(3, 3) - MatrixXd::Identity(3, 3);
  SinkhornResult r = transport_sinkhorn(a, b, c, {1e-3, 5000, 1e-10});
  EXPECT_NEAR(r.cost, 0.25, 1e-3);
}

TEST(Sinkhorn, ConsistentWithExact) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int t = 0; t < 30; ++t) {
    const int p = 2 + t % 4, q = 2 + (t / 4) % 4;
    std::vector<double> a(p), b(q);
    double sa = 0, sb = 0;
    for (double& x : a) sa += x = u(rng);
    for (double& x : b) sb += x = u(rng);
    for (double& x : a) x /= sa;
    for (double& x : b) x /= sb;
    MatrixXd c(p, q);
    for (Eigen::Index k = 0; k < c.size(); ++k) c.data()[k] = 1.0 + std::floor(3 * u(rng));
    const double eps = 0.02;
    const double exact = transport_exact(a, b, c).cost;
    SinkhornResult s = transport_sinkhorn(a, b, c, {eps, 5000, 1e-10});
    EXPECT_LE(std::abs(s.cost - exact), 10 * eps * c.maxCoeff());
  }
}

TEST(Sinkhorn, ReportsNonConvergence) {
  std::vector<double> a{0.5, 0.5}, b{0.9, 0.1};
  MatrixXd c(2, 2);
  c << 0, 1, 1, 0;
  SinkhornResult r = transport_sinkhorn(a, b, c, {1e-4, 1, 1e-14});
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 1);
}

TEST(Sinkhorn, RejectsBadOptions) {
  std::vector<double> a{1.0}, b{1.0};
  MatrixXd c = MatrixXd::Ones(1, 1);
  EXPECT_THROW(transport_sinkhorn(a, b, c, {0.0, 10, 1e-9}), InputError);
  EXPECT_THROW(transport_sinkhorn(a, b, c, {0.1, 0, 1e-9}), InputError);
}
