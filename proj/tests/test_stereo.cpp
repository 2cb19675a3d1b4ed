#include <gtest/gtest.h>

#include <random>

#include "cusp/stereo.hpp"

using namespace cusp;
using namespace cusp::stereo;

namespace {
Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec random_point(std::mt19937_64& rng, int d, double kappa, double frac = 0.8) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(0.0, frac);
  Vec v(d);
  for (auto& x : v) x = nd(rng);
  const double radius = kappa == 0.0 ? 1.0 : 1.0 / std::sqrt(std::abs(kappa));
  return v.normalized() * radius * u(rng);
}
}  // namespace

TEST(TanK, Branches) {
  EXPECT_DOUBLE_EQ(tan_k(0.3, 0.0), 0.3);
  EXPECT_DOUBLE_EQ(tan_k(0.3, 1.0), std::tan(0.3));
  EXPECT_DOUBLE_EQ(tan_k(0.3, -1.0), std::tanh(0.3));
  EXPECT_NEAR(arctan_k(tan_k(0.7, 2.0), 2.0), 0.7, 1e-15);
  EXPECT_NEAR(arctan_k(tan_k(0.7, -2.0), -2.0), 0.7, 1e-15);
  EXPECT_THROW(tan_k(M_PI / 2, 1.0), NumericalError);
  EXPECT_THROW(arctan_k(1.0, -1.0), NumericalError);
}

TEST(Mobius, FlatIsAddition) {
  Vec x = v2(0.1, 0.2), y = v2(-0.3, 0.5);
  EXPECT_LT((mobius_add(x, y, 0.0) - (x + y)).norm(), 1e-15);
}

TEST(Mobius, IdentityAndInverse) {
  std::mt19937_64 rng(1);
  for (double k : {-1.0, -0.3, 0.4, 1.5}) {
    Vec x = random_point(rng, 3, k);
    EXPECT_LT((mobius_add(Vec::Zero(3), x, k) - x).norm(), 1e-14);
    EXPECT_LT((mobius_add(x, Vec::Zero(3), k) - x).norm(), 1e-14);
    EXPECT_LT(mobius_add(-x, x, k).norm(), 1e-14);
  }
}

TEST(Mobius, DimensionMismatch) { EXPECT_THROW(mobius_add(Vec::Zero(2), Vec::Zero(3), -1.0), InputError); }

TEST(ExpLog, OriginRoundTrip) {
  std::mt19937_64 rng(2);
  for (double k : {-2.0, -1.0, -0.1, 0.0, 0.1, 1.0, 2.0}) {
    for (int t = 0; t < 100; ++t) {
      Vec y = random_point(rng, 4, k);
      EXPECT_LT((exp0(log0(y, k), k) - y).norm(), 1e-10);
    }
  }
}

TEST(ExpLog, BasePointRoundTrip) {
  std::mt19937_64 rng(3);
  for (double k : {-1.0, -0.5, 0.5, 1.0}) {
    for (int t = 0; t < 100; ++t) {
      Vec x = random_point(rng, 3, k, 0.6), y = random_point(rng, 3, k, 0.6);
      EXPECT_LT((exp_map(x, log_map(x, y, k), k) - y).norm(), 1e-9);
    }
  }
}

TEST(ExpLog, ExpAtOriginMatchesExp0) {
  Vec v = v2(0.3, -0.4);
  for (double k : {-1.0, 1.0}) EXPECT_LT((exp_map(Vec::Zero(2), v, k) - exp0(v, k)).norm(), 1e-14);
}

TEST(Distance, AxiomsAndOriginFormula) {
  Vec p = v2(0.5, 0.0);
  EXPECT_NEAR(distance(Vec::Zero(2), p, -1.0), 2.0 * std::atanh(0.5), 1e-12);
  EXPECT_NEAR(distance(Vec::Zero(2), p, -1.0), 1.0986, 1e-4);
  EXPECT_DOUBLE_EQ(distance(v2(1, 2), v2(4, 6), 0.0), 5.0);
  std::mt19937_64 rng(4);
  for (double k : {-1.0, 0.7}) {
    for (int t = 0; t < 50; ++t) {
      Vec x = random_point(rng, 3, k), y = random_point(rng, 3, k);
      EXPECT_NEAR(distance(x, x, k), 0.0, 1e-12);
      EXPECT_NEAR(distance(x, y, k), distance(y, x, k), 1e-10);
    }
  }
}

TEST(Distance, EqualsNormOfLogAtBase) {
  // d(x, y) = lambda_x |log_x(y)| (the metric is lambda^2 I).
  std::mt19937_64 rng(5);
  for (double k : {-1.0, 0.5}) {
    Vec x = random_point(rng, 3, k, 0.5), y = random_point(rng, 3, k, 0.5);
    EXPECT_NEAR(distance(x, y, k), conformal_factor(x, k) * log_map(x, y, k).norm(), 1e-10);
  }
}

TEST(KappaScale, Special) {
  Vec x = v2(0.3, 0.0);
  EXPECT_LT((kappa_scale(1.0, x, -1.0) - x).norm(), 1e-14);
  EXPECT_LT(kappa_scale(0.0, x, -1.0).norm(), 1e-15);
  const double d0 = distance(Vec::Zero(2), x, -1.0);
  EXPECT_NEAR(distance(Vec::Zero(2), kappa_scale(2.0, x, -1.0), -1.0), 2.0 * d0, 1e-9);
}

TEST(RightMatmul, IdentityAndFlat) {
  std::mt19937_64 rng(6);
  Mat x(3, 2);
  for (int i = 0; i < 3; ++i) x.row(i) = random_point(rng, 2, -1.0).transpose();
  EXPECT_LT((kappa_right_matmul(x, Mat::Identity(2, 2), -1.0) - x).cwiseAbs().maxCoeff(), 1e-10);
  Mat w = Mat::Random(2, 4);
  EXPECT_LT((kappa_right_matmul(x, w, 0.0) - x * w).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(kappa_right_matmul(x, Mat::Zero(3, 2), -1.0), InputError);
}

TEST(RightMatmul, ClosedFormMatchesComposition) {
  std::mt19937_64 rng(7);
  for (double k : {-1.0, -0.2, 0.3, 1.0}) {
    Mat x(4, 3);
    for (int i = 0; i < 4; ++i) x.row(i) = random_point(rng, 3, k).transpose();
    Mat w = 0.5 * Mat::Random(3, 2);
    Mat expect = exp0_rows(log0_rows(x, k) * w, k);
    EXPECT_LT((kappa_right_matmul(x, w, k) - expect).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(LeftMatmul, IdentityFlatAndZeroRow) {
  std::mt19937_64 rng(8);
  Mat x(3, 2);
  for (int i = 0; i < 3; ++i) x.row(i) = random_point(rng, 2, -1.0).transpose();
  EXPECT_LT((kappa_left_matmul(Mat(Mat::Identity(3, 3)), x, -1.0) - x).cwiseAbs().maxCoeff(), 1e-10);
  Mat a = Mat::Random(3, 3).cwiseAbs();
  EXPECT_LT((kappa_left_matmul(a, x, 0.0) - a * x).cwiseAbs().maxCoeff(), 1e-14);
  Mat z = a;
  z.row(1).setZero();
  EXPECT_LT(kappa_left_matmul(z, x, 0.7).row(1).norm(), 1e-15);
}

TEST(LeftMatmul, FlatLimitIsContinuous) {
  std::mt19937_64 rng(9);
  Mat x(4, 3);
  for (int i = 0; i < 4; ++i) x.row(i) = random_point(rng, 3, 0.0).transpose();
  Mat a = Mat::Random(2, 4).cwiseAbs();
  for (double k : {1e-6, -1e-6}) EXPECT_LT((kappa_left_matmul(a, x, k) - a * x).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Gyromidpoint, OfIdenticalPointsIsThePoint) {
  Vec p = v2(0.2, -0.1);
  Mat x(3, 2);
  x.rowwise() = p.transpose();
  EXPECT_LT((gyromidpoint(x, Vec::Ones(3), -1.0) - p).norm(), 1e-12);
  EXPECT_LT(gyromidpoint(x, Vec::Zero(3), -1.0).norm(), 1e-15);
}

TEST(Project, KeepsHyperbolicPointsInside) {
  Vec far = v2(10.0, 0.0);
  Vec p = project(far, -1.0);
  EXPECT_LT(p.norm(), 1.0);
  EXPECT_NEAR(p.norm(), 1.0 - kBoundaryMargin, 1e-15);
  EXPECT_TRUE(in_domain(p, -1.0));
  EXPECT_EQ(project(far, 1.0), far);
}

TEST(StereoPoint, ChecksCurvatureAgreement) {
  StereoPoint a = make_point(v2(0.1, 0.1), -1.0), b = make_point(v2(0.2, 0.0), 1.0);
  EXPECT_THROW(mobius_add(a, b), InputError);
  EXPECT_THROW(make_point(v2(2.0, 0.0), -1.0), InputError);
}
