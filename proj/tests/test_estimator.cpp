#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "alqr/benchmarks.hpp"
#include "alqr/estimator.hpp"
#include "test_support.hpp"

using namespace alqr;
using alqr::testing::gaussian;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST(Ingest, FreshAndAdditive) {
  auto s = make_estimator(1, 1, 1.0);
  s = ingest(s, vec({1, 0}), vec({0}));
  EXPECT_EQ(s.gram, (Mat(2, 2) << 1, 0, 0, 0).finished());
  EXPECT_EQ(s.cross, Mat::Zero(2, 1));
  EXPECT_EQ(s.t, 1);
  Vec z = vec({0.3, -1.2});
  auto s2 = ingest(ingest(make_estimator(1, 1, 1.0), z, vec({2})), z, vec({2}));
  EXPECT_TRUE(s2.gram.isApprox(2.0 * z * z.transpose(), 1e-15));
  EXPECT_THROW(ingest(s, vec({1}), vec({0})), ConfigError);
  EXPECT_THROW(ingest(s, vec({1, 0}), vec({0, 1})), ConfigError);
}

TEST(Ingest, MatchesBatchMoments) {
  std::mt19937_64 rng(7);
  const int n = 3, m = 2, T = 100;
  Mat Z = gaussian(rng, T, n + m), X = gaussian(rng, T, n);
  auto s = make_estimator(n, m, 1.0);
  for (int i = 0; i < T; ++i) ingest_inplace(s, Z.row(i).transpose(), X.row(i).transpose());
  Mat ZtZ = Mat::Zero(n + m, n + m), ZtX = Mat::Zero(n + m, n);
  for (int i = 0; i < T; ++i)
    for (int a = 0; a < n + m; ++a) {
      for (int b = 0; b < n + m; ++b) ZtZ(a, b) += Z(i, a) * Z(i, b);
      for (int b = 0; b < n; ++b) ZtX(a, b) += Z(i, a) * X(i, b);
    }
  EXPECT_LE((s.gram - ZtZ).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((s.cross - ZtX).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_EQ(s.t, T);
  EXPECT_TRUE(la::is_symmetric(s.gram, 0.0));
}

TEST(Estimate, AnchorAtZeroDataAndScalarCase) {
  std::mt19937_64 rng(3);
  Mat anchor = gaussian(rng, 4, 2);
  auto s = make_estimator(2, 2, 1.0, anchor, 0.3);
  EXPECT_EQ(estimate(s, 7.0), anchor);
  auto sc = make_estimator(1, 0, 1.0, Mat::Zero(1, 1));
  sc = ingest(sc, vec({1}), vec({0.8}));
  EXPECT_NEAR(estimate(sc, 1.0)(0, 0), 0.4, 1e-15);
  EXPECT_THROW(estimate(s, 0.0), DomainError);
}

TEST(Estimate, NoiselessConsistency) {
  std::mt19937_64 rng(11);
  const int n = 2, m = 2;
  Mat theta = gaussian(rng, n + m, n);
  auto s = make_estimator(n, m, 1.0);
  for (int i = 0; i < 200; ++i) {
    Vec z = gaussian(rng, n + m, 1);
    ingest_inplace(s, z, theta.transpose() * z);
  }
  EXPECT_LE((estimate(s, 1e-6) - theta).norm(), 1e-5);
}

TEST(Estimate, MinimizesRegularizedObjective) {
  std::mt19937_64 rng(19);
  const int n = 3, m = 1;
  for (bool anchored : {false, true}) {
    auto s = make_estimator(n, m, 1.0, anchored ? std::optional<Mat>(gaussian(rng, n + m, n)) : std::nullopt);
    for (int i = 0; i < 40; ++i) ingest_inplace(s, gaussian(rng, n + m, 1), gaussian(rng, n, 1));
    const double lambda = 2.5;
    Mat th = estimate(s, lambda);
    // gradient 2 (V th - C - lambda th0) vanishes
    Mat grad = covariance(s, lambda) * th - s.cross - (anchored ? Mat(lambda * *s.anchor) : Mat::Zero(n + m, n));
    EXPECT_LE(grad.cwiseAbs().maxCoeff(), 1e-10);
    double f0 = ls_objective(s, lambda, th);
    for (int k = 0; k < 200; ++k) {
      Mat D = gaussian(rng, n + m, n);
      D *= 1e-4 / D.norm();
      ASSERT_GE(ls_objective(s, lambda, th + D) - f0, -1e-12);
    }
  }
}

TEST(ConfidenceRadius, ClosedForms) {
  auto s = make_estimator(1, 1, 1.0);
  double r = confidence_radius(s, 0.1, 1.0, ConfidenceVariant::anchored(1.0));
  double expect = std::pow(std::sqrt(2.0 * std::log(10.0)) + 1.0, 2);
  EXPECT_NEAR(r, expect, 1e-12);
  auto s2 = make_estimator(3, 1, 0.7);
  EXPECT_NEAR(confidence_radius(s2, 0.05, 4.0, ConfidenceVariant::anchored(0.0)),
              2.0 * 3 * 0.49 * std::log(3 / 0.05), 1e-12);
  EXPECT_NEAR(confidence_radius(s2, 0.05, 4.0, ConfidenceVariant::unanchored(1.5)),
              std::pow(0.7 * std::sqrt(6.0 * std::log(60.0)) + 2.0 * 1.5, 2), 1e-12);
  EXPECT_THROW(confidence_radius(s, 1.0, 1.0, ConfidenceVariant::anchored(1.0)), DomainError);
}

TEST(ConfidenceRadius, NonDecreasingInData) {
  std::mt19937_64 rng(5);
  auto s = make_estimator(2, 1, 1.0);
  double prev = confidence_radius(s, 0.1, 3.0, ConfidenceVariant::anchored(0.5));
  for (int i = 0; i < 100; ++i) {
    ingest_inplace(s, gaussian(rng, 3, 1), gaussian(rng, 2, 1));
    double r = confidence_radius(s, 0.1, 3.0, ConfidenceVariant::anchored(0.5));
    ASSERT_GE(r, prev);
    prev = r;
  }
}

TEST(Ellipsoid, ContainmentCases) {
  ConfidenceEllipsoid e{Mat::Zero(1, 1), Mat::Constant(1, 1, 4.0), 1.0, 0.1, 4.0};
  EXPECT_TRUE(ellipsoid_contains(e, Mat::Zero(1, 1)));
  EXPECT_TRUE(ellipsoid_contains(e, Mat::Constant(1, 1, 0.5)));
  EXPECT_FALSE(ellipsoid_contains(e, Mat::Constant(1, 1, 0.5 + 1e-9)));
  EXPECT_THROW(ellipsoid_contains(e, Mat::Zero(2, 1)), ConfigError);
}

TEST(Ellipsoid, ShapeDominatesRegularizer) {
  std::mt19937_64 rng(23);
  auto s = make_estimator(2, 2, 1.0, Mat::Zero(4, 2), 0.1);
  for (int i = 0; i < 30; ++i) ingest_inplace(s, gaussian(rng, 4, 1), gaussian(rng, 2, 1));
  auto e = confidence_ellipsoid(s, 0.1, 2.0, ConfidenceVariant::anchored(0.1));
  EXPECT_GE(la::min_eig(e.shape - 2.0 * Mat::Identity(4, 4)), -1e-12);
  EXPECT_GT(e.radius, 0.0);
  EXPECT_TRUE(ellipsoid_contains(e, e.center));
}

TEST(Ellipsoid, CoverageOnScalarPlant) {
  // anchored set around an exact anchor (eps = 0) under i.i.d. regressors
  const double delta = 0.1;
  int covered = 0, runs = 400;
  Mat theta = (Mat(2, 1) << 0.9, 0.5).finished();
  for (int k = 0; k < runs; ++k) {
    std::mt19937_64 rng(1000 + k);
    std::normal_distribution<double> nd;
    auto s = make_estimator(1, 1, 1.0, theta, 0.0);
    Vec x = Vec::Zero(1);
    for (int t = 0; t < 300; ++t) {
      Vec z(2);
      z << x(0), nd(rng);
      Vec xn = theta.transpose() * z;
      xn(0) += nd(rng);
      ingest_inplace(s, z, xn);
      x = xn * 0.5;
    }
    auto e = confidence_ellipsoid(s, delta, 1.0, ConfidenceVariant::anchored(0.0));
    covered += ellipsoid_contains(e, theta);
  }
  EXPECT_GE(covered / double(runs), 1.0 - delta);
}

TEST(MinEigPrediction, Formula) {
  EXPECT_NEAR(min_eig_prediction(1600, 1.0, 1.0), 1.0, 1e-15);
  EXPECT_EQ(min_eig_prediction(0, 1.0, 1.0), 0.0);
  EXPECT_NEAR(min_eig_prediction(400, 2.0, 3.0), 4.0 * 20.0 * 3.0 / 40.0, 1e-12);
}

TEST(EstimationErrorBound, PositiveWithNearQuarterSlope) {
  for (auto name : benchmark_names()) {
    SystemModel s = benchmark(name);
    auto p = make_schedule(s, stability_certificate(s, default_initial_gain(s)), {});
    double mx = 0, my = 0, sxy = 0, sxx = 0;
    const int k = 60;
    std::vector<double> X, Y;
    for (int i = 0; i < k; ++i) {
      double tau = std::exp(std::log(1e2) + (std::log(1e6) - std::log(1e2)) * i / (k - 1));
      double b = estimation_error_bound(tau, p);
      ASSERT_GT(b, 0.0);
      X.push_back(std::log(tau));
      Y.push_back(std::log(b));
      mx += X.back() / k;
      my += Y.back() / k;
    }
    for (int i = 0; i < k; ++i) sxy += (X[i] - mx) * (Y[i] - my), sxx += (X[i] - mx) * (X[i] - mx);
    double slope = sxy / sxx;
    // tau^-1/4 times (log tau)^(1/2 - phi/2): slightly steeper than -1/4
    EXPECT_GT(slope, -0.30) << name;
    EXPECT_LT(slope, -0.25) << name;
  }
  EXPECT_THROW(estimation_error_bound(0.5, ScheduleParams{}), DomainError);
}
