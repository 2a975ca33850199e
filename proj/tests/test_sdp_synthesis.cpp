#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "alqr/sdp_synthesis.hpp"
#include "test_support.hpp"

using namespace alqr;
using alqr::testing::gaussian;
using alqr::testing::random_plant;
using alqr::testing::scalar_plant;

namespace {

Mat random_spd(std::mt19937_64& rng, int d, double lo, double hi) {
  Mat G = gaussian(rng, d, d);
  Eigen::HouseholderQR<Mat> qr(G);
  Mat U = qr.householderQ();
  std::uniform_real_distribution<double> ur(lo, hi);
  Vec e(d);
  for (int i = 0; i < d; ++i) e(i) = ur(rng);
  return U * e.asDiagonal() * U.transpose();
}

}  // namespace

TEST(Mu, Modes) {
  Mat V = 9.0 * Mat::Identity(2, 2);
  EXPECT_DOUBLE_EQ(mu(4.0, 2.0, V, MuMode::single_cross), 16.0);
  EXPECT_DOUBLE_EQ(mu(4.0, 2.0, V, MuMode::double_cross), 28.0);
  EXPECT_DOUBLE_EQ(mu(0.0, 2.0, V, MuMode::single_cross), 0.0);
  EXPECT_DOUBLE_EQ(mu(0.0, 2.0, V, MuMode::double_cross), 0.0);
}

TEST(RelaxedPrimal, ZeroMuDropsCouplingTerm) {
  SystemModel s = scalar_plant(1.0, 1.0);
  auto p = build_relaxed_primal(s.theta(), s, 0.0, Mat::Identity(2, 2));
  auto prog = encode(p);
  for (int i = 0; i + 1 < prog.num_constraints(); ++i) EXPECT_EQ(prog.A[i][2](0, 0), 0.0);
  Mat Sigma = (Mat(2, 2) << 2.0, -1.0, -1.0, 3.0).finished();
  Mat res = relaxed_constraint_residual(p, Sigma);
  Mat expect = Sigma.topLeftCorner(1, 1) - s.theta().transpose() * Sigma * s.theta() - s.W();
  EXPECT_NEAR(res(0, 0), expect(0, 0), 1e-15);
}

TEST(RelaxedPrimal, EncodingRoundTrips) {
  std::mt19937_64 rng(31);
  SystemModel s = random_plant(rng, 3, 2);
  Mat V = random_spd(rng, 5, 0.5, 20.0);
  auto p = build_relaxed_primal(s.theta(), s, 0.37, V);
  auto data = decode(encode(p));
  EXPECT_EQ(data.Q, p.Q);
  EXPECT_EQ(data.R, p.R);
  EXPECT_EQ(data.W, p.W);
  EXPECT_EQ(data.mu, p.mu);
  EXPECT_EQ(data.V_inv, p.V_inv);
}

TEST(RelaxedPrimal, TrivialScalar) {
  SystemModel s = scalar_plant(0.0, 1.0);
  auto sol = solve_relaxed(build_relaxed_primal(s.theta(), s, 0.0, Mat::Identity(2, 2)));
  EXPECT_NEAR(sol.Sigma_star(0, 0), 1.0, 1e-6);
  EXPECT_NEAR(sol.Sigma_star(1, 0), 0.0, 1e-6);
  EXPECT_NEAR(sol.primal_objective, 1.0, 1e-6);
}

TEST(RelaxedPrimal, ZeroMuMatchesExactSdpAndDare) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    SystemModel s = random_plant(rng, 2, 2);
    auto ex = exact_sdp(s);
    auto dare = solve_dare(s);
    auto sol = solve_relaxed(build_relaxed_primal(s.theta(), s, 0.0, Mat::Identity(4, 4)));
    Mat K = extract_policy(sol.Sigma_star, 2);
    EXPECT_LT((K - ex.K_star).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_LT((K - dare.K_star).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_NEAR(sol.primal_objective, dare.J_star, 1e-4 * std::max(1.0, dare.J_star));
    EXPECT_NEAR(sol.dual_objective, dare.J_star, 1e-4 * std::max(1.0, dare.J_star));
    EXPECT_LT((sol.P_dual - dare.P_star).cwiseAbs().maxCoeff(), 1e-4 * std::max(1.0, dare.P_star.norm()));
  }
}

TEST(RelaxedPrimal, SolutionsSatisfyOwnConstraint) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    SystemModel s = random_plant(rng, 2, 2);
    Mat V = random_spd(rng, 4, 50.0, 500.0);
    double mu_t = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
    auto p = build_relaxed_primal(s.theta() + gaussian(rng, 4, 2, 0.02), s, mu_t, V);
    auto sol = solve_relaxed(p);
    EXPECT_LE(sol.constraint_violation, 1e-8);
    EXPECT_GE(la::min_eig(sol.P_dual), -1e-8);
    EXPECT_GE(sol.sigma_min_eig, -1e-8);
    EXPECT_LE(std::abs(sol.primal_objective - sol.dual_objective), 1e-6 * (1.0 + sol.primal_objective));
    Mat K = extract_policy(sol.Sigma_star, 2);
    EXPECT_LT((K * sol.Sigma_star.topLeftCorner(2, 2) - sol.Sigma_star.bottomLeftCorner(2, 2)).cwiseAbs().maxCoeff(),
              1e-8);
  }
}

TEST(RelaxedPrimal, OptimumNonIncreasingInMu) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 5; ++trial) {
    SystemModel s = random_plant(rng, 2, 1);
    Mat V = random_spd(rng, 3, 100.0, 1000.0);
    double prev = std::numeric_limits<double>::infinity();
    for (double mu_t : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0}) {
      double obj = solve_relaxed(build_relaxed_primal(s.theta(), s, mu_t, V)).primal_objective;
      EXPECT_LE(obj, prev + 1e-6);
      prev = obj;
    }
  }
}

TEST(RelaxedDual, GoldenScalar) {
  SystemModel s = scalar_plant(1.0, 1.0);
  Mat P = solve_relaxed_dual(s.theta(), s, 0.0, Mat::Identity(2, 2));
  EXPECT_NEAR(P(0, 0), (1.0 + std::sqrt(5.0)) / 2.0, 1e-4);
}

TEST(RelaxedDual, StrongDualityAndFeasibility) {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 10; ++trial) {
    SystemModel s = random_plant(rng, 2, 2);
    Mat V = random_spd(rng, 4, 50.0, 500.0);
    double mu_t = 0.3 * trial;
    auto p = build_relaxed_primal(s.theta(), s, mu_t, V);
    auto sol = solve_relaxed(p);
    EXPECT_NEAR(s.W().cwiseProduct(sol.P_dual).sum(), sol.primal_objective, 1e-4);
    Mat Pd = sol.P_dual;
    Mat D = Mat::Zero(4, 4);
    D.topLeftCorner(2, 2) = s.Q - Pd;
    D.bottomRightCorner(2, 2) = s.R;
    D += p.theta_hat * Pd * p.theta_hat.transpose() - mu_t * Pd.trace() * p.V_inv;
    EXPECT_GE(la::min_eig(D), -1e-6);
    EXPECT_GE(la::min_eig(Pd), -1e-8);
  }
}

TEST(ExtractPolicy, Cases) {
  Mat S = Mat::Zero(4, 4);
  S.topLeftCorner(2, 2) = Mat::Identity(2, 2);
  S.bottomRightCorner(2, 2) = Mat::Identity(2, 2);
  EXPECT_EQ(extract_policy(S, 2), Mat::Zero(2, 2));
  S.topLeftCorner(2, 2) = 2.0 * Mat::Identity(2, 2);
  S.bottomLeftCorner(2, 2) = Mat::Identity(2, 2);
  S.topRightCorner(2, 2) = Mat::Identity(2, 2);
  EXPECT_LT((extract_policy(S, 2) - 0.5 * Mat::Identity(2, 2)).norm(), 1e-15);
  auto ex = exact_sdp(scalar_plant(1.0, 1.0));
  EXPECT_NEAR(extract_policy(ex.Sigma_star, 1)(0, 0), -0.6180339887, 1e-4);
  Mat D = Mat::Zero(2, 2);
  D(1, 1) = 1.0;
  EXPECT_THROW(extract_policy(D, 1), DegenerateSolutionError);
}

TEST(SequentialGap, Cases) {
  Mat P = (Mat(2, 2) << 2.0, 0.3, 0.3, 1.0).finished();
  EXPECT_NEAR(sequential_gap(P, P), 1.0, 1e-12);
  EXPECT_NEAR(sequential_gap(Mat::Identity(2, 2), 4.0 * Mat::Identity(2, 2)), 0.5, 1e-12);
  EXPECT_THROW(sequential_gap(Mat::Zero(2, 2), P), CertificateError);
}

TEST(PerturbationCheck, TrivialCases) {
  std::mt19937_64 rng(36);
  Mat X = gaussian(rng, 2, 3);
  Mat P = random_spd(rng, 2, 0.1, 3.0);
  Mat V = random_spd(rng, 3, 0.1, 3.0);
  EXPECT_TRUE(perturbation_check(X, Mat::Zero(2, 3), P, V, 0.5));
  EXPECT_TRUE(perturbation_check(X, Mat::Zero(2, 3), P, V, 0.0));
  EXPECT_THROW(perturbation_check(X, Mat::Constant(2, 3, 10.0), P, V, 0.01), InvalidSampleError);
}

TEST(PerturbationCheck, Fuzz) {
  std::mt19937_64 rng(37);
  std::uniform_int_distribution<int> dim(1, 5);
  std::uniform_real_distribution<double> ur(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    int p = dim(rng), d = dim(rng);
    Mat X = gaussian(rng, p, d, 3.0 * ur(rng));
    Mat P = random_spd(rng, p, 0.0, 5.0);
    Mat V = random_spd(rng, d, 0.05, 20.0);
    double r = 5.0 * ur(rng);
    // Delta = U (r V^-1)^1/2 with ||U|| <= 1 gives Delta'Delta <= r V^-1.
    Mat U = gaussian(rng, p, d);
    U /= std::max(1e-12, la::spectral_norm(U)) / ur(rng);
    Mat Delta = U * la::sqrtm(r * la::spd_inverse(V));
    EXPECT_TRUE(perturbation_check(X, Delta, P, V, r));
  }
}
