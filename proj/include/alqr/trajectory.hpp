#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "alqr/linalg.hpp"

namespace alqr {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Step i stores time t = t0 + i. x has one more entry than u: x[i+1] is the
// state produced by step i, omega[i] the process noise entering it.
struct TrajectoryRecord {
  std::string mode;
  std::uint64_t seed = 0;
  int n = 0, m = 0;
  long t0 = 1;

  std::vector<Vec> x;
  std::vector<Vec> u;
  std::vector<Vec> eta;  // exploration input (nu during warm-up)
  std::vector<Vec> omega;
  std::vector<double> cost;
  std::vector<int> policy_id;
  std::vector<int> epoch;
  std::vector<double> lambda;
  std::vector<double> logdet_V;
  std::vector<double> beta;
  std::vector<double> mu;
  std::vector<double> r;          // NaN except at epoch starts
  std::vector<double> est_error;  // NaN except at epoch starts

  std::size_t size() const { return u.size(); }

  void reserve(std::size_t T) {
    x.reserve(T + 1);
    for (auto* v : {&u, &eta, &omega}) v->reserve(T);
    for (auto* v : {&cost, &lambda, &logdet_V, &beta, &mu, &r, &est_error}) v->reserve(T);
    policy_id.reserve(T);
    epoch.reserve(T);
  }
};

struct PolicyEpoch {
  int index = 0;
  long tau = 0;
  Mat K;
  Mat Sigma;
  Mat P;
  Mat theta_hat;
  double mu = 0.0;
  double r = 0.0;
  double beta = 1.0;
  double lambda = 0.0;
  double logdet_V = 0.0;
  double est_error = kNaN;
  double rho_true = kNaN;  // spectral radius of A* + B* K
  double seq_gap = kNaN;   // against the previous epoch
  double mu_over_lambda_min = kNaN;
  bool anynum = false;
  bool synthesized = true;  // false: previous policy kept after a failed solve
  std::string failure;
};

}  // namespace alqr
