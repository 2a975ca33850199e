#pragma once

#include <string>
#include <vector>

#include "alqr/errors.hpp"
#include "alqr/lqr_core.hpp"

namespace alqr {

inline std::vector<std::string> benchmark_names() { return {"scalar-golden", "bench-2x2", "bench-3x2"}; }

// theta_bound = 1.1 ||Theta*||, alpha0/alpha1 from the cost spectra.
inline SystemModel make_model(Mat A, Mat B, Mat Q, Mat R, double sigma_w) {
  SystemModel s;
  s.A = std::move(A);
  s.B = std::move(B);
  s.Q = std::move(Q);
  s.R = std::move(R);
  s.sigma_w = sigma_w;
  Vec eq = la::sym_eigenvalues(s.Q), er = la::sym_eigenvalues(s.R);
  s.alpha0 = std::min(eq.minCoeff(), er.minCoeff());
  s.alpha1 = std::max(eq.maxCoeff(), er.maxCoeff());
  s.theta_bound = 1.1 * la::spectral_norm(s.theta());
  return s;
}

inline SystemModel benchmark(const std::string& name) {
  if (name == "scalar-golden") {
    Mat one = Mat::Constant(1, 1, 1.0);
    return make_model(one, one, one, one, 1.0);
  }
  if (name == "bench-2x2") {
    Mat A = (Mat(2, 2) << 1.05, 0.2, 0.0, 0.8).finished();
    Mat B = (Mat(2, 2) << 1.0, 0.0, 0.5, 1.0).finished();
    return make_model(A, B, Mat::Identity(2, 2), Mat::Identity(2, 2), 1.0);
  }
  if (name == "bench-3x2") {
    Mat A = (Mat(3, 3) << 1.01, 0.1, 0.0, 0.0, 0.9, 0.2, 0.0, 0.0, 0.7).finished();
    Mat B = (Mat(3, 2) << 1.0, 0.0, 0.0, 0.5, 0.3, 1.0).finished();
    return make_model(A, B, Mat::Identity(3, 3), Mat::Identity(2, 2), 1.0);
  }
  throw ConfigError("model.benchmark", "unknown benchmark '" + name + "'");
}

// Theta* + rel ||Theta*|| D/||D||, D the all-ones matrix.
inline Mat perturbed_theta(const SystemModel& model, double rel_error) {
  Mat theta = model.theta();
  Mat D = Mat::Ones(theta.rows(), theta.cols());
  return theta + rel_error * la::spectral_norm(theta) * D / la::spectral_norm(D);
}

// DARE gain of the perturbed model.
inline Mat default_initial_gain(const SystemModel& model, double rel_error = 0.2) {
  Mat perturbed = perturbed_theta(model, rel_error);
  SystemModel pm = with_theta(model, perturbed);
  Mat K0 = solve_dare(pm).K_star;
  if (la::spectral_radius(model.A + model.B * K0) >= 1.0)
    throw ConfigError("K0", "default initial gain does not stabilize the plant");
  return K0;
}

}  // namespace alqr
