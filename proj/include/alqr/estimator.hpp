#pragma once

#include <cmath>
#include <optional>

#include "alqr/errors.hpp"
#include "alqr/linalg.hpp"
#include "alqr/schedules.hpp"

namespace alqr {

// Gram S_t = sum z z', cross C_t = sum z x_next'. V_t is rebuilt per call.
struct EstimatorState {
  int n = 1, m = 1;
  double sigma_w = 1.0;
  Mat gram;
  Mat cross;
  long t = 0;
  std::optional<Mat> anchor;
  double anchor_error = 0.0;

  int dim() const { return n + m; }
};

inline EstimatorState make_estimator(int n, int m, double sigma_w, std::optional<Mat> anchor = std::nullopt,
                                     double anchor_error = 0.0) {
  EstimatorState s;
  s.n = n;
  s.m = m;
  s.sigma_w = sigma_w;
  s.gram = Mat::Zero(n + m, n + m);
  s.cross = Mat::Zero(n + m, n);
  if (anchor) la::require_dims(*anchor, n + m, n, "anchor");
  s.anchor = std::move(anchor);
  s.anchor_error = anchor_error;
  return s;
}

inline void ingest_inplace(EstimatorState& s, const Vec& z, const Vec& x_next) {
  if (z.size() != s.dim()) throw ConfigError("z", "regressor dimension mismatch");
  if (x_next.size() != s.n) throw ConfigError("x_next", "state dimension mismatch");
  s.gram.noalias() += z * z.transpose();
  s.cross.noalias() += z * x_next.transpose();
  ++s.t;
}

inline EstimatorState ingest(EstimatorState s, const Vec& z, const Vec& x_next) {
  ingest_inplace(s, z, x_next);
  return s;
}

inline Mat covariance(const EstimatorState& s, double lambda) {
  Mat V = s.gram;
  V.diagonal().array() += lambda;
  return V;
}

inline Mat estimate(const EstimatorState& s, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("estimate requires lambda > 0");
  if (s.t == 0) return s.anchor ? *s.anchor : Mat::Zero(s.dim(), s.n);
  Mat V = covariance(s, lambda);
  Eigen::LLT<Mat> llt(V);
  if (llt.info() != Eigen::Success) throw DomainError("V_t is not positive definite");
  Mat rhs = s.cross;
  if (s.anchor) rhs += lambda * *s.anchor;
  return llt.solve(rhs);
}

// Regularized least-squares objective minimized by `estimate`:
//   sum ||x_next - Theta' z||^2 + lambda ||Theta - Theta0||_F^2, expressed via moments up to a constant.
inline double ls_objective(const EstimatorState& s, double lambda, const Mat& theta) {
  Mat ref = s.anchor ? *s.anchor : Mat::Zero(s.dim(), s.n);
  double quad = (theta.transpose() * s.gram * theta).trace() - 2.0 * (theta.transpose() * s.cross).trace();
  return quad + lambda * (theta - ref).squaredNorm();
}

struct ConfidenceVariant {
  RadiusVariant kind = RadiusVariant::anchored;
  double value = 0.0;  // eps (anchored) or theta_bound (unanchored)

  static ConfidenceVariant anchored(double eps) { return {RadiusVariant::anchored, eps}; }
  static ConfidenceVariant unanchored(double theta) { return {RadiusVariant::unanchored, theta}; }
};

// log det(V_t) - log det(lambda I), >= 0.
inline double logdet_ratio(const EstimatorState& s, double lambda) {
  return la::logdet_spd(covariance(s, lambda)) - s.dim() * std::log(lambda);
}

inline double confidence_radius(const EstimatorState& s, double delta, double lambda, ConfidenceVariant v) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("confidence radius requires 0 < delta < 1");
  if (!(lambda > 0.0)) throw DomainError("confidence radius requires lambda > 0");
  double inner = std::log(static_cast<double>(s.n) / delta) + std::max(0.0, logdet_ratio(s, lambda));
  double a = s.sigma_w * std::sqrt(2.0 * s.n * inner) + std::sqrt(lambda) * v.value;
  return a * a;
}

struct ConfidenceEllipsoid {
  Mat center;
  Mat shape;
  double radius = 0.0;
  double delta = 0.1;
  double lambda_used = 1.0;
};

inline ConfidenceEllipsoid confidence_ellipsoid(const EstimatorState& s, double delta, double lambda,
                                               ConfidenceVariant v) {
  return {estimate(s, lambda), covariance(s, lambda), confidence_radius(s, delta, lambda, v), delta, lambda};
}

// tr((Theta - center)' V (Theta - center)).
inline double weighted_distance(const ConfidenceEllipsoid& e, const Mat& theta) {
  la::require_dims(theta, e.center.rows(), e.center.cols(), "Theta");
  Mat D = theta - e.center;
  return (D.transpose() * e.shape * D).trace();
}

inline bool ellipsoid_contains(const ConfidenceEllipsoid& e, const Mat& theta) {
  return weighted_distance(e, theta) <= e.radius;
}

inline double min_eig_prediction(double t, double sigma_w, double p_bar_t) {
  return sigma_w * sigma_w * std::sqrt(std::max(0.0, t)) * p_bar_t / 40.0;
}

inline double estimation_error_bound(double tau, const ScheduleParams& p, double eps) {
  if (tau < 1.0) throw DomainError("estimation error bound requires tau >= 1");
  double pb = p_bar(tau, p.delta, p.phi);
  double lam = lambda_t(tau, p);
  double inner = std::log(p.n / p.delta * (1.0 + p.alpha_bar / p.G_phi) * tau);
  double a = p.sigma_w * std::sqrt(2.0 * p.n * inner) + std::sqrt(lam) * eps;
  return std::sqrt(40.0) / (p.sigma_w * std::sqrt(pb) * std::pow(tau, 0.25)) * a;
}

inline double estimation_error_bound(double tau, const ScheduleParams& p) {
  return estimation_error_bound(tau, p, p.eps_bar);
}

}  // namespace alqr
