#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "alqr/errors.hpp"
#include "alqr/lqr_core.hpp"
#include "alqr/schedules.hpp"
#include "alqr/trajectory.hpp"

namespace alqr {

using RegretTerms = std::array<double, 6>;

struct RegretLedger {
  double J_star = 0.0;
  double sigma_w = 1.0;
  double nu = 1.0;
  std::vector<double> cum_cost;
  std::vector<double> realized_regret;
  RegretTerms R{};
  std::vector<long> epoch_marks;  // update times tau_i (criterion-triggered)
  long N = 0;

  void add_cost(double c) {
    double prev = cum_cost.empty() ? 0.0 : cum_cost.back();
    cum_cost.push_back(prev + c);
    realized_regret.push_back(cum_cost.back() - static_cast<double>(cum_cost.size()) * J_star);
  }
  void mark_update(long tau) {
    epoch_marks.push_back(tau);
    ++N;
  }
  double total() const { return R[0] + R[1] + R[2] + R[3] + R[4] + R[5]; }
};

inline RegretLedger make_ledger(double J_star, double sigma_w, double nu) {
  RegretLedger l;
  l.J_star = J_star;
  l.sigma_w = sigma_w;
  l.nu = nu;
  return l;
}

// One summand of each R_j. zVz = z' V_t^-1 z, omega the noise entering x_next.
struct StepInputs {
  const Mat* A;
  const Mat* B;
  const Mat* R;
  const Mat* P;
  const Mat* K;
  const Vec* x;
  const Vec* x_next;
  const Vec* eta;
  const Vec* omega;
  double sigma_w;
  double nu;
  double beta;
  double mu;
  double zVz;
};

inline RegretTerms step_terms(const StepInputs& s) {
  const Mat& P = *s.P;
  const Vec& x = *s.x;
  const Vec& xn = *s.x_next;
  const Vec& w = *s.omega;
  const Vec& e = *s.eta;
  RegretTerms r;
  r[0] = x.dot(P * x) - xn.dot(P * xn);
  r[1] = w.dot(P * ((*s.A + *s.B * *s.K) * x));
  r[2] = w.dot(P * w) - s.sigma_w * s.sigma_w * la::star_norm(P);
  r[3] = 2.0 * s.nu / (s.sigma_w * s.sigma_w) * (1.0 + s.beta) * s.mu * s.zVz;
  r[4] = 2.0 * e.dot(*s.R * (*s.K * x));
  r[5] = e.dot(*s.R * e);
  return r;
}

inline void accumulate(RegretLedger& l, const RegretTerms& t) {
  for (int j = 0; j < 6; ++j) l.R[j] += t[j];
}

inline std::vector<double> realized_regret(const TrajectoryRecord& traj, double J_star) {
  std::vector<double> out;
  out.reserve(traj.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    acc += traj.cost[i] - J_star;
    out.push_back(acc);
  }
  return out;
}

// Recomputes R1..R6 from stored states, inputs and noises. V_t is rebuilt
// from the replayed regressors and the stored lambda_t.
inline RegretTerms decompose(const TrajectoryRecord& traj, const std::vector<PolicyEpoch>& epochs,
                             const SystemModel& model, const ScheduleParams& p) {
  const std::size_t T = traj.size();
  if (traj.x.size() != T + 1 || traj.eta.size() != T || traj.omega.size() != T || traj.lambda.size() != T ||
      traj.epoch.size() != T)
    throw IncompleteTrajectoryError("trajectory lacks state/noise/schedule records");
  const int d = traj.n + traj.m;
  Mat S = Mat::Zero(d, d);
  RegretTerms acc{};
  Vec z(d);
  for (std::size_t i = 0; i < T; ++i) {
    int e = traj.epoch[i];
    if (e < 0 || static_cast<std::size_t>(e) >= epochs.size())
      throw IncompleteTrajectoryError("epoch index without a policy record");
    const PolicyEpoch& ep = epochs[e];
    z << traj.x[i], traj.u[i];
    Mat V = S;
    V.diagonal().array() += traj.lambda[i];
    double zVz = z.dot(V.llt().solve(z));
    StepInputs in{&model.A, &model.B, &model.R, &ep.P, &ep.K, &traj.x[i], &traj.x[i + 1], &traj.eta[i],
                  &traj.omega[i], p.sigma_w, p.nu, ep.beta, ep.mu, zVz};
    RegretTerms t = step_terms(in);
    for (int j = 0; j < 6; ++j) acc[j] += t[j];
    S.noalias() += z * z.transpose();
  }
  return acc;
}

struct TrajStats {
  double X_T = 0.0;      // max ||x_t||
  double Z_T = 0.0;      // max ||z_t||^2
  double r_T = 0.0;
  double lambda_T = 1.0;
  double lambda_1 = 1.0;
  double beta = 1.0;     // largest beta in force
};

// Closed-form bounds on R1..R6 at horizon T. Practical mode scales the
// perturbation terms by noise_scale and R4 by mu_scale.
inline RegretTerms term_bounds(double T, const ScheduleParams& p, const TrajStats& s) {
  if (T < 1.0) throw DomainError("term bounds require T >= 1");
  const double s2 = p.sigma_w * p.sigma_w, nm = p.n + p.m;
  const double lt = std::log(T / p.delta);
  const double G = p.G_phi;
  RegretTerms b;
  b[0] = p.nu / s2 * s.X_T * s.X_T *
         (1.0 + nm * std::log2(std::max(1.0, (s.lambda_T + s.Z_T * T) / s.lambda_1)));
  b[1] = p.nu * p.theta_bound / p.sigma_w * std::sqrt(3.0 * T * std::log(4.0 / p.delta));
  b[2] = 8.0 * p.nu * std::sqrt(T * std::pow(std::log(4.0 * T / p.delta), 3));
  double logdet_growth = nm * std::log((T + p.alpha_bar * T * T / G) / p.delta);
  b[3] = 4.0 * p.nu * (1.0 + s.beta) / s2 * logdet_growth *
         (s.r_T + 2.0 * p.theta_bound * std::sqrt(s.r_T) * lt * (std::sqrt(G) + std::sqrt(T))) * p.mu_scale;
  b[4] = 2.0 * p.sigma_w * p.alpha1 * p.kappa * s.X_T * std::sqrt(8.0 * p_bar(T, p.delta, p.phi) * std::log(2.0 / p.delta)) *
         std::pow(T, 0.25) * std::sqrt(p.noise_scale);
  b[5] = 10.0 * p.alpha1 * p.m * s2 * p.kappa * p.kappa *
         std::pow(lt / std::log(1.0 / p.delta), p.phi + 1.0) * std::sqrt(T) * p.noise_scale;
  return b;
}

// alpha1 T0 Z^2 with Z^2 = 2(1+kappa0^2) X^2 + 2 Y^2.
inline double warmup_regret_bound(double T0, const ScheduleParams& p, double x0_norm = 0.0) {
  if (T0 < 1.0) throw DomainError("warm-up regret bound requires T0 >= 1");
  const double k2 = p.kappa0 * p.kappa0;
  const double l = std::log(T0 / p.delta);
  double X = p.kappa0 * std::exp(-p.gamma0) * x0_norm +
             p.sigma_w * std::sqrt(10.0 * (p.n + p.m * k2 * p.theta_bound * p.theta_bound) * l);
  double Y = 10.0 * p.sigma_w * std::sqrt(2.0 * p.m * k2 * l);
  return p.alpha1 * T0 * (2.0 * (1.0 + k2) * X * X + 2.0 * Y * Y);
}

// Slope over explicit (t, value) pairs.
inline double slope_xy(const std::vector<double>& t, const std::vector<double>& v) {
  if (t.size() != v.size() || t.size() < 2) throw DomainError("slope needs at least two samples");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0 && v[i] > 0.0)) throw DomainError("slope requires positive values on the window");
    mx += std::log(t[i]);
    my += std::log(v[i]);
  }
  mx /= t.size();
  my /= t.size();
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    double dx = std::log(t[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(v[i]) - my);
  }
  if (!(sxx > 0.0)) throw DomainError("slope window is degenerate");
  return sxy / sxx;
}

// Least-squares slope of log(series) against log(t), series[i] at t = t0 + i,
// over t_lo <= t <= t_hi.
inline double slope(const std::vector<double>& series, double t_lo, double t_hi, long t0 = 1) {
  std::vector<double> ts, vs;
  for (std::size_t i = 0; i < series.size(); ++i) {
    double t = static_cast<double>(t0 + static_cast<long>(i));
    if (t < t_lo || t > t_hi) continue;
    ts.push_back(t);
    vs.push_back(series[i]);
  }
  return slope_xy(ts, vs);
}

}  // namespace alqr
