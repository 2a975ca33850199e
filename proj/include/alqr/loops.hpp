#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "alqr/errors.hpp"
#include "alqr/estimator.hpp"
#include "alqr/lqr_core.hpp"
#include "alqr/regret.hpp"
#include "alqr/schedules.hpp"
#include "alqr/sdp_synthesis.hpp"
#include "alqr/trajectory.hpp"

namespace alqr {

inline constexpr double kBlowUpNorm = 1e6;

enum class Stream : std::uint64_t { omega = 0, eta = 1, nu = 2, warmup_omega = 3 };

inline std::mt19937_64 make_rng(std::uint64_t seed, Stream s, std::uint64_t salt = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(seq);
}

inline Vec gaussian_vector(std::mt19937_64& rng, int dim, double stddev) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = nd(rng);
  return v * stddev;
}

inline Vec sample_perturbation(double t, const ScheduleParams& p, std::mt19937_64& rng) {
  if (t < 1.0) throw DomainError("perturbation requires t >= 1");
  return gaussian_vector(rng, p.m, std::sqrt(exploration_variance(t, p)));
}

namespace detail {

inline double stage_cost(const SystemModel& model, const Vec& x, const Vec& u) {
  return x.dot(model.Q * x) + u.dot(model.R * u);
}

inline void check_blowup(long t, const Vec& x) {
  double nx = x.norm();
  if (!(nx <= kBlowUpNorm)) throw BlowUpError(t, nx, "state blow-up at t=" + std::to_string(t) + ", norm " + std::to_string(nx));
}

}  // namespace detail

// ---- warm-up -----------------------------------------------------------

struct WarmupOptions {
  std::optional<Vec> x0;
  std::optional<double> kappa0;  // from the certificate of K0 when absent
};

struct WarmupResult {
  Mat theta0;
  TrajectoryRecord traj;
  double rho_reg = 0.0;
  double kappa0 = 1.0;
};

// Least-squares with ridge rho; rho = 0 falls back to the minimum-norm solution.
inline Mat ridge_estimate(const Mat& gram, const Mat& cross, double rho) {
  Mat V = gram;
  V.diagonal().array() += rho;
  if (rho > 0.0) {
    Eigen::LLT<Mat> llt(V);
    if (llt.info() == Eigen::Success) return llt.solve(cross);
  }
  return Eigen::CompleteOrthogonalDecomposition<Mat>(V).solve(cross);
}

inline WarmupResult run_warmup(const SystemModel& model, const Mat& K0, long T0, std::uint64_t seed,
                               const WarmupOptions& opt = {}) {
  check_dims(model);
  const int n = model.n(), m = model.m(), d = n + m;
  la::require_dims(K0, m, n, "K0");
  if (T0 < 1) throw ConfigError("T0", "must be >= 1");
  WarmupResult res;
  res.kappa0 = opt.kappa0 ? *opt.kappa0 : stability_certificate(model, K0).kappa;
  const double sw = model.sigma_w;
  const double nu_std = std::sqrt(2.0) * sw * res.kappa0;
  res.rho_reg = sw > 0.0 ? sw * sw / (model.theta_bound * model.theta_bound) : 0.0;

  auto rng_w = make_rng(seed, Stream::warmup_omega);
  auto rng_nu = make_rng(seed, Stream::nu);
  TrajectoryRecord& tr = res.traj;
  tr.mode = "warmup";
  tr.seed = seed;
  tr.n = n;
  tr.m = m;
  tr.t0 = 1;
  tr.reserve(static_cast<std::size_t>(T0));
  Vec x = opt.x0 ? *opt.x0 : Vec::Zero(n);
  if (x.size() != n) throw ConfigError("x0", "state dimension mismatch");
  tr.x.push_back(x);
  Mat gram = Mat::Zero(d, d), cross = Mat::Zero(d, n);
  Vec z(d);
  for (long t = 1; t <= T0; ++t) {
    Vec nu = gaussian_vector(rng_nu, m, nu_std);
    Vec u = K0 * x + nu;
    Vec w = gaussian_vector(rng_w, n, sw);
    Vec xn = step(model, x, u, w);
    detail::check_blowup(t, xn);
    z << x, u;
    gram.noalias() += z * z.transpose();
    cross.noalias() += z * xn.transpose();
    Mat V = gram;
    V.diagonal().array() += res.rho_reg;
    tr.u.push_back(u);
    tr.eta.push_back(nu);
    tr.omega.push_back(w);
    tr.cost.push_back(detail::stage_cost(model, x, u));
    tr.policy_id.push_back(0);
    tr.epoch.push_back(0);
    tr.lambda.push_back(res.rho_reg);
    tr.logdet_V.push_back(res.rho_reg > 0.0 ? la::logdet_spd(V) : kNaN);
    tr.beta.push_back(kNaN);
    tr.mu.push_back(kNaN);
    tr.r.push_back(kNaN);
    tr.est_error.push_back(kNaN);
    tr.x.push_back(xn);
    x = xn;
  }
  res.theta0 = ridge_estimate(gram, cross, res.rho_reg);
  return res;
}

// ---- ASLO --------------------------------------------------------------

struct AsloOptions {
  std::optional<Vec> x0;
  std::optional<double> fixed_lambda;  // horizon-aware variant (doubling)
  std::optional<double> mu_override;   // forces mu (tests)
  std::optional<Mat> fallback_gain;    // used if the very first synthesis fails
  std::vector<long> checkpoints;       // coverage checks at these t
  std::uint64_t stream_salt = 0;
  long t_offset = 0;                   // global time of step t = 1 minus one
};

struct CoverageCheckpoint {
  long t = 0;
  bool contained = false;
  double distance = 0.0;  // tr((Theta*-Theta_hat)' V (Theta*-Theta_hat))
  double radius = 0.0;
  double est_error = 0.0;
  double gram_min_eig = 0.0;
};

struct AsloDiagnostics {
  int synthesis_failures = 0;
  int unstable_epochs = 0;
  int seq_gap_violations = 0;          // gap > 1 + gamma/2
  int seq_gap_violations_anynum = 0;   // among epochs where anynum holds
  bool anynum_ever = false;
  bool anynum_lost = false;            // held once, failed later
  double max_x_norm = 0.0;
  double max_z_sq = 0.0;
  double max_rho = 0.0;
  std::vector<std::string> failures;
};

struct AsloResult {
  TrajectoryRecord traj;
  std::vector<PolicyEpoch> epochs;
  RegretLedger ledger;
  AsloDiagnostics diag;
  std::vector<CoverageCheckpoint> checkpoints;
  EstimatorState estimator;
  double lambda_1 = 0.0;
};

inline ConfidenceVariant radius_variant_of(const ScheduleParams& p, double anchor_eps) {
  return p.radius_variant == RadiusVariant::anchored ? ConfidenceVariant::anchored(anchor_eps)
                                                     : ConfidenceVariant::unanchored(p.theta_bound);
}

inline AsloResult run_aslo(const SystemModel& model, const Mat& theta0, double anchor_eps, long T,
                           const ScheduleParams& p, std::uint64_t seed, const AsloOptions& opt = {}) {
  check_dims(model);
  const int n = model.n(), m = model.m(), d = n + m;
  if (T < 1) throw ConfigError("T", "must be >= 1");
  la::require_dims(theta0, d, n, "theta0");
  const Mat theta_star = model.theta();

  AsloResult res;
  OptimalSolution opt_sol = solve_dare(model);
  res.ledger = make_ledger(model.sigma_w * model.sigma_w * opt_sol.P_star.trace(), model.sigma_w, p.nu);
  res.estimator = make_estimator(n, m, model.sigma_w, theta0, anchor_eps);
  EstimatorState& est = res.estimator;
  auto rng_w = make_rng(seed, Stream::omega, opt.stream_salt);
  auto rng_eta = make_rng(seed, Stream::eta, opt.stream_salt);
  const ConfidenceVariant variant = radius_variant_of(p, anchor_eps);

  TrajectoryRecord& tr = res.traj;
  tr.mode = "aslo";
  tr.seed = seed;
  tr.n = n;
  tr.m = m;
  tr.t0 = opt.t_offset + 1;
  tr.reserve(static_cast<std::size_t>(T));
  Vec x = opt.x0 ? *opt.x0 : Vec::Zero(n);
  if (x.size() != n) throw ConfigError("x0", "state dimension mismatch");
  tr.x.push_back(x);

  auto lambda_at = [&](long t) { return opt.fixed_lambda ? *opt.fixed_lambda : lambda_t(static_cast<double>(t), p); };
  res.lambda_1 = lambda_at(1);

  std::size_t next_cp = 0;
  std::vector<long> cps = opt.checkpoints;
  std::sort(cps.begin(), cps.end());

  Mat K, P;
  int policy_id = -1;
  double logdet_tau = 0.0, beta_tau = 1.0, mu_tau = 0.0;
  Vec z(d);

  for (long t = 1; t <= T; ++t) {
    const double lam = lambda_at(t);
    Mat V = covariance(est, lam);
    Eigen::LLT<Mat> Vllt(V);
    const double logdet = 2.0 * Vllt.matrixLLT().diagonal().array().log().sum();

    while (next_cp < cps.size() && cps[next_cp] == t) {
      auto ell = confidence_ellipsoid(est, p.delta, lam, variant);
      CoverageCheckpoint c;
      c.t = t;
      c.distance = weighted_distance(ell, theta_star);
      c.radius = ell.radius;
      c.contained = c.distance <= c.radius;
      c.est_error = la::star_norm(ell.center - theta_star);
      c.gram_min_eig = la::min_eig(est.gram);
      res.checkpoints.push_back(c);
      ++next_cp;
    }

    bool update = t == 1 || should_update(logdet, logdet_tau, beta_tau);
    double r_rec = kNaN, err_rec = kNaN;
    if (update) {
      PolicyEpoch ep;
      ep.index = static_cast<int>(res.epochs.size());
      ep.tau = t;
      ep.lambda = lam;
      ep.logdet_V = logdet;
      ep.theta_hat = estimate(est, lam);
      ep.r = confidence_radius(est, p.delta, lam, variant);
      ep.mu = opt.mu_override ? *opt.mu_override : mu(ep.r, p.theta_bound, V, p.mu_mode) * p.mu_scale;
      ep.est_error = la::star_norm(ep.theta_hat - theta_star);
      double vinv = 1.0 / la::min_eig(V);
      ep.mu_over_lambda_min = ep.mu * vinv;
      ep.anynum = anynum_condition(ep.mu, V, p.kappa);
      try {
        auto prob = build_relaxed_primal(ep.theta_hat, model, ep.mu, V);
        auto sol = solve_relaxed(prob);
        ep.K = extract_policy(sol.Sigma_star, n);
        ep.Sigma = sol.Sigma_star;
        ep.P = sol.P_dual;
        if (!ep.K.allFinite() || !ep.P.allFinite()) throw SynthesisError("non-finite policy");
      } catch (const Error& e) {
        ep.synthesized = false;
        ep.failure = e.what();
        ++res.diag.synthesis_failures;
        res.diag.failures.push_back("t=" + std::to_string(t + opt.t_offset) + ": " + e.what());
        if (policy_id >= 0) {
          ep.K = K;
          ep.P = P;
        } else if (opt.fallback_gain) {
          ep.K = *opt.fallback_gain;
          try {
            ep.P = solve_dare(with_theta(model, ep.theta_hat)).P_star;
          } catch (const Error&) {
            ep.P = Mat::Identity(n, n);
          }
        } else {
          throw;
        }
      }
      if (ep.synthesized) {
        if (policy_id >= 0) {
          try {
            ep.seq_gap = sequential_gap(P, ep.P);
          } catch (const CertificateError&) {
            ep.seq_gap = kNaN;
          }
        }
        ++policy_id;
      }
      ep.rho_true = la::spectral_radius(model.A + model.B * ep.K);
      res.diag.max_rho = std::max(res.diag.max_rho, ep.rho_true);
      if (!(ep.rho_true < 1.0)) ++res.diag.unstable_epochs;
      if (std::isfinite(ep.seq_gap) && ep.seq_gap > 1.0 + p.gamma / 2.0) {
        ++res.diag.seq_gap_violations;
        if (ep.anynum) ++res.diag.seq_gap_violations_anynum;
      }
      if (ep.anynum) res.diag.anynum_ever = true;
      else if (res.diag.anynum_ever) res.diag.anynum_lost = true;
      ep.beta = beta_for_update(p, static_cast<double>(t), ep.r);
      K = ep.K;
      P = ep.P;
      logdet_tau = logdet;
      beta_tau = ep.beta;
      mu_tau = ep.mu;
      r_rec = ep.r;
      err_rec = ep.est_error;
      if (t > 1) res.ledger.mark_update(t + opt.t_offset);
      res.epochs.push_back(std::move(ep));
    }

    Vec eta = sample_perturbation(static_cast<double>(t), p, rng_eta);
    Vec u = K * x + eta;
    Vec w = gaussian_vector(rng_w, n, model.sigma_w);
    Vec xn = step(model, x, u, w);
    z << x, u;
    double zVz = z.dot(Vllt.solve(z));
    double c = detail::stage_cost(model, x, u);

    StepInputs in{&model.A, &model.B, &model.R, &P, &K, &x, &xn, &eta, &w, model.sigma_w, p.nu, beta_tau, mu_tau, zVz};
    accumulate(res.ledger, step_terms(in));
    res.ledger.add_cost(c);

    tr.u.push_back(u);
    tr.eta.push_back(eta);
    tr.omega.push_back(w);
    tr.cost.push_back(c);
    tr.policy_id.push_back(policy_id);
    tr.epoch.push_back(static_cast<int>(res.epochs.size()) - 1);
    tr.lambda.push_back(lam);
    tr.logdet_V.push_back(logdet);
    tr.beta.push_back(beta_tau);
    tr.mu.push_back(mu_tau);
    tr.r.push_back(r_rec);
    tr.est_error.push_back(err_rec);
    tr.x.push_back(xn);

    res.diag.max_x_norm = std::max(res.diag.max_x_norm, x.norm());
    res.diag.max_z_sq = std::max(res.diag.max_z_sq, z.squaredNorm());
    ingest_inplace(est, z, xn);
    detail::check_blowup(t + opt.t_offset, xn);
    x = xn;
  }
  res.diag.max_x_norm = std::max(res.diag.max_x_norm, x.norm());
  return res;
}

// N(T) <= (n+m) log2((lambda_T + Zbar T)/lambda_1), Zbar = max ||z_t||^2.
inline double epoch_count_bound(const AsloResult& r) {
  const double T = static_cast<double>(r.traj.size());
  const int d = r.traj.n + r.traj.m;
  double lambda_T = r.traj.lambda.empty() ? r.lambda_1 : r.traj.lambda.back();
  return d * std::log2((lambda_T + r.diag.max_z_sq * T) / r.lambda_1);
}

inline TrajStats traj_stats(const AsloResult& r) {
  TrajStats s;
  s.X_T = r.diag.max_x_norm;
  s.Z_T = r.diag.max_z_sq;
  s.lambda_1 = r.lambda_1;
  s.lambda_T = r.traj.lambda.empty() ? r.lambda_1 : r.traj.lambda.back();
  double rmax = 0.0, bmax = 0.0;
  for (const auto& e : r.epochs) rmax = std::max(rmax, e.r), bmax = std::max(bmax, e.beta);
  s.r_T = rmax;
  s.beta = bmax;
  return s;
}

// ---- doubling baseline --------------------------------------------------

struct DoublingSegment {
  long start = 0;  // cumulative steps before the segment
  long length = 0;
  long warmup = 0;
  double lambda = 0.0;
};

struct DoublingResult {
  TrajectoryRecord traj;
  std::vector<DoublingSegment> segments;
  std::vector<double> cum_regret;
  int synthesis_failures = 0;
};

inline std::vector<DoublingSegment> doubling_segments(long base, long total_T) {
  if (base < 1) throw ConfigError("base_horizon", "must be >= 1");
  std::vector<DoublingSegment> segs;
  long start = 0, len = base;
  while (start < total_T) {
    DoublingSegment s;
    s.start = start;
    s.length = std::min(len, total_T - start);
    segs.push_back(s);
    start += len;
    len *= 2;
  }
  return segs;
}

inline void append_steps(TrajectoryRecord& dst, const TrajectoryRecord& src, int epoch_shift, int policy_shift) {
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst.u.push_back(src.u[i]);
    dst.eta.push_back(src.eta[i]);
    dst.omega.push_back(src.omega[i]);
    dst.cost.push_back(src.cost[i]);
    dst.policy_id.push_back(src.policy_id[i] + policy_shift);
    dst.epoch.push_back(src.epoch[i] + epoch_shift);
    dst.lambda.push_back(src.lambda[i]);
    dst.logdet_V.push_back(src.logdet_V[i]);
    dst.beta.push_back(src.beta[i]);
    dst.mu.push_back(src.mu[i]);
    dst.r.push_back(src.r[i]);
    dst.est_error.push_back(src.est_error[i]);
    dst.x.push_back(src.x[i + 1]);
  }
}

// Restarts warm-up + fixed-lambda ASLO on segments of length base 2^i.
inline DoublingResult run_doubling(const SystemModel& model, const Mat& K0, long base, long total_T,
                                   const ScheduleParams& p, std::uint64_t seed) {
  DoublingResult out;
  out.segments = doubling_segments(base, total_T);
  const int n = model.n();
  TrajectoryRecord& tr = out.traj;
  tr.mode = "doubling";
  tr.seed = seed;
  tr.n = n;
  tr.m = model.m();
  tr.t0 = 1;
  Vec x = Vec::Zero(n);
  tr.x.push_back(x);
  const double kappa0 = stability_certificate(model, K0).kappa;
  int epoch_shift = 0, policy_shift = 0;
  for (std::size_t i = 0; i < out.segments.size(); ++i) {
    DoublingSegment& s = out.segments[i];
    const double Ti = static_cast<double>(base) * std::pow(2.0, static_cast<double>(i));
    s.warmup = std::min(s.length, static_cast<long>(std::ceil(std::sqrt(Ti))));
    s.lambda = p.G_phi * std::log(Ti / p.delta);
    std::uint64_t seg_seed = seed * 1000003ULL + 7919ULL * (i + 1);
    WarmupOptions wo;
    wo.x0 = x;
    wo.kappa0 = kappa0;
    auto w = run_warmup(model, K0, s.warmup, seg_seed, wo);
    append_steps(tr, w.traj, epoch_shift, policy_shift);
    x = tr.x.back();
    long rest = s.length - s.warmup;
    if (rest > 0) {
      AsloOptions ao;
      ao.x0 = x;
      ao.fixed_lambda = s.lambda;
      ao.fallback_gain = K0;
      ao.t_offset = s.start + s.warmup;
      double eps = (w.theta0 - model.theta()).norm();
      auto a = run_aslo(model, w.theta0, eps, rest, p, seg_seed, ao);
      append_steps(tr, a.traj, epoch_shift + 1, policy_shift + 1);
      epoch_shift += static_cast<int>(a.epochs.size());
      policy_shift += a.traj.policy_id.back() + 1;
      out.synthesis_failures += a.diag.synthesis_failures;
      x = tr.x.back();
    }
    epoch_shift += 1;
    policy_shift += 1;
  }
  OptimalSolution o = solve_dare(model);
  out.cum_regret = realized_regret(tr, model.sigma_w * model.sigma_w * o.P_star.trace());
  return out;
}

}  // namespace alqr
