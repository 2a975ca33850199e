#pragma once

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "alqr/errors.hpp"
#include "alqr/linalg.hpp"
#include "alqr/lqr_core.hpp"
#include "alqr/sdp_synthesis.hpp"

namespace alqr {

enum class Criterion { det_double, fixed_beta, adaptive_beta, relaxed_sequential };
enum class ConstantsMode { theory, practical };
enum class TauForm { exponential, power_law };
enum class RadiusVariant { anchored, unanchored };

inline std::string to_string(Criterion c) {
  switch (c) {
    case Criterion::det_double: return "det2";
    case Criterion::fixed_beta: return "fixed-beta";
    case Criterion::adaptive_beta: return "adaptive";
    case Criterion::relaxed_sequential: return "relaxed-seq";
  }
  return "unknown";
}
inline std::string to_string(ConstantsMode c) { return c == ConstantsMode::theory ? "theory" : "practical"; }
inline std::string to_string(TauForm f) { return f == TauForm::exponential ? "exponential" : "power-law"; }
inline std::string to_string(RadiusVariant v) { return v == RadiusVariant::anchored ? "anchored" : "unanchored"; }

struct ScheduleOptions {
  double delta = 0.1;
  double phi = 1.5;
  Criterion criterion = Criterion::det_double;
  double beta = 1.0;
  double chi = 0.0;
  ConstantsMode constants_mode = ConstantsMode::practical;
  double lambda_scale = 50.0;
  double noise_scale = 0.01;
  double mu_scale = 0.1;
  MuMode mu_mode = MuMode::double_cross;
  TauForm tau_form = TauForm::exponential;
  RadiusVariant radius_variant = RadiusVariant::anchored;
};

struct ScheduleParams {
  // plant-level constants
  int n = 1, m = 1;
  double sigma_w = 1.0, theta_bound = 1.0, alpha0 = 1.0, alpha1 = 1.0;
  double kappa0 = 1.0, gamma0 = 0.5;
  double nu = 1.0, kappa = 1.0, gamma = 0.5;

  double delta = 0.1;
  double phi = 1.5;
  double phi_requested = 1.5;
  double phi_bar = 0.0;
  double chi = 0.0;
  double beta = 1.0;
  double beta_floor = 0.0;

  double alpha_bar = 0.0;
  double alpha_under = 0.0;
  double G_phi = 1.0;           // G used for lambda_t (practical: lambda_scale)
  double G_star = 1.0;
  double log_G_theory = 0.0;    // natural log of the theory G
  double log_G_star_theory = 0.0;
  double log_tau_star = 0.0;    // natural log, theory G
  double log_tau_star_relaxed = 0.0;
  double eps_bar = 0.0, eps_under = 0.0;

  Criterion criterion = Criterion::det_double;
  ConstantsMode constants_mode = ConstantsMode::practical;
  double lambda_scale = 1.0, noise_scale = 1.0, mu_scale = 1.0;
  MuMode mu_mode = MuMode::double_cross;
  TauForm tau_form = TauForm::exponential;
  RadiusVariant radius_variant = RadiusVariant::anchored;

  std::vector<std::string> warnings;
};

// ---- phi_bar -------------------------------------------------------------

namespace detail {
// (0.5 ln t) / ln(ln(t/delta)/ln(1/delta)) written in u = ln t.
inline double phi_ratio(double u, double L) { return 0.5 * u / std::log1p(u / L); }
}  // namespace detail

inline double phi_bar(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("phi_bar requires 0 < delta < 1");
  const double L = std::log(1.0 / delta);
  const double u_lo = 1e-12, u_hi = std::log(1e12);
  const int grid = 4000;
  double best_u = u_lo, best = detail::phi_ratio(u_lo, L);
  for (int i = 0; i <= grid; ++i) {
    double u = std::exp(std::log(u_lo) + (std::log(u_hi) - std::log(u_lo)) * i / grid);
    double f = detail::phi_ratio(u, L);
    if (f < best) {
      best = f;
      best_u = u;
    }
  }
  double step = std::pow(u_hi / u_lo, 1.0 / grid);
  double a = std::max(u_lo, best_u / step), b = std::min(u_hi, best_u * step);
  auto r = boost::math::tools::brent_find_minima([&](double u) { return detail::phi_ratio(u, L); }, a, b, 52);
  best = std::min(best, r.second);
  // Limit t -> 1+ of the ratio is L/2.
  best = std::min(best, 0.5 * L);
  return best - 1e-6;
}

inline double p_bar(double t, double delta, double phi) {
  if (t < 1.0) throw DomainError("p_bar requires t >= 1");
  return std::pow(std::log(t / delta) / std::log(1.0 / delta), phi);
}

// ---- constants -----------------------------------------------------------

inline double alpha_bar(double kappa, double gamma, double sigma, int n, int m, double theta) {
  double k2 = kappa * kappa, s2 = sigma * sigma;
  return 40.0 * (1.0 + k2) / (gamma * gamma) * k2 * s2 * (n + m * k2 * theta * theta) + 20.0 * s2 * k2 * m;
}

inline double alpha_under(double kappa, double gamma, double sigma, int n, int m, double theta, double chi,
                          double lambda1) {
  double k2 = kappa * kappa, s2 = sigma * sigma;
  double a2 = kappa;
  double inner = a2 / gamma + 2.0 * a2 * k2 * (1.0 - gamma) / (gamma * gamma * lambda1);
  double e = 1.0 / (1.0 - chi);
  return std::pow(inner, 2.0 * e) * std::pow(10.0 * s2 * (n + m * k2 * theta * theta), e) + 10.0 * s2 * k2 * m;
}

// ln(ln(1 + exp(la))) without overflow/underflow.
inline double log_log1p_exp(double la) {
  if (la < -30.0) return la;
  if (la > 30.0) return std::log(la + std::log1p(std::exp(-la)));
  return std::log(std::log1p(std::exp(la)));
}

// Inputs for the G(phi) fixed point:
//   G = max{ sigma^2/40 sqrt(tau*) ln(tau*/delta)^(phi-1) / ln(1/delta)^phi,
//            (c2 kappa^p theta sigma)^2 8 n^2 (n+m) ln(1 + alpha/G) }
struct GSpec {
  double sigma, delta, phi, theta, kappa;
  int n, m;
  double alpha;        // alpha_bar or alpha_under
  double a1;           // 10240 theta kappa^10 or 1280 theta kappa^2
  double c2;           // 256 or 32
  double kappa_power;  // 10 or 2
  TauForm form = TauForm::exponential;
};

inline GSpec g_spec_base(const ScheduleParams& p) {
  return {p.sigma_w, p.delta, p.phi, p.theta_bound, p.kappa, p.n, p.m, p.alpha_bar,
          10240.0 * p.theta_bound * std::pow(p.kappa, 10.0), 256.0, 10.0, p.tau_form};
}

inline GSpec g_spec_relaxed(const ScheduleParams& p) {
  return {p.sigma_w, p.delta, p.phi, p.theta_bound, p.kappa, p.n, p.m, p.alpha_under,
          1280.0 * p.theta_bound * p.kappa * p.kappa, 32.0, 2.0, p.tau_form};
}

// ln tau* at g = ln G.
inline double log_tau_star(const GSpec& s, double g) {
  const double L = std::log(1.0 / s.delta);
  const double nn = static_cast<double>(s.n), dm = static_cast<double>(s.n + s.m);
  if (s.form == TauForm::exponential) {
    double log_l = std::log(s.a1) + std::log(L) + 0.5 * std::log(8.0 * s.alpha * nn * nn * dm) -
                   std::log(2.0 * s.sigma * (s.phi - 1.0));
    double log_prod = log_l + log_log1p_exp(std::log(s.alpha) - g);
    return std::log(s.delta) + std::exp(log_prod);
  }
  double log_l = std::log(s.a1) + 0.5 * std::log(4.0 * s.alpha * nn * nn * dm) + s.phi * std::log(L) -
                 std::log(s.sigma);
  return std::log(s.delta) + std::log(10.0) * std::exp(log_l / (s.phi - 1.0));
}

inline double log_branch_tau(const GSpec& s, double g) {
  const double L = std::log(1.0 / s.delta);
  double lt = log_tau_star(s, g);
  double ln_ratio = lt - std::log(s.delta);  // ln(tau*/delta) > 0
  return std::log(s.sigma * s.sigma / 40.0) + 0.5 * lt + (s.phi - 1.0) * std::log(ln_ratio) - s.phi * std::log(L);
}

inline double log_branch_noise(const GSpec& s, double g) {
  const double nn = static_cast<double>(s.n), dm = static_cast<double>(s.n + s.m);
  double c = s.c2 * std::pow(s.kappa, s.kappa_power) * s.theta * s.sigma;
  return 2.0 * std::log(c) + std::log(8.0 * nn * nn * dm) + log_log1p_exp(std::log(s.alpha) - g);
}

inline double log_g_rhs(const GSpec& s, double g) { return std::max(log_branch_tau(s, g), log_branch_noise(s, g)); }

struct GSolution {
  double log_G = 0.0;
  double log_tau_star = 0.0;
  double log_residual = 0.0;  // ln G - ln RHS(G)
  int iterations = 0;
};

// Solves g = ln RHS(e^g); h(g) = g - ln RHS(e^g) is increasing in g.
inline GSolution solve_g(const GSpec& s) {
  if (!(s.phi > 1.0)) throw ConstantsError("G(phi) requires phi > 1");
  if (!(s.sigma > 0.0)) throw ConstantsError("G(phi) requires sigma_w > 0");
  auto h = [&](double g) { return g - log_g_rhs(s, g); };
  double lo = std::log(std::max(s.alpha, 1e-300)), hi = lo;
  double step = 1.0;
  int guard = 0;
  while (!(h(lo) < 0.0)) {
    lo -= step;
    step *= 2.0;
    if (++guard > 200) throw ConstantsError("G(phi): no lower bracket");
  }
  step = 1.0;
  guard = 0;
  while (!(h(hi) > 0.0)) {
    double v = h(hi);
    if (std::isnan(v) || hi > 1e300) {
      GSolution inf;
      inf.log_G = std::numeric_limits<double>::infinity();
      inf.log_tau_star = std::numeric_limits<double>::infinity();
      inf.log_residual = 0.0;
      return inf;
    }
    hi += step;
    step *= 2.0;
    if (++guard > 2000) throw ConstantsError("G(phi): no upper bracket");
  }
  GSolution out;
  for (int it = 0; it < 400; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (h(mid) > 0.0) hi = mid;
    else lo = mid;
    out.iterations = it + 1;
  }
  out.log_G = hi;
  out.log_residual = h(hi);
  out.log_tau_star = log_tau_star(s, hi);
  // Absolute in ln G (relative in G) up to the spacing of doubles near ln G.
  double allowed = std::max(1e-6, 1e-12 * std::abs(out.log_G));
  if (std::abs(out.log_residual) > allowed) throw ConstantsError("G(phi): fixed point did not converge");
  return out;
}

// G(phi) as used by the schedule.
inline double g_of_phi(const ScheduleParams& p) { return p.G_phi; }

inline double beta_floor(double kappa, double gamma, int n, int m) {
  double zeta = kappa * kappa / (4.0 * gamma);
  return std::pow(1.0 + zeta, n + m) - 1.0;
}

// chi = log((1+zeta)^(n+m)) / log(1+beta).
inline double chi_of_beta(double kappa, double gamma, int n, int m, double beta) {
  double zeta = kappa * kappa / (4.0 * gamma);
  return (n + m) * std::log1p(zeta) / std::log1p(beta);
}

inline double lambda_t(double t, const ScheduleParams& p) {
  if (t < 1.0) throw DomainError("lambda_t requires t >= 1");
  double l = std::log(t / p.delta);
  if (p.criterion == Criterion::relaxed_sequential) return p.G_star * std::pow(l, 1.0 / (1.0 - p.chi));
  return p.G_phi * l;
}

struct EpsTargets {
  double eps_bar;
  double eps_under;
};

inline double eps_formula(double sigma, double alpha, int n, int m, double G, double a2, double delta,
                          double theta) {
  double nn = n, dm = n + m;
  double e1 = sigma * std::sqrt(alpha * 4.0 * nn * nn * dm) / std::sqrt(G);
  double e2 = (1.0 / a2) * (1.0 + sigma * sigma / (40.0 * G * std::log(1.0 / delta)));
  return std::min({e1, e2, 2.0 * theta});
}

inline EpsTargets eps_targets(const ScheduleParams& p) {
  double a2 = 256.0 * p.theta_bound * std::pow(p.kappa, 10.0);
  double a2u = 32.0 * p.theta_bound * p.kappa * p.kappa;
  return {eps_formula(p.sigma_w, p.alpha_bar, p.n, p.m, p.G_phi, a2, p.delta, p.theta_bound),
          eps_formula(p.sigma_w, p.alpha_under, p.n, p.m, p.G_star, a2u, p.delta, p.theta_bound)};
}

// Warm-up estimation-error bound at t (squared).
inline double warmup_error_bound_sq(double t, double sigma, int n, double kappa0, double gamma0, double theta,
                                    double delta) {
  double s2 = sigma * sigma;
  double c = 300.0 * s2 * std::pow(kappa0, 4) / (gamma0 * gamma0) * (n + theta * theta * kappa0 * kappa0);
  double inner = std::log(n / delta) + std::log1p(c * std::log(t / delta));
  double rho = s2 / (theta * theta);
  double a = sigma * std::sqrt(2.0 * n * inner) + std::sqrt(rho) * theta;
  return 80.0 / (s2 * t) * a * a;
}

inline long warmup_duration(double eps_target, double sigma, int n, double kappa0, double gamma0, double theta,
                            double delta) {
  if (!(eps_target > 0.0)) throw DomainError("warmup_duration requires eps_target > 0");
  if (sigma == 0.0) return 1;
  double e2 = eps_target * eps_target;
  auto ok = [&](long t) { return warmup_error_bound_sq(static_cast<double>(t), sigma, n, kappa0, gamma0, theta, delta) <= e2; };
  if (ok(1)) return 1;
  long hi = 2;
  while (!ok(hi)) {
    if (hi > (1L << 61)) throw ScheduleError("warm-up duration exceeds representable range");
    hi *= 2;
  }
  long lo = hi / 2;  // !ok(lo)
  while (hi - lo > 1) {
    long mid = lo + (hi - lo) / 2;
    if (ok(mid)) hi = mid;
    else lo = mid;
  }
  return hi;
}

inline long warmup_duration(double eps_target, const ScheduleParams& p) {
  return warmup_duration(eps_target, p.sigma_w, p.n, p.kappa0, p.gamma0, p.theta_bound, p.delta);
}

inline bool should_update(double logdet_t, double logdet_tau, double beta) {
  return logdet_t > std::log1p(beta) + logdet_tau;
}

inline double adaptive_beta(double tau, double r_tau, const ScheduleParams& p) {
  if (tau < 1.0 || !(r_tau > 0.0)) throw ScheduleError("adaptive beta requires tau >= 1 and r > 0");
  double G = p.G_phi, ab = p.alpha_bar;
  double lt = std::log(tau / p.delta);
  double arg = -(1.0 + ab / G * tau) * std::log(p.delta) * lt;
  if (!(arg > 1.0)) throw ScheduleError("adaptive beta: log argument <= 1");
  double num = 2.0 * std::log(arg);
  double den = 4.0 * p.nu * (p.n + p.m) * (1.0 + ab / G) *
               (r_tau + 2.0 * p.theta_bound * std::sqrt(G + ab * tau) * std::sqrt(r_tau * lt));
  return std::sqrt(num / den);
}

// Radius growth bound r_T <= (sigma sqrt(8 n^2 (n+m) ln(1+alpha/G) ln(T/delta)) + eps sqrt(G ln(T/delta)))^2.
inline double radius_bound(double T, const ScheduleParams& p) {
  double lt = std::log(T / p.delta);
  double nn = p.n, dm = p.n + p.m;
  double a = p.sigma_w * std::sqrt(8.0 * nn * nn * dm * std::log1p(p.alpha_bar / p.G_phi) * lt) +
             p.eps_bar * std::sqrt(p.G_phi * lt);
  return a * a;
}

inline double beta_for_update(const ScheduleParams& p, double tau, double r_tau) {
  switch (p.criterion) {
    case Criterion::det_double: return 1.0;
    case Criterion::fixed_beta:
    case Criterion::relaxed_sequential: return p.beta;
    case Criterion::adaptive_beta: return adaptive_beta(tau, r_tau, p);
  }
  return 1.0;
}

inline bool anynum_condition(double mu_t, const Mat& V_t, double kappa) {
  return mu_t * la::spectral_norm(la::spd_inverse(la::sym(V_t))) <= 1.0 / (16.0 * std::pow(kappa, 10.0));
}

inline double exploration_variance(double t, const ScheduleParams& p) {
  return 2.0 * p.sigma_w * p.sigma_w * p.kappa * p.kappa * p_bar(t, p.delta, p.phi) / std::sqrt(t) *
         p.noise_scale;
}

inline ScheduleParams make_schedule(const SystemModel& model, const StabilityCert& cert0,
                                    const ScheduleOptions& o) {
  ScheduleParams p;
  p.n = model.n();
  p.m = model.m();
  p.sigma_w = model.sigma_w;
  p.theta_bound = model.theta_bound;
  p.alpha0 = model.alpha0;
  p.alpha1 = model.alpha1;
  p.kappa0 = cert0.kappa;
  p.gamma0 = cert0.gamma;
  if (!(o.delta > 0.0 && o.delta < 1.0)) throw ConfigError("delta", "must lie in (0,1)");
  if (!(model.sigma_w > 0.0)) throw ConfigError("sigma_w", "schedules need sigma_w > 0");
  if (o.chi < 0.0 || o.chi >= 1.0) throw ConfigError("chi", "must lie in [0,1)");
  if (o.criterion == Criterion::fixed_beta || o.criterion == Criterion::relaxed_sequential)
    if (!(o.beta > 0.0)) throw ConfigError("beta", "must be > 0");
  p.delta = o.delta;
  p.chi = o.chi;
  p.beta = o.criterion == Criterion::det_double ? 1.0 : o.beta;
  p.criterion = o.criterion;
  p.constants_mode = o.constants_mode;
  p.lambda_scale = o.lambda_scale;
  p.noise_scale = o.noise_scale;
  p.mu_scale = o.constants_mode == ConstantsMode::theory ? 1.0 : o.mu_scale;
  p.mu_mode = o.mu_mode;
  p.tau_form = o.tau_form;
  p.radius_variant = o.radius_variant;

  p.nu = nu_bound(model, cert0);
  auto kg = kappa_gamma(p.nu, model.alpha0, model.sigma_w);
  p.kappa = kg.kappa;
  p.gamma = kg.gamma;
  p.beta_floor = beta_floor(p.kappa, p.gamma, p.n, p.m);

  p.phi_bar = phi_bar(o.delta);
  p.phi_requested = o.phi;
  p.phi = o.phi;
  if (p.phi > p.phi_bar) {
    p.warnings.push_back("phi clipped from " + std::to_string(o.phi) + " to phi_bar " + std::to_string(p.phi_bar));
    p.phi = p.phi_bar;
  }
  double phi_min = o.criterion == Criterion::relaxed_sequential ? 1.0 / (1.0 - o.chi) : 1.0;
  if (!(p.phi > phi_min)) {
    std::string msg = "phi " + std::to_string(p.phi) + " not above " + std::to_string(phi_min) +
                      " (phi_bar " + std::to_string(p.phi_bar) + ")";
    if (o.constants_mode == ConstantsMode::theory) throw ScheduleError(msg);
    p.warnings.push_back(msg);
  }
  if (o.constants_mode == ConstantsMode::practical && !(o.lambda_scale > 0.0))
    throw ConfigError("lambda_scale", "must be > 0");
  if (!(o.noise_scale >= 0.0)) throw ConfigError("noise_scale", "must be >= 0");
  if (!(o.mu_scale >= 0.0)) throw ConfigError("mu_scale", "must be >= 0");

  p.alpha_bar = alpha_bar(p.kappa, p.gamma, p.sigma_w, p.n, p.m, p.theta_bound);

  bool phi_ok = p.phi > 1.0;
  if (phi_ok) {
    GSolution gb = solve_g(g_spec_base(p));
    p.log_G_theory = gb.log_G;
    p.log_tau_star = gb.log_tau_star;
  } else {
    p.log_G_theory = p.log_tau_star = std::numeric_limits<double>::quiet_NaN();
  }
  p.G_phi = o.constants_mode == ConstantsMode::theory ? std::exp(p.log_G_theory) : o.lambda_scale;
  if (!std::isfinite(p.G_phi))
    p.warnings.push_back("theory G(phi) overflows a double; only log-space constants are usable");

  double lambda1 = std::isfinite(p.G_phi) ? p.G_phi * std::log(1.0 / p.delta) : std::numeric_limits<double>::infinity();
  p.alpha_under = alpha_under(p.kappa, p.gamma, p.sigma_w, p.n, p.m, p.theta_bound, p.chi, lambda1);
  if (phi_ok) {
    GSolution gs = solve_g(g_spec_relaxed(p));
    p.log_G_star_theory = gs.log_G;
    p.log_tau_star_relaxed = gs.log_tau_star;
  } else {
    p.log_G_star_theory = p.log_tau_star_relaxed = std::numeric_limits<double>::quiet_NaN();
  }
  p.G_star = o.constants_mode == ConstantsMode::theory ? std::exp(p.log_G_star_theory) : o.lambda_scale;

  auto e = eps_targets(p);
  p.eps_bar = e.eps_bar;
  p.eps_under = e.eps_under;
  return p;
}

}  // namespace alqr
