#pragma once

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "alqr/benchmarks.hpp"
#include "alqr/config.hpp"
#include "alqr/emit.hpp"
#include "alqr/loops.hpp"
#include "alqr/regret.hpp"
#include "alqr/schedules.hpp"

namespace alqr {

// ---- logging ----------------------------------------------------------------

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

inline LogLevel log_level() {
  static const LogLevel lvl = [] {
    const char* v = std::getenv("ALQR_LOG");
    if (!v) return LogLevel::warn;
    std::string s(v);
    if (s == "error" || s == "0") return LogLevel::error;
    if (s == "info" || s == "2") return LogLevel::info;
    if (s == "debug" || s == "3") return LogLevel::debug;
    return LogLevel::warn;
  }();
  return lvl;
}

inline void log(LogLevel l, const std::string& msg) {
  static std::mutex mu;
  if (l > log_level()) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[alqr " << names[static_cast<int>(l)] << "] " << msg << '\n';
}

// ---- setup ------------------------------------------------------------------

struct Prepared {
  SystemModel model;
  Mat K0;
  StabilityCert cert0;
  ScheduleParams params;
  long T0 = 0;           // warm-up length actually used
  double J_star = 0.0;
  Mat theta0_aslo;       // anchor for aslo mode
  std::string T0_theory;  // theory warm-up length for eps_bar, or why it is unavailable
};

inline Prepared prepare(const ExperimentConfig& c) {
  validate_config(c);
  Prepared pr;
  pr.model = build_model(c);
  try {
    pr.K0 = c.K0 ? *c.K0 : default_initial_gain(pr.model);
    pr.cert0 = stability_certificate(pr.model, pr.K0);
  } catch (const NotStabilizingError& e) {
    throw ConfigError("K0", e.what());
  } catch (const NotStabilizableError& e) {
    throw ConfigError("model", e.what());
  }
  pr.params = make_schedule(pr.model, pr.cert0, c.schedule);
  // also recorded in constants.json
  for (const auto& w : pr.params.warnings) log(LogLevel::info, w);
  pr.J_star = pr.model.sigma_w * pr.model.sigma_w * solve_dare(pr.model).P_star.trace();
  pr.theta0_aslo = c.theta0 ? *c.theta0 : perturbed_theta(pr.model, 0.2);

  long theory = -1;
  try {
    theory = warmup_duration(pr.params.eps_bar, pr.params);
    pr.T0_theory = std::to_string(theory);
  } catch (const Error& e) {
    pr.T0_theory = e.what();
  }
  pr.T0 = c.T0;
  if (c.T0_auto) {
    if (theory < 1) throw ConfigError("T0", "auto warm-up length unavailable: " + pr.T0_theory);
    if (theory > c.T) throw ConfigError("T0", "auto warm-up length " + std::to_string(theory) + " exceeds T");
    pr.T0 = theory;
  }
  return pr;
}

inline nlohmann::json constants_report(const Prepared& pr) {
  const ScheduleParams& p = pr.params;
  auto l10 = [](double ln) { return ln / std::log(10.0); };
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["n"] = p.n;
  j["m"] = p.m;
  j["sigma_w"] = p.sigma_w;
  j["theta_bound"] = p.theta_bound;
  j["alpha0"] = p.alpha0;
  j["alpha1"] = p.alpha1;
  j["kappa0"] = p.kappa0;
  j["gamma0"] = p.gamma0;
  j["rho_K0"] = pr.cert0.spectral_radius;
  j["nu"] = p.nu;
  j["kappa"] = p.kappa;
  j["gamma"] = p.gamma;
  j["delta"] = p.delta;
  j["phi"] = p.phi;
  j["phi_requested"] = p.phi_requested;
  j["phi_bar"] = p.phi_bar;
  j["beta"] = p.beta;
  j["beta_floor"] = p.beta_floor;
  j["chi"] = p.chi;
  j["alpha_bar"] = p.alpha_bar;
  j["alpha_under"] = p.alpha_under;
  j["log10_G_theory"] = l10(p.log_G_theory);
  j["log10_G_star_theory"] = l10(p.log_G_star_theory);
  j["log10_tau_star"] = l10(p.log_tau_star);
  j["log10_tau_star_relaxed"] = l10(p.log_tau_star_relaxed);
  j["G_used"] = p.G_phi;
  j["G_star_used"] = p.G_star;
  j["eps_bar"] = p.eps_bar;
  j["eps_under"] = p.eps_under;
  j["constants_mode"] = to_string(p.constants_mode);
  j["lambda_scale"] = p.lambda_scale;
  j["noise_scale"] = p.noise_scale;
  j["mu_scale"] = p.mu_scale;
  j["J_star"] = pr.J_star;
  j["T0"] = pr.T0;
  j["T0_theory"] = pr.T0_theory;
  j["warnings"] = p.warnings;
  return j;
}

// ---- per-seed runs ------------------------------------------------------------

inline std::string seed_path(const std::string& dir, std::uint64_t seed, const std::string& what) {
  return (std::filesystem::path(dir) / fmt::format("seed_{}_{}", seed, what)).string();
}

namespace detail {

inline nlohmann::json terms_json(const RegretTerms& r) { return nlohmann::json(std::vector<double>(r.begin(), r.end())); }

inline nlohmann::json aslo_summary(const AsloResult& a, const SystemModel& model, const ScheduleParams& p,
                                   long t_offset) {
  nlohmann::json j;
  const AsloDiagnostics& d = a.diag;
  const double T = static_cast<double>(a.traj.size());
  j["T"] = a.traj.size();
  j["t_offset"] = t_offset;
  j["N"] = a.ledger.N;
  double nb = epoch_count_bound(a);
  j["N_bound"] = nb;
  j["N_within_bound"] = static_cast<double>(a.ledger.N) <= nb;
  j["max_x_norm"] = d.max_x_norm;
  j["max_z_sq"] = d.max_z_sq;
  j["max_rho"] = d.max_rho;
  j["unstable_epochs"] = d.unstable_epochs;
  j["synthesis_failures"] = d.synthesis_failures;
  j["seq_gap_violations"] = d.seq_gap_violations;
  j["seq_gap_violations_anynum"] = d.seq_gap_violations_anynum;
  int anynum = 0, gaps = 0;
  double max_gap = 0.0;
  for (const auto& e : a.epochs) {
    anynum += e.anynum;
    if (std::isfinite(e.seq_gap)) ++gaps, max_gap = std::max(max_gap, e.seq_gap);
  }
  j["anynum_epochs"] = anynum;
  j["seq_gaps_measured"] = gaps;
  j["max_seq_gap"] = max_gap;
  j["seq_gap_limit"] = 1.0 + p.gamma / 2.0;
  j["anynum_ever"] = d.anynum_ever;
  j["anynum_lost"] = d.anynum_lost;
  j["failures"] = d.failures;

  RegretTerms replay = decompose(a.traj, a.epochs, model, p);
  RegretTerms bounds = term_bounds(T, p, traj_stats(a));
  double max_rel = 0.0;
  int viol = 0;
  for (int k = 0; k < 6; ++k) {
    max_rel = std::max(max_rel, std::abs(replay[k] - a.ledger.R[k]) / std::max(1.0, std::abs(replay[k])));
    viol += std::abs(a.ledger.R[k]) > bounds[k];
  }
  j["R_ledger"] = terms_json(a.ledger.R);
  j["R_replay"] = terms_json(replay);
  j["R_bounds"] = terms_json(bounds);
  j["decomposition_max_rel_diff"] = max_rel;
  j["term_bound_violations"] = viol;
  double realized = a.ledger.realized_regret.empty() ? 0.0 : a.ledger.realized_regret.back();
  j["realized_regret"] = realized;
  j["sum_R"] = a.ledger.total();
  j["realized_minus_sum_R"] = realized - a.ledger.total();
  int contained = 0;
  for (const auto& c : a.checkpoints) contained += c.contained;
  j["coverage_checks"] = a.checkpoints.size();
  j["coverage_contained"] = contained;
  return j;
}

}  // namespace detail

// Runs one seed, writes its files and returns the summary (also written).
inline nlohmann::json run_seed(const ExperimentConfig& c, const Prepared& pr, std::uint64_t seed,
                               const std::string& dir) {
  namespace fs = std::filesystem;
  const std::string traj_path = seed_path(dir, seed, "trajectory.csv");
  const std::string cp_path = seed_path(dir, seed, "checkpoints.csv");
  const std::string ep_path = seed_path(dir, seed, "epochs.csv");
  const std::string sum_path = seed_path(dir, seed, "summary.json");
  for (const auto& f : {traj_path, cp_path, ep_path}) fs::remove(f);

  const SystemModel& model = pr.model;
  const ScheduleParams& p = pr.params;
  nlohmann::json s;
  s["seed"] = seed;
  s["mode"] = to_string(c.mode);
  s["J_star"] = pr.J_star;
  try {
    TrajectoryRecord all;
    std::vector<PolicyEpoch> epochs;
    std::vector<CoverageCheckpoint> cps;
    long ep_offset = 0;
    WarmupOptions wo;
    wo.x0 = c.x0;
    wo.kappa0 = p.kappa0;
    switch (c.mode) {
      case RunMode::warmup: {
        auto w = run_warmup(model, pr.K0, c.T, seed, wo);
        all = std::move(w.traj);
        s["warmup"] = {{"T0", c.T}, {"theta0_error", (w.theta0 - model.theta()).norm()}};
        break;
      }
      case RunMode::full:
      case RunMode::aslo: {
        AsloOptions ao;
        ao.fallback_gain = pr.K0;
        ao.checkpoints = c.checkpoints;
        Mat theta0 = pr.theta0_aslo;
        if (c.mode == RunMode::full) {
          auto w = run_warmup(model, pr.K0, pr.T0, seed, wo);
          s["warmup"] = {{"T0", pr.T0}, {"theta0_error", (w.theta0 - model.theta()).norm()}};
          theta0 = w.theta0;
          ao.x0 = w.traj.x.back();
          ao.t_offset = pr.T0;
          all = std::move(w.traj);
        } else {
          ao.x0 = c.x0;
          all.n = model.n();
          all.m = model.m();
          all.x.push_back(ao.x0 ? *ao.x0 : Vec::Zero(model.n()));
        }
        ep_offset = ao.t_offset;
        double eps = c.anchor_eps ? *c.anchor_eps : (theta0 - model.theta()).norm();
        auto a = run_aslo(model, theta0, eps, c.T, p, seed, ao);
        append_steps(all, a.traj, 1, 1);
        s["aslo"] = detail::aslo_summary(a, model, p, ao.t_offset);
        epochs = std::move(a.epochs);
        cps = std::move(a.checkpoints);
        break;
      }
      case RunMode::doubling: {
        auto d = run_doubling(model, pr.K0, c.doubling_base, c.T, p, seed);
        all = std::move(d.traj);
        s["doubling"] = {{"segments", d.segments.size()}, {"synthesis_failures", d.synthesis_failures}};
        break;
      }
    }
    auto reg = realized_regret(all, pr.J_star);
    s["steps"] = all.size();
    s["final_cum_regret"] = reg.empty() ? 0.0 : reg.back();
    s["final_x_norm"] = all.x.back().norm();
    write_trajectory_csv(to_table(all, reg), traj_path);
    write_checkpoints_csv(cps, cp_path);
    write_epochs_csv(epochs, 1, ep_offset, ep_path);
    s["status"] = "ok";
    s["error"] = "";
  } catch (const std::exception& e) {
    s["status"] = "failed";
    s["error"] = e.what();
    log(LogLevel::error, fmt::format("seed {}: {}", seed, e.what()));
  }
  write_json(s, sum_path);
  return s;
}

// ---- statistics ---------------------------------------------------------------

struct CoverageSummary {
  long pairs = 0;
  long contained = 0;
  double frequency = kNaN;
  double binomial_sigma = kNaN;  // sqrt(delta (1-delta) / pairs)
  double threshold = kNaN;       // 1 - delta - 3 sigma
};

inline CoverageSummary coverage_summary(const std::vector<std::vector<CoverageCheckpoint>>& reports, double delta) {
  CoverageSummary s;
  for (const auto& r : reports)
    for (const auto& c : r) {
      ++s.pairs;
      s.contained += c.contained;
    }
  if (s.pairs > 0) {
    s.frequency = static_cast<double>(s.contained) / static_cast<double>(s.pairs);
    s.binomial_sigma = std::sqrt(delta * (1.0 - delta) / static_cast<double>(s.pairs));
    s.threshold = 1.0 - delta - 3.0 * s.binomial_sigma;
  }
  return s;
}

// Fraction of (seed, checkpoint) pairs with Theta* inside the confidence set.
inline double coverage_check(const std::vector<std::vector<CoverageCheckpoint>>& reports, double delta) {
  return coverage_summary(reports, delta).frequency;
}

struct ErrorBin {
  double tau = 0.0;  // geometric mean of the epoch starts in the bin
  double mean = 0.0;
  long count = 0;
};

// Pools (tau, error) pairs into octave bins [2^k, 2^(k+1)), tau >= tau_min.
inline std::vector<ErrorBin> octave_bins(const std::vector<std::pair<double, double>>& pts, double tau_min = 8.0) {
  std::map<int, std::array<double, 3>> acc;
  for (const auto& [tau, err] : pts) {
    if (tau < tau_min || !std::isfinite(err)) continue;
    int k = static_cast<int>(std::floor(std::log2(tau)));
    auto& a = acc[k];
    a[0] += std::log(tau);
    a[1] += err;
    a[2] += 1.0;
  }
  std::vector<ErrorBin> out;
  for (const auto& [k, a] : acc) out.push_back({std::exp(a[0] / a[2]), a[1] / a[2], static_cast<long>(a[2])});
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? kNaN : s / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v), s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Number of leading warm-up rows (epoch 0) that precede the adaptive phase.
inline std::size_t phase_offset(const TrajectoryTable& rows, RunMode mode) {
  if (mode != RunMode::full) return 0;
  std::size_t k = 0;
  while (k < rows.size() && rows[k].epoch == 0) ++k;
  return k;
}

// Cumulative regret of the adaptive phase, re-based at its start.
inline std::vector<double> phase_regret(const TrajectoryTable& rows, std::size_t off) {
  std::vector<double> out;
  out.reserve(rows.size() - off);
  double base = off > 0 ? rows[off - 1].cum_regret : 0.0;
  for (std::size_t i = off; i < rows.size(); ++i) out.push_back(rows[i].cum_regret - base);
  return out;
}

// Built only from the files in `dir`.
inline nlohmann::json aggregate_from_files(const ExperimentConfig& c, const std::string& dir) {
  using nlohmann::json;
  json agg;
  agg["schema_version"] = kSchemaVersion;
  agg["mode"] = to_string(c.mode);
  agg["criterion"] = to_string(c.schedule.criterion);
  agg["constants"] = read_json((std::filesystem::path(dir) / "constants.json").string());
  agg["seeds"] = c.seeds.size();

  json per_seed = json::array(), failures = json::array();
  std::vector<std::vector<double>> series;
  std::vector<std::pair<double, double>> err_pts;
  std::vector<std::vector<CoverageCheckpoint>> cov;
  std::vector<double> epoch_counts;
  long term_viol = 0, epoch_viol = 0, seq_viol = 0, seq_viol_anynum = 0, synth_fail = 0, unstable = 0;
  double max_x = 0.0, max_rho = 0.0, max_decomp = 0.0;
  const bool adaptive = c.mode == RunMode::full || c.mode == RunMode::aslo;

  for (std::uint64_t seed : c.seeds) {
    json s = read_json(seed_path(dir, seed, "summary.json"));
    per_seed.push_back(s);
    if (s.value("status", "") != "ok") {
      failures.push_back({{"seed", seed}, {"error", s.value("error", "")}});
      continue;
    }
    TrajectoryTable rows = read_trajectory_csv(seed_path(dir, seed, "trajectory.csv"));
    std::size_t off = phase_offset(rows, c.mode);
    series.push_back(phase_regret(rows, off));
    if (adaptive) {
      long starts = 0;
      for (std::size_t i = off; i < rows.size(); ++i) {
        if (!std::isfinite(rows[i].r)) continue;
        ++starts;
        err_pts.emplace_back(static_cast<double>(rows[i].t - static_cast<long>(off)), rows[i].est_error);
      }
      epoch_counts.push_back(static_cast<double>(starts - 1));
      cov.push_back(read_checkpoints_csv(seed_path(dir, seed, "checkpoints.csv")));
      const json& a = s.at("aslo");
      term_viol += a.value("term_bound_violations", 0);
      epoch_viol += a.value("N_within_bound", true) ? 0 : 1;
      seq_viol += a.value("seq_gap_violations", 0);
      seq_viol_anynum += a.value("seq_gap_violations_anynum", 0);
      synth_fail += a.value("synthesis_failures", 0);
      unstable += a.value("unstable_epochs", 0);
      max_x = std::max(max_x, a.value("max_x_norm", 0.0));
      max_rho = std::max(max_rho, a.value("max_rho", 0.0));
      max_decomp = std::max(max_decomp, a.value("decomposition_max_rel_diff", 0.0));
    } else {
      for (const auto& r : rows) max_x = std::max(max_x, r.x_norm);
    }
  }
  agg["per_seed"] = per_seed;
  agg["failures"] = failures;
  agg["completed"] = series.size();

  json regret;
  if (!series.empty()) {
    const std::size_t L = series.front().size();
    std::vector<double> mean(L, 0.0);
    for (const auto& s : series)
      for (std::size_t i = 0; i < L && i < s.size(); ++i) mean[i] += s[i] / static_cast<double>(series.size());
    std::vector<long> ts;
    for (long t = 10; t <= static_cast<long>(L); t *= 10) ts.push_back(t);
    if (ts.empty() || ts.back() != static_cast<long>(L)) ts.push_back(static_cast<long>(L));
    json cps = json::array();
    for (long t : ts) {
      std::vector<double> v;
      for (const auto& s : series) v.push_back(s[t - 1]);
      cps.push_back({{"t", t}, {"mean", mean_of(v)}, {"std", sample_sd(v)}});
    }
    regret["checkpoints"] = cps;
    regret["slope_window"] = {c.window_lo(), c.window_hi()};
    try {
      regret["slope"] = slope(mean, c.window_lo(), c.window_hi());
    } catch (const DomainError& e) {
      regret["slope"] = nullptr;
      regret["slope_error"] = e.what();
    }
  }
  agg["regret"] = regret;

  json est;
  if (adaptive) {
    auto bins = octave_bins(err_pts);
    json jb = json::array();
    std::vector<double> bt, bm;
    for (const auto& b : bins) {
      jb.push_back({{"tau", b.tau}, {"mean_error", b.mean}, {"count", b.count}});
      bt.push_back(b.tau);
      bm.push_back(b.mean);
    }
    est["bins"] = jb;
    try {
      est["slope"] = slope_xy(bt, bm);
    } catch (const DomainError& e) {
      est["slope"] = nullptr;
      est["slope_error"] = e.what();
    }
  }
  agg["estimation"] = est;

  CoverageSummary cs = coverage_summary(cov, c.schedule.delta);
  agg["coverage"] = {{"pairs", cs.pairs},
                     {"contained", cs.contained},
                     {"frequency", cs.frequency},
                     {"binomial_sigma", cs.binomial_sigma},
                     {"threshold", cs.threshold}};

  json ep;
  ep["per_seed"] = epoch_counts;
  if (!epoch_counts.empty()) {
    ep["mean"] = mean_of(epoch_counts);
    ep["min"] = *std::min_element(epoch_counts.begin(), epoch_counts.end());
    ep["max"] = *std::max_element(epoch_counts.begin(), epoch_counts.end());
  }
  agg["epochs"] = ep;
  agg["bound_violations"] = {{"regret_terms", term_viol},
                             {"epoch_count", epoch_viol},
                             {"seq_gap", seq_viol},
                             {"seq_gap_anynum", seq_viol_anynum}};
  agg["stability"] = {{"max_x_norm", max_x},
                      {"max_rho", max_rho},
                      {"unstable_epochs", unstable},
                      {"synthesis_failures", synth_fail}};
  agg["decomposition_max_rel_diff"] = max_decomp;
  return agg;
}

// ---- orchestration ------------------------------------------------------------

struct AggregateReport {
  nlohmann::json data;
  int failed_seeds = 0;
  std::string path;
};

inline AggregateReport run_experiment(const ExperimentConfig& c) {
  Prepared pr = prepare(c);
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw IoError("cannot create output directory '" + c.out + "': " + ec.message());
  write_json(config_to_json(c), (fs::path(c.out) / "config.json").string());
  write_json(constants_report(pr), (fs::path(c.out) / "constants.json").string());

  const std::size_t S = c.seeds.size();
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  std::size_t workers = std::min<std::size_t>(S, c.workers > 0 ? static_cast<std::size_t>(c.workers) : hw);
  std::vector<int> ok(S, 0);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < S; i = next++) {
      log(LogLevel::debug, fmt::format("seed {} start", c.seeds[i]));
      auto s = run_seed(c, pr, c.seeds[i], c.out);
      ok[i] = s.value("status", "") == "ok";
      log(LogLevel::info, fmt::format("seed {} {}", c.seeds[i], s.value("status", "")));
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  AggregateReport rep;
  rep.data = aggregate_from_files(c, c.out);
  rep.failed_seeds = static_cast<int>(std::count(ok.begin(), ok.end(), 0));
  rep.path = (fs::path(c.out) / "aggregate.json").string();
  write_json(rep.data, rep.path);
  return rep;
}

}  // namespace alqr
