// Acceptance suite: one PASS/FAIL line per criterion P1..P11.
// Usage: acceptance [output-dir]   (default ./acceptance_out)

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "alqr/benchmarks.hpp"
#include "alqr/estimator.hpp"
#include "alqr/harness.hpp"
#include "alqr/loops.hpp"
#include "alqr/sdp_synthesis.hpp"
#include "test_support.hpp"

using namespace alqr;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// tolerances
constexpr double kGoldenTol = 1e-9;
constexpr double kDareResidualTol = 1e-8;
constexpr int kDarePlants = 100;
constexpr double kSdpTol = 1e-4;
constexpr int kSdpPlants = 20;
constexpr double kSdpSeconds = 60.0;
constexpr double kCoverageSigmas = 3.0;
constexpr int kCoverageSeeds = 500;
constexpr double kEstSlopeLo = -0.6, kEstSlopeHi = -0.15;
constexpr double kRegretSlopeLo = 0.4, kRegretSlopeHi = 0.7;
constexpr int kRateSeeds = 20;
constexpr long kRateT = 10000;
constexpr long kWarmup = 100;
constexpr double kMaxState = 1e3;
constexpr double kBetaSlope = -0.25, kBetaSlopeTol = 0.1;
constexpr int kLemmaSamples = 1000;
constexpr double kLemmaSlack = -1e-10;
constexpr int kMinEigRuns = 200;
constexpr long kMinEigT = 2000;
constexpr double kMinEigFraction = 0.95;
constexpr double kDecompTol = 1e-8;

int failures = 0;

void verdict(const std::string& id, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  fmt::print("{} {} {}\n", id, pass ? "PASS" : "FAIL", detail);
  std::fflush(stdout);
}

void note(const std::string& id, const std::string& detail) {
  fmt::print("{} INFO {}\n", id, detail);
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentConfig bench_config(const std::string& out, long T, int seeds) {
  ExperimentConfig c = config_from_json(json{{"model", {{"benchmark", "bench-2x2"}}}});
  c.mode = RunMode::full;
  c.T = T;
  c.T0 = kWarmup;
  c.seeds.clear();
  for (int k = 0; k < seeds; ++k) c.seeds.push_back(static_cast<std::uint64_t>(k));
  c.out = out;
  return c;
}

double num(const json& j) { return j.is_number() ? j.get<double>() : kNaN; }

std::vector<double> log_grid(double lo, double hi, int k) {
  std::vector<double> v;
  for (int i = 0; i < k; ++i) v.push_back(lo * std::pow(hi / lo, i / (k - 1.0)));
  return v;
}

Mat random_spd(std::mt19937_64& rng, int d, double lo, double hi) {
  Eigen::HouseholderQR<Mat> qr(alqr::testing::gaussian(rng, d, d));
  Mat U = qr.householderQ();
  std::uniform_real_distribution<double> ur(lo, hi);
  Vec e(d);
  for (int i = 0; i < d; ++i) e(i) = ur(rng);
  return U * e.asDiagonal() * U.transpose();
}

// ---------------------------------------------------------------------------

void p1() {
  SystemModel g = benchmark("scalar-golden");
  double P = solve_dare(g).P_star(0, 0);
  double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  double err = std::abs(P - golden);
  std::mt19937_64 rng(20240101);
  double worst = 0.0;
  int unstable = 0;
  for (int k = 0; k < kDarePlants; ++k) {
    SystemModel s = alqr::testing::random_plant(rng, 3, 3);
    auto sol = solve_dare(s);
    Mat res = sol.P_star - dare_rhs(s.A, s.B, s.Q, s.R, sol.P_star);
    worst = std::max(worst, res.cwiseAbs().maxCoeff());
    unstable += !(la::spectral_radius(s.A + s.B * sol.K_star) < 1.0);
  }
  verdict("P1", err <= kGoldenTol && worst <= kDareResidualTol && unstable == 0,
          fmt::format("golden |P-phi|={:.2e} (tol {:.0e}); max DARE residual {:.2e} over {} random 3x3 plants (tol {:.0e}); "
                      "non-stabilizing gains {}",
                      err, kGoldenTol, worst, kDarePlants, kDareResidualTol, unstable));
}

void p2() {
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240202);
  std::uniform_int_distribution<int> dim(1, 3);
  double worst_K = 0.0, worst_J = 0.0;
  for (int k = 0; k < kSdpPlants; ++k) {
    int n = dim(rng), m = dim(rng);
    SystemModel s = alqr::testing::random_plant(rng, n, m);
    auto dare = solve_dare(s);
    auto sol = solve_relaxed(build_relaxed_primal(s.theta(), s, 0.0, Mat::Identity(n + m, n + m)));
    Mat K = extract_policy(sol.Sigma_star, n);
    worst_K = std::max(worst_K, (K - dare.K_star).cwiseAbs().maxCoeff());
    worst_J = std::max(worst_J, std::abs(sol.primal_objective - dare.J_star) / std::max(1.0, dare.J_star));
  }
  double secs = seconds_since(t0);
  verdict("P2", worst_K <= kSdpTol && worst_J <= kSdpTol && secs < kSdpSeconds,
          fmt::format("{} random plants, mu=0, Theta_hat=Theta*: max |K-K*| {:.2e}, max rel |J-J*| {:.2e} (tol {:.0e}); "
                      "{:.1f}s (limit {:.0f}s)",
                      kSdpPlants, worst_K, worst_J, kSdpTol, secs, kSdpSeconds));
}

json p3(const std::string& root) {
  auto c = bench_config((fs::path(root) / "coverage").string(), 2000, kCoverageSeeds);
  c.checkpoints = {500, 1000, 2000};
  auto t0 = std::chrono::steady_clock::now();
  auto rep = run_experiment(c);
  const json& cov = rep.data["coverage"];
  double freq = num(cov["frequency"]);
  long pairs = cov["pairs"].get<long>();
  double sigma = std::sqrt(c.schedule.delta * (1.0 - c.schedule.delta) / static_cast<double>(pairs));
  double thr = 1.0 - c.schedule.delta - kCoverageSigmas * sigma;
  verdict("P3", rep.failed_seeds == 0 && pairs == 3L * kCoverageSeeds && freq >= thr,
          fmt::format("anchored set, delta={}, {} seeds x 3 checkpoints: contained {}/{} = {:.4f} (need >= {:.4f}); "
                      "failed seeds {}; {:.0f}s",
                      c.schedule.delta, kCoverageSeeds, cov["contained"].get<long>(), pairs, freq, thr,
                      rep.failed_seeds, seconds_since(t0)));
  return rep.data;
}

void p7() {
  SystemModel s = benchmark("bench-2x2");
  auto p = make_schedule(s, stability_certificate(s, default_initial_gain(s)), {});
  std::vector<double> taus, betas;
  bool positive = true, decreasing = true;
  double prev = std::numeric_limits<double>::infinity();
  for (double tau : log_grid(1e3, 1e6, 301)) {
    double b = adaptive_beta(tau, radius_bound(tau, p), p);
    positive = positive && b > 0.0;
    decreasing = decreasing && b < prev;
    prev = b;
    taus.push_back(tau);
    betas.push_back(b);
  }
  double slope = slope_xy(taus, betas);
  verdict("P7", positive && decreasing && std::abs(slope - kBetaSlope) <= kBetaSlopeTol,
          fmt::format("adaptive beta over tau in [1e3,1e6]: positive {}, decreasing {}, log-log slope {:.4f} "
                      "(target {} +- {}); beta(1e3)={:.4g}, beta(1e6)={:.4g}",
                      positive, decreasing, slope, kBetaSlope, kBetaSlopeTol, betas.front(), betas.back()));
}

void p8() {
  std::mt19937_64 rng(20240808);
  std::uniform_int_distribution<int> dim(1, 5);
  std::uniform_real_distribution<double> ur(0.0, 1.0);
  double min_slack = std::numeric_limits<double>::infinity();
  int passed = 0;
  for (int k = 0; k < kLemmaSamples; ++k) {
    int pd = dim(rng), d = dim(rng);
    Mat X = alqr::testing::gaussian(rng, pd, d, 3.0 * ur(rng));
    Mat P = random_spd(rng, pd, 0.0, 5.0);
    Mat V = random_spd(rng, d, 0.05, 20.0);
    double r = 5.0 * ur(rng);
    // Delta'Delta <= r V^-1 by construction
    Mat U = alqr::testing::gaussian(rng, pd, d);
    U *= ur(rng) / std::max(1e-12, la::spectral_norm(U));
    Mat Delta = U * la::sqrtm(r * la::spd_inverse(V));
    double mu_l = r + 2.0 * la::spectral_norm(X) * std::sqrt(la::spectral_norm(V)) * std::sqrt(r);
    Mat D = (X + Delta).transpose() * P * (X + Delta) - X.transpose() * P * X;
    Mat bound = mu_l * P.trace() * la::spd_inverse(V);
    min_slack = std::min({min_slack, la::min_eig(la::sym(bound - D)), la::min_eig(la::sym(bound + D))});
    passed += perturbation_check(X, Delta, P, V, r);
  }
  verdict("P8", passed == kLemmaSamples && min_slack >= kLemmaSlack,
          fmt::format("{}/{} samples (dims <= 5) satisfy the two-sided bound; min eigenvalue slack {:.3e} (need >= {:.0e})",
                      passed, kLemmaSamples, min_slack, kLemmaSlack));
}

void p9() {
  SystemModel s = benchmark("bench-2x2");
  Mat K0 = default_initial_gain(s);
  ScheduleOptions o;
  o.noise_scale = 1.0;  // perturbation variance exactly as in the algorithm
  auto p = make_schedule(s, stability_certificate(s, K0), o);
  const int n = s.n(), d = s.n() + s.m();
  const double pred = min_eig_prediction(static_cast<double>(kMinEigT), s.sigma_w, p_bar(kMinEigT, p.delta, p.phi));
  int ok = 0;
  double lo = std::numeric_limits<double>::infinity(), ratio_sum = 0.0;
  for (int k = 0; k < kMinEigRuns; ++k) {
    auto rng_w = make_rng(k, Stream::omega, 9);
    auto rng_e = make_rng(k, Stream::eta, 9);
    Vec x = Vec::Zero(n), z(d);
    Mat S = Mat::Zero(d, d);
    for (long t = 1; t <= kMinEigT; ++t) {
      Vec u = K0 * x + sample_perturbation(static_cast<double>(t), p, rng_e);
      z << x, u;
      S.noalias() += z * z.transpose();
      x = step(s, x, u, gaussian_vector(rng_w, n, s.sigma_w));
    }
    double e = la::min_eig(S);
    ok += e >= pred;
    lo = std::min(lo, e / pred);
    ratio_sum += e / pred;
  }
  double frac = static_cast<double>(ok) / kMinEigRuns;
  bool regime = kMinEigT >= 200.0 * std::log(1.0 / p.delta);
  verdict("P9", regime && frac >= kMinEigFraction,
          fmt::format("t={} (>= 200 log(1/delta) = {:.0f}), fixed K0 + exploration: lambda_min >= prediction {:.4g} in "
                      "{}/{} runs = {:.3f} (need >= {}); min ratio {:.3g}, mean ratio {:.3g}",
                      kMinEigT, 200.0 * std::log(1.0 / p.delta), pred, ok, kMinEigRuns, frac, kMinEigFraction, lo,
                      ratio_sum / kMinEigRuns));
}

// P4, P5, P6, P10 and P11 share the det2 runs.
void rate_criteria(const std::string& root, const json& coverage_run) {
  auto c = bench_config((fs::path(root) / "rate_det2").string(), kRateT, kRateSeeds);
  c.slope_lo = 1e3;
  c.slope_hi = 1e4;
  auto t0 = std::chrono::steady_clock::now();
  auto rep = run_experiment(c);
  const json& a = rep.data;
  note("P5", fmt::format("{} seeds x T={} finished in {:.0f}s, failed seeds {}", kRateSeeds, kRateT, seconds_since(t0),
                         rep.failed_seeds));

  double es = num(a["estimation"]["slope"]);
  verdict("P4", rep.failed_seeds == 0 && es >= kEstSlopeLo && es <= kEstSlopeHi,
          fmt::format("epoch-start ||Theta_hat - Theta*||_* over {} seeds: log-log slope {:.4f} (need [{}, {}]); "
                      "{} octave bins",
                      kRateSeeds, es, kEstSlopeLo, kEstSlopeHi, a["estimation"]["bins"].size()));

  double rs = num(a["regret"]["slope"]);
  verdict("P5", rep.failed_seeds == 0 && rs >= kRegretSlopeLo && rs <= kRegretSlopeHi,
          fmt::format("mean cumulative regret over {} seeds, det2, practical constants: slope over [1e3, 1e4] {:.4f} "
                      "(need [{}, {}]); mean regret at T {:.4g}",
                      kRateSeeds, rs, kRegretSlopeLo, kRegretSlopeHi, num(a["regret"]["checkpoints"].back()["mean"])));

  const json& st = a["stability"];
  const json& bv = a["bound_violations"];
  long gaps = 0, anynum_epochs = 0;
  double max_gap = 0.0;
  for (const auto& s : a["per_seed"]) {
    if (!s.contains("aslo")) continue;
    gaps += s["aslo"]["seq_gaps_measured"].get<long>();
    anynum_epochs += s["aslo"]["anynum_epochs"].get<long>();
    max_gap = std::max(max_gap, num(s["aslo"]["max_seq_gap"]));
  }
  verdict("P6",
          rep.failed_seeds == 0 && st["unstable_epochs"].get<long>() == 0 && num(st["max_x_norm"]) <= kMaxState &&
              bv["seq_gap_anynum"].get<long>() == 0,
          fmt::format("unstable epochs {}, max rho(A+BK) {:.4f}, max ||x|| {:.2f} (limit {:.0f}); sequential gap measured "
                      "at {} updates, max {:.4f}, violations of 1+gamma/2 = {:.6f}: {} total, {} with anynum "
                      "(anynum held at {} epochs)",
                      st["unstable_epochs"].get<long>(), num(st["max_rho"]), num(st["max_x_norm"]), kMaxState, gaps,
                      max_gap, 1.0 + num(a["constants"]["gamma"]) / 2.0, bv["seq_gap"].get<long>(),
                      bv["seq_gap_anynum"].get<long>(), anynum_epochs));

  // adaptive criterion and doubling baseline on matched seeds
  auto ca = c;
  ca.schedule.criterion = Criterion::adaptive_beta;
  ca.out = (fs::path(root) / "rate_adaptive").string();
  auto ra = run_experiment(ca);
  auto cd = c;
  cd.mode = RunMode::doubling;
  cd.out = (fs::path(root) / "rate_doubling").string();
  auto rd = run_experiment(cd);

  long epoch_viol = bv["epoch_count"].get<long>();
  std::vector<double> counts = a["epochs"]["per_seed"].get<std::vector<double>>();
  double max_ratio = 0.0;
  for (const auto& s : a["per_seed"])
    if (s.contains("aslo")) max_ratio = std::max(max_ratio, num(s["aslo"]["N"]) / num(s["aslo"]["N_bound"]));
  verdict("P10", rep.failed_seeds == 0 && epoch_viol == 0,
          fmt::format("N(T) <= (n+m) log2((lambda_T + Zbar T)/lambda_1) on {}/{} det2 runs; mean N {:.2f}, "
                      "max N/bound {:.3f}",
                      kRateSeeds - epoch_viol, kRateSeeds, num(a["epochs"]["mean"]), max_ratio));
  for (std::size_t k = 0; k < c.seeds.size(); ++k) {
    const json& d2 = a["per_seed"][k];
    const json& ad = ra.data["per_seed"][k];
    const json& db = rd.data["per_seed"][k];
    auto get_n = [](const json& s) { return s.contains("aslo") ? num(s["aslo"]["N"]) : kNaN; };
    note("P10", fmt::format("seed {:>2}: det2 N={:>3.0f} regret {:>10.2f} | adaptive N={:>3.0f} regret {:>10.2f} | "
                            "doubling regret {:>10.2f}",
                            c.seeds[k], get_n(d2), num(d2.value("final_cum_regret", json())), get_n(ad),
                            num(ad.value("final_cum_regret", json())), num(db.value("final_cum_regret", json()))));
  }
  note("P10", fmt::format("mean epochs det2 {:.2f} vs adaptive {:.2f}; adaptive failed seeds {}, doubling failed seeds {}",
                          num(a["epochs"]["mean"]), num(ra.data["epochs"]["mean"]), ra.failed_seeds, rd.failed_seeds));

  double worst = 0.0;
  long runs = 0;
  for (const json* agg : std::vector<const json*>{&a, &ra.data, &coverage_run})
    for (const auto& s : (*agg)["per_seed"])
      if (s.contains("aslo")) {
        worst = std::max(worst, num(s["aslo"]["decomposition_max_rel_diff"]));
        ++runs;
      }
  for (const auto& s : a["per_seed"]) {
    if (!s.contains("aslo")) continue;
    const json& r = s["aslo"];
    note("P11", fmt::format("seed {:>2}: realized {:>10.2f}  sum R {:>10.2f}  gap {:>10.2f}  R = [{:.4g}]",
                            s["seed"].get<long>(), num(r["realized_regret"]), num(r["sum_R"]),
                            num(r["realized_minus_sum_R"]), fmt::join(r["R_ledger"].get<std::vector<double>>(), ", ")));
  }
  long expected = static_cast<long>(c.seeds.size() + ca.seeds.size()) + kCoverageSeeds;
  verdict("P11", runs == expected && worst <= kDecompTol,
          fmt::format("R1..R6 replayed from stored trajectories vs online ledger on {} runs: max relative difference "
                      "{:.2e} (tol {:.0e})",
                      runs, worst, kDecompTol));
}

}  // namespace

int main(int argc, char** argv) {
  std::string root = argc > 1 ? argv[1] : "acceptance_out";
  fs::create_directories(root);
  auto t0 = std::chrono::steady_clock::now();
  try {
    p1();
    p2();
    json cov = p3(root);
    rate_criteria(root, cov);
    p7();
    p8();
    p9();
  } catch (const std::exception& e) {
    fmt::print("acceptance aborted: {}\n", e.what());
    return 2;
  }
  fmt::print("{} criteria failed; total {:.0f}s\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
