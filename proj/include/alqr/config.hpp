#pragma once

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "alqr/benchmarks.hpp"
#include "alqr/errors.hpp"
#include "alqr/schedules.hpp"

namespace alqr {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum class RunMode { warmup, aslo, doubling, full };

inline std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::warmup: return "warmup";
    case RunMode::aslo: return "aslo";
    case RunMode::doubling: return "doubling";
    case RunMode::full: return "full";
  }
  return "unknown";
}

struct ModelSpec {
  std::string benchmark;  // empty: explicit matrices
  Mat A, B, Q, R;
  double sigma_w = 1.0;
  std::optional<double> theta_bound;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  ModelSpec model;
  std::optional<Mat> K0;
  std::optional<Mat> theta0;  // aslo mode only
  std::optional<Vec> x0;
  RunMode mode = RunMode::full;
  ScheduleOptions schedule;
  long T = 10000;
  long T0 = 100;
  bool T0_auto = false;
  std::vector<std::uint64_t> seeds{0};
  std::string out = "out";
  std::vector<long> checkpoints;
  long doubling_base = 100;
  int workers = 0;  // 0: hardware concurrency
  std::optional<double> anchor_eps;  // absent: Frobenius error of Theta0
  std::optional<double> slope_lo, slope_hi;

  double window_lo() const { return slope_lo ? *slope_lo : std::max(1.0, T / 10.0); }
  double window_hi() const { return slope_hi ? *slope_hi : static_cast<double>(T); }
};

// ---- enum names -----------------------------------------------------------

namespace detail {

template <class E>
E parse_enum(const std::string& field, const std::string& s, std::initializer_list<std::pair<const char*, E>> table) {
  std::string names;
  for (const auto& [name, v] : table) {
    if (s == name) return v;
    names += names.empty() ? name : std::string(", ") + name;
  }
  throw ConfigError(field, "unknown value '" + s + "' (expected one of " + names + ")");
}

}  // namespace detail

inline RunMode parse_mode(const std::string& s) {
  return detail::parse_enum<RunMode>("mode", s,
                                     {{"warmup", RunMode::warmup}, {"aslo", RunMode::aslo},
                                      {"doubling", RunMode::doubling}, {"full", RunMode::full}});
}

inline Criterion parse_criterion(const std::string& s) {
  return detail::parse_enum<Criterion>("criterion", s,
                                       {{"det2", Criterion::det_double}, {"fixed-beta", Criterion::fixed_beta},
                                        {"adaptive", Criterion::adaptive_beta},
                                        {"relaxed-seq", Criterion::relaxed_sequential}});
}

inline ConstantsMode parse_constants_mode(const std::string& s) {
  return detail::parse_enum<ConstantsMode>("constants.mode", s,
                                           {{"theory", ConstantsMode::theory}, {"practical", ConstantsMode::practical}});
}

// "a..b" inclusive, or a single integer.
inline std::vector<std::uint64_t> parse_seed_range(const std::string& s) {
  auto num = [&](const std::string& t) -> std::uint64_t {
    if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("seeds", "malformed seed range '" + s + "'");
    return std::stoull(t);
  };
  auto dots = s.find("..");
  if (dots == std::string::npos) return {num(s)};
  std::uint64_t a = num(s.substr(0, dots)), b = num(s.substr(dots + 2));
  if (b < a) throw ConfigError("seeds", "empty range '" + s + "'");
  if (b - a >= 10000000) throw ConfigError("seeds", "range too large");
  std::vector<std::uint64_t> out;
  for (std::uint64_t k = a; k <= b; ++k) out.push_back(k);
  return out;
}

// ---- JSON <-> matrices ------------------------------------------------------

inline json mat_to_json(const Mat& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(r);
  }
  return rows;
}

inline json vec_to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Mat mat_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw ConfigError(field, "expected a non-empty array of rows");
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  for (const auto& r : j) {
    if (!r.is_array() || r.empty()) throw ConfigError(field, "each row must be a non-empty array");
    if (cols == 0) cols = r.size();
    if (r.size() != cols) throw ConfigError(field, "ragged rows");
  }
  Mat M(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = 0; k < cols; ++k) {
      if (!j[i][k].is_number()) throw ConfigError(field, "entries must be numbers");
      M(i, k) = j[i][k].get<double>();
    }
  if (!M.allFinite()) throw ConfigError(field, "entries must be finite");
  return M;
}

inline Vec vec_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw ConfigError(field, "expected a non-empty array");
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(field, "entries must be numbers");
    v(i) = j[i].get<double>();
  }
  return v;
}

// ---- parsing --------------------------------------------------------------

namespace detail {

inline void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& prefix) {
  for (const auto& [k, v] : obj.items())
    if (!known.count(k)) throw ConfigError(prefix + k, "unknown key");
}

inline double get_number(const json& obj, const std::string& key, const std::string& field, double def) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(field, "expected a number");
  double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(field, "must be finite");
  return x;
}

inline long get_int(const json& obj, const std::string& key, const std::string& field, long def) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (v.is_number_integer()) return v.get<long>();
  if (v.is_number_float() && v.get<double>() == std::floor(v.get<double>()) && std::abs(v.get<double>()) < 9e18)
    return static_cast<long>(v.get<double>());
  throw ConfigError(field, "expected an integer");
}

inline std::string get_string(const json& obj, const std::string& key, const std::string& field,
                              const std::string& def) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(field, "expected a string");
  return v.get<std::string>();
}

}  // namespace detail

inline void validate_config(const ExperimentConfig& c);

inline ExperimentConfig config_from_json(const json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
  reject_unknown(j,
                 {"schema_version", "model", "K0", "theta0", "x0", "mode", "criterion", "beta", "chi", "delta", "phi",
                  "constants", "mu_mode", "tau_form", "radius_variant", "anchor_eps", "T", "T0", "seeds", "out",
                  "checkpoints", "doubling_base", "workers", "slope_window"},
                 "");
  ExperimentConfig c;
  c.schema_version = static_cast<int>(get_int(j, "schema_version", "schema_version", kSchemaVersion));
  if (c.schema_version != kSchemaVersion)
    throw ConfigError("schema_version", "unsupported version " + std::to_string(c.schema_version));

  if (!j.contains("model")) throw ConfigError("model", "missing");
  const json& mj = j.at("model");
  if (!mj.is_object()) throw ConfigError("model", "expected an object");
  reject_unknown(mj, {"benchmark", "A", "B", "Q", "R", "sigma_w", "theta_bound"}, "model.");
  if (mj.contains("benchmark")) {
    for (const char* k : {"A", "B", "Q", "R", "theta_bound"})
      if (mj.contains(k)) throw ConfigError(std::string("model.") + k, "not allowed together with model.benchmark");
    c.model.benchmark = get_string(mj, "benchmark", "model.benchmark", "");
    SystemModel b = benchmark(c.model.benchmark);
    c.model.A = b.A;
    c.model.B = b.B;
    c.model.Q = b.Q;
    c.model.R = b.R;
    c.model.sigma_w = get_number(mj, "sigma_w", "model.sigma_w", b.sigma_w);
  } else {
    for (const char* k : {"A", "B"})
      if (!mj.contains(k)) throw ConfigError(std::string("model.") + k, "missing (or give model.benchmark)");
    c.model.A = mat_from_json(mj.at("A"), "model.A");
    c.model.B = mat_from_json(mj.at("B"), "model.B");
    const int n = static_cast<int>(c.model.A.rows()), m = static_cast<int>(c.model.B.cols());
    c.model.Q = mj.contains("Q") ? mat_from_json(mj.at("Q"), "model.Q") : Mat::Identity(n, n);
    c.model.R = mj.contains("R") ? mat_from_json(mj.at("R"), "model.R") : Mat::Identity(m, m);
    c.model.sigma_w = get_number(mj, "sigma_w", "model.sigma_w", 1.0);
    if (mj.contains("theta_bound")) c.model.theta_bound = get_number(mj, "theta_bound", "model.theta_bound", 0.0);
  }

  if (j.contains("K0")) c.K0 = mat_from_json(j.at("K0"), "K0");
  if (j.contains("theta0")) c.theta0 = mat_from_json(j.at("theta0"), "theta0");
  if (j.contains("x0")) c.x0 = vec_from_json(j.at("x0"), "x0");
  c.mode = parse_mode(get_string(j, "mode", "mode", "full"));

  ScheduleOptions& s = c.schedule;
  s.criterion = parse_criterion(get_string(j, "criterion", "criterion", "det2"));
  s.beta = get_number(j, "beta", "beta", s.beta);
  s.chi = get_number(j, "chi", "chi", s.chi);
  s.delta = get_number(j, "delta", "delta", s.delta);
  s.phi = get_number(j, "phi", "phi", s.phi);
  if (j.contains("constants")) {
    const json& cj = j.at("constants");
    if (!cj.is_object()) throw ConfigError("constants", "expected an object");
    reject_unknown(cj, {"mode", "lambda_scale", "noise_scale", "mu_scale"}, "constants.");
    s.constants_mode = parse_constants_mode(get_string(cj, "mode", "constants.mode", "practical"));
    s.lambda_scale = get_number(cj, "lambda_scale", "constants.lambda_scale", s.lambda_scale);
    s.noise_scale = get_number(cj, "noise_scale", "constants.noise_scale", s.noise_scale);
    s.mu_scale = get_number(cj, "mu_scale", "constants.mu_scale", s.mu_scale);
  }
  s.mu_mode = parse_enum<MuMode>("mu_mode", get_string(j, "mu_mode", "mu_mode", "double-cross"),
                                 {{"double-cross", MuMode::double_cross}, {"single-cross", MuMode::single_cross}});
  s.tau_form = parse_enum<TauForm>("tau_form", get_string(j, "tau_form", "tau_form", "exponential"),
                                   {{"exponential", TauForm::exponential}, {"power-law", TauForm::power_law}});
  s.radius_variant =
      parse_enum<RadiusVariant>("radius_variant", get_string(j, "radius_variant", "radius_variant", "anchored"),
                                {{"anchored", RadiusVariant::anchored}, {"unanchored", RadiusVariant::unanchored}});

  if (j.contains("anchor_eps")) {
    const json& a = j.at("anchor_eps");
    if (a.is_string()) {
      if (a.get<std::string>() != "oracle") throw ConfigError("anchor_eps", "expected a number or \"oracle\"");
    } else {
      c.anchor_eps = get_number(j, "anchor_eps", "anchor_eps", 0.0);
    }
  }

  c.T = get_int(j, "T", "T", c.T);
  if (j.contains("T0") && j.at("T0").is_string()) {
    if (j.at("T0").get<std::string>() != "auto") throw ConfigError("T0", "expected an integer or \"auto\"");
    c.T0_auto = true;
  } else {
    c.T0 = get_int(j, "T0", "T0", c.T0);
  }

  if (j.contains("seeds")) {
    const json& sj = j.at("seeds");
    if (sj.is_string()) {
      c.seeds = parse_seed_range(sj.get<std::string>());
    } else if (sj.is_array()) {
      c.seeds.clear();
      for (const auto& v : sj) {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
          throw ConfigError("seeds", "entries must be non-negative integers");
        c.seeds.push_back(v.get<std::uint64_t>());
      }
    } else {
      throw ConfigError("seeds", "expected an array or \"a..b\"");
    }
  }
  c.out = get_string(j, "out", "out", c.out);
  if (j.contains("checkpoints")) {
    const json& cp = j.at("checkpoints");
    if (!cp.is_array()) throw ConfigError("checkpoints", "expected an array");
    for (std::size_t i = 0; i < cp.size(); ++i) {
      if (!cp[i].is_number_integer()) throw ConfigError("checkpoints", "entries must be integers");
      c.checkpoints.push_back(cp[i].get<long>());
    }
  }
  c.doubling_base = get_int(j, "doubling_base", "doubling_base", c.doubling_base);
  c.workers = static_cast<int>(get_int(j, "workers", "workers", c.workers));
  if (j.contains("slope_window")) {
    const json& w = j.at("slope_window");
    if (!w.is_array() || w.size() != 2 || !w[0].is_number() || !w[1].is_number())
      throw ConfigError("slope_window", "expected [lo, hi]");
    c.slope_lo = w[0].get<double>();
    c.slope_hi = w[1].get<double>();
  }
  validate_config(c);
  return c;
}

inline void validate_config(const ExperimentConfig& c) {
  SystemModel m;
  m.A = c.model.A;
  m.B = c.model.B;
  m.Q = c.model.Q;
  m.R = c.model.R;
  m.sigma_w = c.model.sigma_w;
  try {
    check_dims(m);
  } catch (const ConfigError& e) {
    throw ConfigError("model." + e.field, e.reason);
  }
  const int n = m.n(), mm = m.m();
  if (c.model.theta_bound && !(*c.model.theta_bound > 0.0)) throw ConfigError("model.theta_bound", "must be > 0");
  if (c.K0) la::require_dims(*c.K0, mm, n, "K0");
  if (c.theta0) la::require_dims(*c.theta0, n + mm, n, "theta0");
  if (c.x0 && c.x0->size() != n) throw ConfigError("x0", "state dimension mismatch");
  const ScheduleOptions& s = c.schedule;
  if (!(s.delta > 0.0 && s.delta < 1.0)) throw ConfigError("delta", "must lie in (0,1)");
  if (!(s.phi > 0.0)) throw ConfigError("phi", "must be > 0");
  if (s.chi < 0.0 || s.chi >= 1.0) throw ConfigError("chi", "must lie in [0,1)");
  if (!(s.beta > 0.0)) throw ConfigError("beta", "must be > 0");
  if (!(s.lambda_scale > 0.0)) throw ConfigError("constants.lambda_scale", "must be > 0");
  if (!(s.noise_scale >= 0.0)) throw ConfigError("constants.noise_scale", "must be >= 0");
  if (!(s.mu_scale >= 0.0)) throw ConfigError("constants.mu_scale", "must be >= 0");
  if (c.anchor_eps && !(*c.anchor_eps >= 0.0)) throw ConfigError("anchor_eps", "must be >= 0");
  if (c.T < 1) throw ConfigError("T", "must be >= 1");
  if (!c.T0_auto && c.T0 < 1) throw ConfigError("T0", "must be >= 1");
  if (c.seeds.empty()) throw ConfigError("seeds", "at least one seed required");
  std::set<std::uint64_t> uniq(c.seeds.begin(), c.seeds.end());
  if (uniq.size() != c.seeds.size()) throw ConfigError("seeds", "duplicate seed");
  if (c.out.empty()) throw ConfigError("out", "must not be empty");
  for (long t : c.checkpoints)
    if (t < 1 || t > c.T) throw ConfigError("checkpoints", "times must lie in [1, T]");
  if (c.doubling_base < 1) throw ConfigError("doubling_base", "must be >= 1");
  if (c.workers < 0) throw ConfigError("workers", "must be >= 0");
  if (c.slope_lo || c.slope_hi) {
    double lo = c.window_lo(), hi = c.window_hi();
    if (!(lo >= 1.0 && hi > lo)) throw ConfigError("slope_window", "need 1 <= lo < hi");
  }
}

inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  json mj;
  if (!c.model.benchmark.empty()) {
    mj["benchmark"] = c.model.benchmark;
  } else {
    mj["A"] = mat_to_json(c.model.A);
    mj["B"] = mat_to_json(c.model.B);
    mj["Q"] = mat_to_json(c.model.Q);
    mj["R"] = mat_to_json(c.model.R);
    if (c.model.theta_bound) mj["theta_bound"] = *c.model.theta_bound;
  }
  mj["sigma_w"] = c.model.sigma_w;
  j["model"] = mj;
  if (c.K0) j["K0"] = mat_to_json(*c.K0);
  if (c.theta0) j["theta0"] = mat_to_json(*c.theta0);
  if (c.x0) j["x0"] = vec_to_json(*c.x0);
  j["mode"] = to_string(c.mode);
  const ScheduleOptions& s = c.schedule;
  j["criterion"] = to_string(s.criterion);
  j["beta"] = s.beta;
  j["chi"] = s.chi;
  j["delta"] = s.delta;
  j["phi"] = s.phi;
  j["constants"] = {{"mode", to_string(s.constants_mode)},
                    {"lambda_scale", s.lambda_scale},
                    {"noise_scale", s.noise_scale},
                    {"mu_scale", s.mu_scale}};
  j["mu_mode"] = to_string(s.mu_mode);
  j["tau_form"] = to_string(s.tau_form);
  j["radius_variant"] = to_string(s.radius_variant);
  if (c.anchor_eps) j["anchor_eps"] = *c.anchor_eps;
  else j["anchor_eps"] = "oracle";
  j["T"] = c.T;
  if (c.T0_auto) j["T0"] = "auto";
  else j["T0"] = c.T0;
  j["seeds"] = c.seeds;
  j["out"] = c.out;
  j["checkpoints"] = c.checkpoints;
  j["doubling_base"] = c.doubling_base;
  j["workers"] = c.workers;
  if (c.slope_lo || c.slope_hi) j["slope_window"] = {c.window_lo(), c.window_hi()};
  return j;
}

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return config_to_json(a) == config_to_json(b);
}

inline ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("parse error: ") + e.what());
  }
  return config_from_json(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline SystemModel build_model(const ExperimentConfig& c) {
  SystemModel m = c.model.benchmark.empty() ? make_model(c.model.A, c.model.B, c.model.Q, c.model.R, c.model.sigma_w)
                                            : benchmark(c.model.benchmark);
  m.sigma_w = c.model.sigma_w;
  if (c.model.theta_bound) m.theta_bound = *c.model.theta_bound;
  try {
    validate_model(m);
  } catch (const ConfigError& e) {
    throw ConfigError("model." + e.field, e.reason);
  }
  return m;
}

}  // namespace alqr
