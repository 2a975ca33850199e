#pragma once

#include <fmt/format.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "alqr/errors.hpp"
#include "alqr/loops.hpp"
#include "alqr/trajectory.hpp"

namespace alqr {

inline const std::vector<std::string>& trajectory_columns() {
  static const std::vector<std::string> cols = {"t",        "x_norm", "cost",      "cum_regret", "lambda_t", "logdet_V",
                                                "epoch",    "policy_id", "beta", "r_t",        "est_error"};
  return cols;
}

struct TrajectoryRow {
  long t = 0;
  double x_norm = 0.0;
  double cost = 0.0;
  double cum_regret = 0.0;
  double lambda = 0.0;
  double logdet_V = 0.0;
  int epoch = 0;
  int policy_id = 0;
  double beta = kNaN;
  double r = kNaN;
  double est_error = kNaN;
};

using TrajectoryTable = std::vector<TrajectoryRow>;

// cum_regret[i] is the cumulative regret through step i.
inline TrajectoryTable to_table(const TrajectoryRecord& tr, const std::vector<double>& cum_regret) {
  if (cum_regret.size() != tr.size()) throw IncompleteTrajectoryError("regret series length differs from trajectory");
  TrajectoryTable rows(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    TrajectoryRow& r = rows[i];
    r.t = tr.t0 + static_cast<long>(i);
    r.x_norm = tr.x[i].norm();
    r.cost = tr.cost[i];
    r.cum_regret = cum_regret[i];
    r.lambda = tr.lambda[i];
    r.logdet_V = tr.logdet_V[i];
    r.epoch = tr.epoch[i];
    r.policy_id = tr.policy_id[i];
    r.beta = tr.beta[i];
    r.r = tr.r[i];
    r.est_error = tr.est_error[i];
  }
  return rows;
}

inline std::string fmt_num(double v) { return fmt::format("{:.17g}", v); }

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

inline void close_out(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

// Header check plus numeric cells; "nan" parses to NaN.
inline std::vector<std::vector<double>> read_numeric_csv(const std::string& path,
                                                         const std::vector<std::string>& header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw IoError("'" + path + "' is empty");
  if (line != join(header)) throw IoError("'" + path + "': unexpected header '" + line + "'");
  std::vector<std::vector<double>> rows;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw IoError("'" + path + "' line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      row.push_back(v);
    }
    if (row.size() != header.size())
      throw IoError("'" + path + "' line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                    " columns, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

inline void write_trajectory_csv(const TrajectoryTable& rows, const std::string& path) {
  auto out = detail::open_out(path);
  out << detail::join(trajectory_columns()) << '\n';
  for (const auto& r : rows) {
    out << r.t << ',' << fmt_num(r.x_norm) << ',' << fmt_num(r.cost) << ',' << fmt_num(r.cum_regret) << ','
        << fmt_num(r.lambda) << ',' << fmt_num(r.logdet_V) << ',' << r.epoch << ',' << r.policy_id << ','
        << fmt_num(r.beta) << ',' << fmt_num(r.r) << ',' << fmt_num(r.est_error) << '\n';
  }
  detail::close_out(out, path);
}

inline TrajectoryTable read_trajectory_csv(const std::string& path) {
  auto raw = detail::read_numeric_csv(path, trajectory_columns());
  TrajectoryTable rows(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& c = raw[i];
    TrajectoryRow& r = rows[i];
    r.t = static_cast<long>(c[0]);
    r.x_norm = c[1];
    r.cost = c[2];
    r.cum_regret = c[3];
    r.lambda = c[4];
    r.logdet_V = c[5];
    r.epoch = static_cast<int>(c[6]);
    r.policy_id = static_cast<int>(c[7]);
    r.beta = c[8];
    r.r = c[9];
    r.est_error = c[10];
  }
  return rows;
}

inline const std::vector<std::string>& checkpoint_columns() {
  static const std::vector<std::string> cols = {"t", "contained", "distance", "radius", "est_error", "gram_min_eig"};
  return cols;
}

inline void write_checkpoints_csv(const std::vector<CoverageCheckpoint>& cps, const std::string& path) {
  auto out = detail::open_out(path);
  out << detail::join(checkpoint_columns()) << '\n';
  for (const auto& c : cps)
    out << c.t << ',' << (c.contained ? 1 : 0) << ',' << fmt_num(c.distance) << ',' << fmt_num(c.radius) << ','
        << fmt_num(c.est_error) << ',' << fmt_num(c.gram_min_eig) << '\n';
  detail::close_out(out, path);
}

inline std::vector<CoverageCheckpoint> read_checkpoints_csv(const std::string& path) {
  std::vector<CoverageCheckpoint> out;
  for (const auto& c : detail::read_numeric_csv(path, checkpoint_columns())) {
    CoverageCheckpoint cp;
    cp.t = static_cast<long>(c[0]);
    cp.contained = c[1] != 0.0;
    cp.distance = c[2];
    cp.radius = c[3];
    cp.est_error = c[4];
    cp.gram_min_eig = c[5];
    out.push_back(cp);
  }
  return out;
}

inline const std::vector<std::string>& epoch_columns() {
  static const std::vector<std::string> cols = {"epoch",    "tau",       "lambda",   "logdet_V",
                                                "r",        "mu",        "beta",     "est_error",
                                                "rho_true", "seq_gap",   "mu_over_lambda_min",
                                                "anynum",   "synthesized"};
  return cols;
}

// epoch_shift/t_offset map loop-local indices to the emitted trajectory.
inline void write_epochs_csv(const std::vector<PolicyEpoch>& eps, int epoch_shift, long t_offset,
                             const std::string& path) {
  auto out = detail::open_out(path);
  out << detail::join(epoch_columns()) << '\n';
  for (const auto& e : eps)
    out << e.index + epoch_shift << ',' << e.tau + t_offset << ',' << fmt_num(e.lambda) << ',' << fmt_num(e.logdet_V)
        << ',' << fmt_num(e.r) << ',' << fmt_num(e.mu) << ',' << fmt_num(e.beta) << ',' << fmt_num(e.est_error)
        << ',' << fmt_num(e.rho_true) << ',' << fmt_num(e.seq_gap) << ',' << fmt_num(e.mu_over_lambda_min) << ','
        << (e.anynum ? 1 : 0) << ',' << (e.synthesized ? 1 : 0) << '\n';
  detail::close_out(out, path);
}

inline std::vector<std::vector<double>> read_epochs_csv(const std::string& path) {
  return detail::read_numeric_csv(path, epoch_columns());
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
  detail::close_out(out, path);
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("'" + path + "': " + e.what());
  }
}

}  // namespace alqr
