#pragma once

#include <cmath>
#include <string>

#include "alqr/lqr_core.hpp"
#include "alqr/sdp_solver.hpp"

namespace alqr {

enum class MuMode { single_cross, double_cross };

inline std::string to_string(MuMode m) { return m == MuMode::single_cross ? "single-cross" : "double-cross"; }

// single-cross: r + sqrt(r) theta ||V||^1/2;  double-cross: r + 2 theta sqrt(r) ||V||^1/2.
inline double mu(double r, double theta_bound, const Mat& V, MuMode mode = MuMode::double_cross) {
  if (r < 0.0) throw DomainError("mu requires r >= 0");
  double s = std::sqrt(r) * theta_bound * std::sqrt(la::spectral_norm(V));
  return r + (mode == MuMode::double_cross ? 2.0 : 1.0) * s;
}

struct RelaxedPrimalProblem {
  Mat theta_hat;
  Mat W, Q, R;
  double mu = 0.0;
  Mat V_inv;

  int n() const { return static_cast<int>(theta_hat.cols()); }
  int m() const { return static_cast<int>(theta_hat.rows() - theta_hat.cols()); }
};

inline RelaxedPrimalProblem build_relaxed_primal(const Mat& theta_hat, const SystemModel& model, double mu_t,
                                                 const Mat& V_t) {
  const int n = model.n(), d = model.n() + model.m();
  la::require_dims(theta_hat, d, n, "theta_hat");
  la::require_dims(V_t, d, d, "V");
  if (!(mu_t >= 0.0) || !std::isfinite(mu_t)) throw ConfigError("mu", "must be finite and >= 0");
  RelaxedPrimalProblem p;
  p.theta_hat = theta_hat;
  p.W = model.W();
  p.Q = model.Q;
  p.R = model.R;
  p.mu = mu_t;
  p.V_inv = la::spd_inverse(la::sym(V_t));
  return p;
}

// Blocks: [Sigma (n+m), slack S (n), coupling s (1)].
//   entry (j,k):  Sigma_xx - Theta' Sigma Theta + mu s I - S = W
//   coupling:     <V^-1, Sigma> - s = 0
inline sdp::ConicProgram encode(const RelaxedPrimalProblem& p) {
  const int n = p.n(), m = p.m(), d = n + m;
  sdp::ConicProgram prog;
  prog.block_dims = {d, n, 1};
  Mat C = Mat::Zero(d, d);
  C.topLeftCorner(n, n) = p.Q;
  C.bottomRightCorner(m, m) = p.R;
  prog.C = {C, Mat::Zero(n, n), Mat::Zero(1, 1)};
  auto pairs = sym_pairs(n);
  prog.b.resize(static_cast<Eigen::Index>(pairs.size()) + 1);
  int i = 0;
  for (auto [j, k] : pairs) {
    Mat S = Mat::Zero(n, n);
    S(j, k) -= 0.5;
    S(k, j) -= 0.5;
    prog.A.push_back({lyapunov_coefficient(p.theta_hat, j, k), S,
                      Mat::Constant(1, 1, j == k ? p.mu : 0.0)});
    prog.b(i++) = p.W(j, k);
  }
  prog.A.push_back({p.V_inv, Mat::Zero(n, n), Mat::Constant(1, 1, -1.0)});
  prog.b(i) = 0.0;
  return prog;
}

struct RelaxedProblemData {
  Mat Q, R, W;
  double mu = 0.0;
  Mat V_inv;
};

inline RelaxedProblemData decode(const sdp::ConicProgram& prog) {
  if (prog.block_dims.size() != 3 || prog.block_dims[2] != 1)
    throw ConfigError("program", "not a relaxed-primal encoding");
  const int d = prog.block_dims[0], n = prog.block_dims[1], m = d - n;
  RelaxedProblemData out;
  out.Q = prog.C[0].topLeftCorner(n, n);
  out.R = prog.C[0].bottomRightCorner(m, m);
  out.W = Mat::Zero(n, n);
  int i = 0;
  for (auto [j, k] : sym_pairs(n)) {
    out.W(j, k) = out.W(k, j) = prog.b(i);
    if (j == 0 && k == 0) out.mu = prog.A[i][2](0, 0);
    ++i;
  }
  out.V_inv = prog.A.back()[0];
  return out;
}

struct RelaxedSolution {
  Mat Sigma_star;
  Mat P_dual;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double duality_gap = 0.0;
  double constraint_violation = 0.0;  // max(0, -lambda_min(residual))
  double sigma_min_eig = 0.0;
  sdp::Result raw;
};

// Sigma_xx - Theta' Sigma Theta + mu (Sigma . V^-1) I - W.
inline Mat relaxed_constraint_residual(const RelaxedPrimalProblem& p, const Mat& Sigma) {
  const int n = p.n();
  Mat res = Sigma.topLeftCorner(n, n) - p.theta_hat.transpose() * Sigma * p.theta_hat - p.W;
  res.diagonal().array() += p.mu * p.V_inv.cwiseProduct(Sigma).sum();
  return la::sym(res);
}

inline RelaxedSolution solve_relaxed(const RelaxedPrimalProblem& p, double tol = 1e-8,
                                     const sdp::Backend& backend = sdp::default_backend()) {
  const int n = p.n();
  sdp::Settings st;
  st.tol = tol;
  sdp::ConicProgram prog = encode(p);
  sdp::Result r = sdp::solve(prog, st, backend);
  if (r.status != sdp::Status::optimal)
    throw SynthesisError("relaxed SDP solve failed: " + sdp::to_string(r.status));
  RelaxedSolution out;
  Mat C = prog.C[0];
  out.Sigma_star = la::sym(r.X[0]);
  Mat K = gain_from_dual_slack(r.Z[0], n);
  Mat refined = covariance_of_gain(p.theta_hat, K, p.W, p.mu, p.V_inv);
  if (refined.allFinite() && la::min_eig(refined.topLeftCorner(n, n)) > 0.0) {
    double viol = std::max(0.0, -la::min_eig(relaxed_constraint_residual(p, refined)));
    double obj = C.cwiseProduct(refined).sum();
    if (viol <= tol && obj <= r.primal_objective + tol * (1.0 + std::abs(r.primal_objective)))
      out.Sigma_star = refined;
  }
  out.P_dual = la::sym(pairs_to_sym(r.y.head(r.y.size() - 1), n));
  out.primal_objective = C.cwiseProduct(out.Sigma_star).sum();
  out.dual_objective = p.W.cwiseProduct(out.P_dual).sum();
  out.duality_gap = std::abs(out.primal_objective - out.dual_objective);
  out.constraint_violation = std::max(0.0, -la::min_eig(relaxed_constraint_residual(p, out.Sigma_star)));
  out.sigma_min_eig = la::min_eig(out.Sigma_star);
  out.raw = std::move(r);
  return out;
}

inline Mat solve_relaxed_primal(const RelaxedPrimalProblem& p, double tol = 1e-8) {
  return solve_relaxed(p, tol).Sigma_star;
}

inline Mat solve_relaxed_dual(const Mat& theta_hat, const SystemModel& model, double mu_t, const Mat& V_t,
                              double tol = 1e-8) {
  return solve_relaxed(build_relaxed_primal(theta_hat, model, mu_t, V_t), tol).P_dual;
}

inline Mat extract_policy(const Mat& Sigma, int n) {
  const Eigen::Index m = Sigma.rows() - n;
  Mat Sxx = la::sym(Sigma.topLeftCorner(n, n));
  if (la::min_eig(Sxx) < 1e-10) throw DegenerateSolutionError("Sigma_xx is (near) singular");
  Mat Sux = Sigma.bottomLeftCorner(m, n);
  return Sxx.ldlt().solve(Sux.transpose()).transpose();
}

struct ControlPolicy {
  Mat K;
  Mat Sigma_star;
  Mat P_dual;
  double mu_used = 0.0;
  int epoch_index = 0;
  long tau = 0;
};

// ||P_next^-1/2 P_prev^1/2||.
inline double sequential_gap(const Mat& P_prev, const Mat& P_next) {
  if (la::min_eig(P_prev) <= 0.0 || la::min_eig(P_next) <= 0.0)
    throw CertificateError("sequential gap needs positive-definite inputs");
  return la::spectral_norm(la::inv_sqrtm(P_next) * la::sqrtm(P_prev));
}

// Two-sided bound -mu tr(P) V^-1 <= (X+D)'P(X+D) - X'PX <= mu tr(P) V^-1
// with mu = r + 2 ||X|| ||V||^1/2 sqrt(r).
inline bool perturbation_check(const Mat& X, const Mat& Delta, const Mat& P, const Mat& V, double r) {
  if (X.rows() != Delta.rows() || X.cols() != Delta.cols() || P.rows() != X.rows() || V.rows() != X.cols())
    throw InvalidSampleError("dimension mismatch");
  if (r < 0.0) throw InvalidSampleError("r must be >= 0");
  Mat Vinv = la::spd_inverse(la::sym(V));
  double scale = std::max(1.0, r * la::spectral_norm(Vinv));
  if (la::max_eig(Delta.transpose() * Delta - r * Vinv) > 1e-10 * scale)
    throw InvalidSampleError("precondition Delta'Delta <= r V^-1 violated");
  double mu_l = r + 2.0 * la::spectral_norm(X) * std::sqrt(la::spectral_norm(V)) * std::sqrt(r);
  Mat D = (X + Delta).transpose() * P * (X + Delta) - X.transpose() * P * X;
  Mat bound = mu_l * la::star_norm(P) * Vinv;
  return la::min_eig(bound - D) >= -1e-10 && la::min_eig(bound + D) >= -1e-10;
}

}  // namespace alqr
