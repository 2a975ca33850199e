#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "alqr/errors.hpp"
#include "alqr/linalg.hpp"
#include "alqr/sdp_solver.hpp"

namespace alqr {

// x_{t+1} = A x_t + B u_t + w_{t+1},  cost x'Qx + u'Ru,  W = sigma_w^2 I.
struct SystemModel {
  Mat A, B, Q, R;
  double sigma_w = 1.0;
  double theta_bound = 1.0;
  double alpha0 = 1.0;
  double alpha1 = 1.0;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }

  // Theta = [A B]^T, (n+m) x n.
  Mat theta() const {
    Mat T(n() + m(), n());
    T.topRows(n()) = A.transpose();
    T.bottomRows(m()) = B.transpose();
    return T;
  }
  Mat W() const { return sigma_w * sigma_w * Mat::Identity(n(), n()); }
};

inline Mat theta_of(const Mat& A, const Mat& B) {
  Mat T(A.rows() + B.cols(), A.rows());
  T.topRows(A.rows()) = A.transpose();
  T.bottomRows(B.cols()) = B.transpose();
  return T;
}

inline Mat a_of(const Mat& theta, int n) { return theta.topRows(n).transpose(); }
inline Mat b_of(const Mat& theta, int n) {
  return theta.bottomRows(theta.rows() - n).transpose();
}

// Returns a copy of `model` with A, B replaced by the blocks of `theta`.
inline SystemModel with_theta(const SystemModel& model, const Mat& theta) {
  SystemModel out = model;
  out.A = a_of(theta, model.n());
  out.B = b_of(theta, model.n());
  return out;
}

inline void check_dims(const SystemModel& m) {
  if (m.A.rows() == 0 || m.A.rows() != m.A.cols()) throw ConfigError("A", "must be square and non-empty");
  if (m.B.rows() != m.A.rows() || m.B.cols() == 0) throw ConfigError("B", "must have n rows and m >= 1 columns");
  la::require_dims(m.Q, m.n(), m.n(), "Q");
  la::require_dims(m.R, m.m(), m.m(), "R");
  if (!la::is_symmetric(m.Q)) throw ConfigError("Q", "must be symmetric");
  if (!la::is_symmetric(m.R)) throw ConfigError("R", "must be symmetric");
  if (!(m.sigma_w >= 0.0) || !std::isfinite(m.sigma_w)) throw ConfigError("sigma_w", "must be finite and >= 0");
}

// Full invariant check: cost bounds, ||Theta|| <= theta_bound.
inline void validate_model(const SystemModel& m) {
  check_dims(m);
  const double tol = 1e-12;
  Vec eq = la::sym_eigenvalues(m.Q), er = la::sym_eigenvalues(m.R);
  if (!(m.alpha0 > 0.0) || m.alpha0 > m.alpha1) throw ConfigError("alpha0", "need 0 < alpha0 <= alpha1");
  if (eq.minCoeff() < m.alpha0 - tol || eq.maxCoeff() > m.alpha1 + tol)
    throw ConfigError("Q", "eigenvalues outside [alpha0, alpha1]");
  if (er.minCoeff() < m.alpha0 - tol || er.maxCoeff() > m.alpha1 + tol)
    throw ConfigError("R", "eigenvalues outside [alpha0, alpha1]");
  if (la::spectral_norm(m.theta()) > m.theta_bound * (1.0 + 1e-12))
    throw ConfigError("theta_bound", "||Theta*|| exceeds theta_bound");
}

inline Vec step(const SystemModel& model, const Vec& x, const Vec& u, const Vec& w) {
  if (x.size() != model.n()) throw ConfigError("x", "state dimension mismatch");
  if (u.size() != model.m()) throw ConfigError("u", "input dimension mismatch");
  if (w.size() != model.n()) throw ConfigError("w", "noise dimension mismatch");
  return model.A * x + model.B * u + w;
}

struct OptimalSolution {
  Mat P_star;
  Mat K_star;
  double J_star = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

inline Mat dare_rhs(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P) {
  Mat BtPB = B.transpose() * P * B + R;
  Mat BtPA = B.transpose() * P * A;
  return Q + A.transpose() * P * A - BtPA.transpose() * BtPB.ldlt().solve(BtPA);
}

inline Mat dare_gain(const Mat& A, const Mat& B, const Mat& R, const Mat& P) {
  Mat BtPB = B.transpose() * P * B + R;
  return -BtPB.ldlt().solve(B.transpose() * P * A);
}

// Structured doubling algorithm for P = Q + A'PA - A'PB(B'PB+R)^-1 B'PA.
inline OptimalSolution solve_dare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
                                  double sigma_w, double tol = 1e-10, int max_iter = 10000) {
  const Eigen::Index n = A.rows();
  Eigen::LLT<Mat> rllt(R);
  if (rllt.info() != Eigen::Success || la::min_eig(R) <= 0.0)
    throw NotStabilizableError("DARE requires R positive definite");
  Mat Ak = A;
  Mat Gk = B * rllt.solve(B.transpose());
  Mat Hk = Q;
  Mat I = Mat::Identity(n, n);
  int it = 0;
  bool converged = false;
  for (; it < max_iter; ++it) {
    Mat Wk = I + Gk * Hk;
    Eigen::PartialPivLU<Mat> lu(Wk);
    Mat WiA = lu.solve(Ak);
    Mat WiG = lu.solve(Gk);
    Mat Hn = Hk + Ak.transpose() * Hk * WiA;
    Mat Gn = Gk + Ak * WiG * Ak.transpose();
    Mat An = Ak * WiA;
    double delta = (Hn - Hk).norm();
    Hk = la::sym(Hn);
    Gk = la::sym(Gn);
    Ak = An;
    if (!Hk.allFinite()) break;
    if (delta <= tol * std::max(1.0, Hk.norm())) {
      converged = true;
      ++it;
      break;
    }
  }
  if (!converged || !Hk.allFinite())
    throw NotStabilizableError("DARE iteration did not converge (pair not stabilizable?)");
  OptimalSolution sol;
  sol.P_star = Hk;
  // Two fixed-point polishing sweeps on the converged iterate.
  for (int k = 0; k < 2; ++k) sol.P_star = la::sym(dare_rhs(A, B, Q, R, sol.P_star));
  sol.K_star = dare_gain(A, B, R, sol.P_star);
  sol.residual = (sol.P_star - dare_rhs(A, B, Q, R, sol.P_star)).norm();
  sol.iterations = it;
  sol.J_star = sigma_w * sigma_w * sol.P_star.trace();
  if (sol.residual > 1e-8 * std::max(1.0, sol.P_star.norm()) ||
      la::spectral_radius(A + B * sol.K_star) >= 1.0)
    throw NotStabilizableError("DARE solution is not stabilizing");
  return sol;
}

inline OptimalSolution solve_dare(const SystemModel& model, double tol = 1e-10, int max_iter = 10000) {
  check_dims(model);
  return solve_dare(model.A, model.B, model.Q, model.R, model.sigma_w, tol, max_iter);
}

struct ExactSdpSolution {
  Mat Sigma_star;
  Mat K_star;
  Mat P_dual;
  double objective = 0.0;
  double dual_objective = 0.0;
  double feasibility_residual = 0.0;
  sdp::Result raw;
};

// Upper-triangular (j,k) index pairs of an n x n symmetric matrix.
inline std::vector<std::pair<int, int>> sym_pairs(int n) {
  std::vector<std::pair<int, int>> out;
  for (int j = 0; j < n; ++j)
    for (int k = j; k < n; ++k) out.emplace_back(j, k);
  return out;
}

// Dual vector y (one entry per sym_pairs index) to the symmetric matrix P.
inline Mat pairs_to_sym(const Vec& y, int n) {
  Mat P = Mat::Zero(n, n);
  int i = 0;
  for (auto [j, k] : sym_pairs(n)) {
    if (j == k) P(j, j) = y(i);
    else P(j, k) = P(k, j) = 0.5 * y(i);
    ++i;
  }
  return P;
}

// Entry (j,k) of Sigma_xx - Theta' Sigma Theta as a symmetric coefficient matrix.
inline Mat lyapunov_coefficient(const Mat& theta, int j, int k) {
  const Eigen::Index d = theta.rows();
  Mat E = Mat::Zero(d, d);
  E(j, k) += 0.5;
  E(k, j) += 0.5;
  Mat T = theta.col(j) * theta.col(k).transpose();
  return E - la::sym(T);
}

// Covariance of the closed loop under gain K for the (relaxed) steady-state
// equation Sxx - M Sxx M' + mu tr(G Sxx) I = W, M = A + BK, G = [I;K]' Vinv [I;K].
// Returns Sigma = [I;K] Sxx [I;K]'.
inline Mat covariance_of_gain(const Mat& theta, const Mat& K, const Mat& W, double mu, const Mat& V_inv) {
  const Eigen::Index n = theta.cols(), d = theta.rows();
  Mat Gam(d, n);
  Gam.topRows(n) = Mat::Identity(n, n);
  Gam.bottomRows(d - n) = K;
  Mat M = theta.transpose() * Gam;
  Mat Lhs = Mat::Identity(n * n, n * n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) Lhs.block(a * n, b * n, n, n) -= M(a, b) * M;
  if (mu != 0.0) {
    Mat G = Gam.transpose() * V_inv * Gam;
    Eigen::Map<const Vec> g(G.data(), n * n);
    Vec e = Vec::Zero(n * n);
    for (Eigen::Index i = 0; i < n; ++i) e(i * n + i) = 1.0;
    Lhs += mu * e * g.transpose();
  }
  Eigen::Map<const Vec> w(W.data(), n * n);
  Vec x = Lhs.partialPivLu().solve(w);
  Mat Sxx = la::sym(Eigen::Map<const Mat>(x.data(), n, n));
  return la::sym(Gam * Sxx * Gam.transpose());
}

// Gain from the null space of the optimal dual slack: Z [I; K] = 0.
inline Mat gain_from_dual_slack(const Mat& Z, int n) {
  const Eigen::Index m = Z.rows() - n;
  return -Z.bottomRightCorner(m, m).ldlt().solve(Z.bottomLeftCorner(m, n));
}

// min <diag(Q,R), Sigma>
// min <diag(Q,R), Sigma>  s.t.  Sigma_xx = Theta' Sigma Theta + W,  Sigma psd.
inline ExactSdpSolution exact_sdp(const SystemModel& model, const sdp::Settings& settings = {}) {
  check_dims(model);
  const int n = model.n(), m = model.m(), d = n + m;
  Mat W = model.W();
  if (la::min_eig(W) <= 0.0) throw ModelInvariantError("exact SDP requires W positive definite");
  Mat theta = model.theta();
  sdp::ConicProgram prog;
  prog.block_dims = {d};
  Mat C = Mat::Zero(d, d);
  C.topLeftCorner(n, n) = model.Q;
  C.bottomRightCorner(m, m) = model.R;
  prog.C = {C};
  auto pairs = sym_pairs(n);
  prog.b.resize(static_cast<Eigen::Index>(pairs.size()));
  int i = 0;
  for (auto [j, k] : pairs) {
    prog.A.push_back({lyapunov_coefficient(theta, j, k)});
    prog.b(i++) = W(j, k);
  }
  sdp::Result r = sdp::solve(prog, settings);
  if (r.status != sdp::Status::optimal)
    throw ModelInvariantError("exact SDP solve failed: " + sdp::to_string(r.status));
  ExactSdpSolution out;
  out.Sigma_star = r.X[0];
  Mat refined = covariance_of_gain(theta, gain_from_dual_slack(r.Z[0], n), W, 0.0, Mat());
  if (refined.allFinite() && la::min_eig(refined.topLeftCorner(n, n)) > 0.0 &&
      (C.cwiseProduct(refined).sum() <= r.primal_objective + settings.tol * (1.0 + std::abs(r.primal_objective))))
    out.Sigma_star = refined;
  Mat Sxx = out.Sigma_star.topLeftCorner(n, n);
  Mat Sux = out.Sigma_star.bottomLeftCorner(m, n);
  out.K_star = Sxx.transpose().ldlt().solve(Sux.transpose()).transpose();
  out.P_dual = pairs_to_sym(r.y, n);
  out.objective = C.cwiseProduct(out.Sigma_star).sum();
  out.dual_objective = r.dual_objective;
  out.feasibility_residual =
      (Sxx - theta.transpose() * out.Sigma_star * theta - W).cwiseAbs().maxCoeff();
  out.raw = std::move(r);
  return out;
}

// A + B K = H L H^-1 with ||L|| <= 1 - gamma and cond(H) <= kappa.
struct StabilityCert {
  double kappa = 1.0;
  double gamma = 0.5;
  Mat H;
  Mat L;
  double spectral_radius = 0.0;
};

inline constexpr double kGammaClip = 1e-9;

inline StabilityCert stability_certificate(const Mat& A, const Mat& B, const Mat& K) {
  const Eigen::Index n = A.rows();
  if (K.rows() != B.cols() || K.cols() != n) throw ConfigError("K", "gain dimension mismatch");
  Mat M = A + B * K;
  double rho = la::spectral_radius(M);
  if (!(rho < 1.0))
    throw NotStabilizingError(rho, "closed loop is not stable, spectral radius " + std::to_string(rho));
  double rho_s = rho + 0.05 * (1.0 - rho);
  Mat Qk = M / rho_s;
  // Smith doubling: P = sum_k (Q')^k Q^k.
  Mat P = Mat::Identity(n, n);
  for (int it = 0; it < 200 && la::spectral_norm(Qk) >= 1e-12; ++it) {
    P = la::sym(P + Qk.transpose() * P * Qk);
    Qk = Qk * Qk;
    if (!P.allFinite()) throw CertificateError("Lyapunov series diverged");
  }
  StabilityCert c;
  c.spectral_radius = rho;
  c.H = la::inv_sqrtm(P);
  Mat Hinv = la::sqrtm(P);
  c.L = Hinv * M * c.H;
  double lnorm = la::spectral_norm(c.L);
  c.gamma = std::clamp(1.0 - lnorm, kGammaClip, 1.0 - kGammaClip);
  double cond = la::spectral_norm(c.H) * la::spectral_norm(Hinv);
  c.kappa = std::max({1.0, cond, la::spectral_norm(K)});
  return c;
}

inline StabilityCert stability_certificate(const SystemModel& model, const Mat& K) {
  return stability_certificate(model.A, model.B, K);
}

inline double nu_bound(const SystemModel& model, const StabilityCert& cert0) {
  double k2 = cert0.kappa * cert0.kappa;
  double s2 = model.sigma_w * model.sigma_w;
  return model.alpha1 * (model.n() + model.m()) * k2 * (1.0 + k2) * s2 / cert0.gamma;
}

struct KappaGamma {
  double kappa;
  double gamma;
};

inline KappaGamma kappa_gamma(double nu, double alpha0, double sigma_w) {
  if (!(nu > 0.0) || !(alpha0 > 0.0) || !(sigma_w > 0.0))
    throw DomainError("kappa_gamma requires positive nu, alpha0, sigma_w");
  double kappa = std::sqrt(2.0 * nu / (alpha0 * sigma_w * sigma_w));
  return {kappa, 1.0 / (2.0 * kappa * kappa)};
}

}  // namespace alqr
