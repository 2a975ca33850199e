#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "alqr/linalg.hpp"

namespace alqr::sdp {

// Block-diagonal symmetric matrix, one dense block per cone.
using Blocks = std::vector<Mat>;

// min <C,X>  s.t.  <A_i,X> = b_i,  X psd (block diagonal)
// max b'y    s.t.  sum_i y_i A_i + Z = C,  Z psd
struct ConicProgram {
  std::vector<int> block_dims;
  Blocks C;
  std::vector<Blocks> A;
  Vec b;

  int num_constraints() const { return static_cast<int>(A.size()); }
  int total_dim() const {
    int s = 0;
    for (int d : block_dims) s += d;
    return s;
  }
};

enum class Status { optimal, infeasible, unbounded, max_iterations, numerical_error };

inline std::string to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::max_iterations: return "max_iterations";
    case Status::numerical_error: return "numerical_error";
  }
  return "unknown";
}

struct Settings {
  double tol = 1e-8;
  int max_iter = 200;
  double step_fraction = 0.98;
  double divergence = 1e12;
};

struct Result {
  Status status = Status::numerical_error;
  Blocks X, Z;
  Vec y;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;  // relative
  double dual_residual = 0.0;    // relative
  double relative_gap = 0.0;
  int iterations = 0;
};

inline double inner(const Blocks& U, const Blocks& V) {
  double s = 0.0;
  for (std::size_t k = 0; k < U.size(); ++k) s += U[k].cwiseProduct(V[k]).sum();
  return s;
}

inline double frob(const Blocks& U) { return std::sqrt(inner(U, U)); }

inline Blocks zeros_like(const std::vector<int>& dims) {
  Blocks out;
  for (int d : dims) out.push_back(Mat::Zero(d, d));
  return out;
}

inline Blocks scaled_identity(const std::vector<int>& dims, double s) {
  Blocks out;
  for (int d : dims) out.push_back(s * Mat::Identity(d, d));
  return out;
}

inline Vec apply_A(const ConicProgram& p, const Blocks& X) {
  Vec v(p.num_constraints());
  for (int i = 0; i < p.num_constraints(); ++i) v(i) = inner(p.A[i], X);
  return v;
}

inline Blocks apply_At(const ConicProgram& p, const Vec& y) {
  Blocks out = zeros_like(p.block_dims);
  for (int i = 0; i < p.num_constraints(); ++i)
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += y(i) * p.A[i][k];
  return out;
}

// Interface for any backend able to solve a ConicProgram.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual Result solve(const ConicProgram& prog, const Settings& settings) const = 0;
};

namespace detail {

// Largest step a with X + a dX psd, capped at `cap`.
inline double max_step(const Blocks& X, const Blocks& dX, double cap) {
  double alpha = cap;
  for (std::size_t k = 0; k < X.size(); ++k) {
    Eigen::LLT<Mat> llt(X[k]);
    if (llt.info() != Eigen::Success) return 0.0;
    Mat Li = llt.matrixL().solve(Mat::Identity(X[k].rows(), X[k].cols()));
    Mat S = Li * dX[k] * Li.transpose();
    double lmin = la::min_eig(S);
    if (lmin < 0.0) alpha = std::min(alpha, -1.0 / lmin);
  }
  return alpha;
}

}  // namespace detail

// Dense infeasible primal-dual path-following method, HKM direction with
// Mehrotra predictor-corrector.
class InteriorPoint final : public Backend {
 public:
  Result solve(const ConicProgram& p, const Settings& st) const override {
    const int mcon = p.num_constraints();
    const int N = p.total_dim();
    const std::size_t nb = p.block_dims.size();
    Result res;

    double normb = p.b.norm();
    double normC = frob(p.C);
    double maxA = 0.0, xi_init = 1.0;
    for (int i = 0; i < mcon; ++i) {
      double na = frob(p.A[i]);
      maxA = std::max(maxA, na);
      xi_init = std::max(xi_init, (1.0 + std::abs(p.b(i))) / (1.0 + na));
    }
    double xi = std::max({10.0, std::sqrt(static_cast<double>(N)), xi_init * std::sqrt(static_cast<double>(N))});
    double eta = std::max({10.0, std::sqrt(static_cast<double>(N)), maxA, normC});

    Blocks X = scaled_identity(p.block_dims, xi);
    Blocks Z = scaled_identity(p.block_dims, eta);
    Vec y = Vec::Zero(mcon);

    auto finish = [&](Status s, int it) {
      res.status = s;
      res.X = X;
      res.Z = Z;
      res.y = y;
      res.iterations = it;
      return res;
    };

    for (int it = 0; it <= st.max_iter; ++it) {
      Vec rp = p.b - apply_A(p, X);
      Blocks Aty = apply_At(p, y);
      Blocks Rd(nb);
      for (std::size_t k = 0; k < nb; ++k) Rd[k] = p.C[k] - Aty[k] - Z[k];
      double mu = inner(X, Z) / N;
      double pobj = inner(p.C, X);
      double dobj = p.b.dot(y);
      res.primal_objective = pobj;
      res.dual_objective = dobj;
      res.primal_residual = rp.norm() / (1.0 + normb);
      res.dual_residual = frob(Rd) / (1.0 + normC);
      res.relative_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
      if (!std::isfinite(pobj) || !std::isfinite(dobj)) return finish(Status::numerical_error, it);

      if (res.primal_residual <= st.tol && res.dual_residual <= st.tol && res.relative_gap <= st.tol)
        return finish(Status::optimal, it);
      if (it == st.max_iter) break;

      double xnorm = frob(X), ynorm = y.norm();
      if (xnorm > st.divergence && res.dual_residual <= std::sqrt(st.tol))
        return finish(Status::unbounded, it);
      if (ynorm > st.divergence || xnorm > st.divergence)
        return finish(Status::infeasible, it);

      Blocks Zinv(nb);
      for (std::size_t k = 0; k < nb; ++k) Zinv[k] = la::spd_inverse(Z[k]);

      // Schur complement M_ij = tr(A_i X A_j Z^-1).
      Mat M(mcon, mcon);
      std::vector<Blocks> G(mcon, Blocks(nb));
      for (int j = 0; j < mcon; ++j)
        for (std::size_t k = 0; k < nb; ++k) G[j][k] = X[k] * p.A[j][k] * Zinv[k];
      for (int i = 0; i < mcon; ++i)
        for (int j = i; j < mcon; ++j) M(i, j) = M(j, i) = inner(p.A[i], G[j]);
      Eigen::LDLT<Mat> ldlt(M);
      if (ldlt.info() != Eigen::Success) return finish(Status::numerical_error, it);

      auto direction = [&](const Blocks& Rc, Blocks& dX, Vec& dy, Blocks& dZ) {
        Blocks T(nb);
        for (std::size_t k = 0; k < nb; ++k) T[k] = (Rc[k] - X[k] * Rd[k]) * Zinv[k];
        Vec rhs = rp - apply_A(p, T);
        dy = ldlt.solve(rhs);
        Blocks Atdy = apply_At(p, dy);
        dZ.resize(nb);
        dX.resize(nb);
        for (std::size_t k = 0; k < nb; ++k) {
          dZ[k] = Rd[k] - Atdy[k];
          dX[k] = la::sym((Rc[k] - X[k] * dZ[k]) * Zinv[k]);
        }
      };

      Blocks Rc(nb), dXa, dZa, dX, dZ;
      Vec dya, dy;
      for (std::size_t k = 0; k < nb; ++k) Rc[k] = -X[k] * Z[k];
      direction(Rc, dXa, dya, dZa);
      double ap = std::min(1.0, detail::max_step(X, dXa, 1e300));
      double ad = std::min(1.0, detail::max_step(Z, dZa, 1e300));
      double mu_aff = 0.0;
      for (std::size_t k = 0; k < nb; ++k)
        mu_aff += (X[k] + ap * dXa[k]).cwiseProduct(Z[k] + ad * dZa[k]).sum();
      mu_aff /= N;
      double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

      for (std::size_t k = 0; k < nb; ++k)
        Rc[k] = sigma * mu * Mat::Identity(X[k].rows(), X[k].cols()) - X[k] * Z[k] - dXa[k] * dZa[k];
      direction(Rc, dX, dy, dZ);

      ap = std::min(1.0, st.step_fraction * detail::max_step(X, dX, 1e300));
      ad = std::min(1.0, st.step_fraction * detail::max_step(Z, dZ, 1e300));
      if (ap <= 0.0 && ad <= 0.0) return finish(Status::numerical_error, it);
      for (std::size_t k = 0; k < nb; ++k) {
        X[k] = la::sym(X[k] + ap * dX[k]);
        Z[k] = la::sym(Z[k] + ad * dZ[k]);
      }
      y += ad * dy;
    }
    return finish(Status::max_iterations, st.max_iter);
  }
};

inline const Backend& default_backend() {
  static const InteriorPoint ipm;
  return ipm;
}

inline Result solve(const ConicProgram& prog, const Settings& settings = {},
                    const Backend& backend = default_backend()) {
  return backend.solve(prog, settings);
}

}  // namespace alqr::sdp
