#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "alqr/errors.hpp"

namespace alqr {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace la {

inline Mat sym(const Mat& M) { return 0.5 * (M + M.transpose()); }

inline double spectral_norm(const Mat& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(M);
  return svd.singularValues()(0);
}

// Sum of singular values; equals trace for PSD input.
inline double star_norm(const Mat& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(M);
  return svd.singularValues().sum();
}

inline double spectral_radius(const Mat& M) {
  if (M.size() == 0) return 0.0;
  Eigen::EigenSolver<Mat> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline Vec sym_eigenvalues(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(S), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline double min_eig(const Mat& S) { return sym_eigenvalues(S).minCoeff(); }
inline double max_eig(const Mat& S) { return sym_eigenvalues(S).maxCoeff(); }

// S^p for symmetric S with eigenvalues floored at `floor`.
inline Mat sym_pow(const Mat& S, double p, double floor = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(S));
  Vec d = es.eigenvalues().cwiseMax(floor);
  for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = std::pow(d(i), p);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

inline Mat sqrtm(const Mat& S) { return sym_pow(S, 0.5); }
inline Mat inv_sqrtm(const Mat& S) { return sym_pow(S, -0.5); }

inline double logdet_spd(const Mat& S) {
  Eigen::LLT<Mat> llt(S);
  if (llt.info() != Eigen::Success)
    throw DomainError("log-determinant of a non positive-definite matrix");
  const Mat& L = llt.matrixL();
  double s = 0.0;
  for (Eigen::Index i = 0; i < L.rows(); ++i) s += std::log(L(i, i));
  return 2.0 * s;
}

inline Mat spd_inverse(const Mat& S) {
  Eigen::LLT<Mat> llt(S);
  if (llt.info() != Eigen::Success)
    throw DomainError("inverse of a non positive-definite matrix");
  return llt.solve(Mat::Identity(S.rows(), S.cols()));
}

inline bool is_symmetric(const Mat& S, double tol = 1e-10) {
  if (S.rows() != S.cols()) return false;
  return (S - S.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, S.cwiseAbs().maxCoeff());
}

inline bool all_finite(const Mat& M) { return M.allFinite(); }

inline void require_dims(const Mat& M, Eigen::Index r, Eigen::Index c, const std::string& what) {
  if (M.rows() != r || M.cols() != c)
    throw ConfigError(what, "expected " + std::to_string(r) + "x" + std::to_string(c) + ", got " +
                                std::to_string(M.rows()) + "x" + std::to_string(M.cols()));
}

}  // namespace la
}  // namespace alqr
