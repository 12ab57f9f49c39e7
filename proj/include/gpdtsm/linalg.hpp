#pragma once

#include <cmath>

#include "gpdtsm/types.hpp"

namespace gpdtsm {

// Cholesky of a symmetric matrix, retrying with growing diagonal jitter.
// Throws NumericalError with a condition estimate if it never succeeds.
inline Eigen::LLT<Mat> chol_with_retry(const Mat& a, const char* what) {
  Eigen::LLT<Mat> llt(a);
  if (llt.info() == Eigen::Success) return llt;
  const double scale = a.diagonal().cwiseAbs().maxCoeff();
  double jitter = 1e-12 * (scale > 0 ? scale : 1.0);
  Mat aj = a;
  for (int k = 0; k < 6; ++k) {
    aj.diagonal().array() += jitter;
    llt.compute(aj);
    if (llt.info() == Eigen::Success) return llt;
    jitter *= 100.0;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  throw NumericalError(std::string(what) +
                       ": Cholesky failed, eigenvalue range [" +
                       std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

// log N(x; mean, cov) through an LLT factor of cov.
inline double mvn_logpdf(const Vec& x, const Vec& mean,
                         const Eigen::LLT<Mat>& llt) {
  const auto& l = llt.matrixLLT();
  double half_logdet = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) half_logdet += std::log(l(i, i));
  const Vec z = llt.matrixL().solve(x - mean);
  return -0.5 * x.size() * kLog2Pi - half_logdet - 0.5 * z.squaredNorm();
}

// log N(x; mean, L L') with L lower-triangular (e.g. a Cholesky parameter).
inline double mvn_logpdf_chol(const Vec& x, const Vec& mean, const Mat& l) {
  double half_logdet = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) half_logdet += std::log(l(i, i));
  const Vec z =
      l.triangularView<Eigen::Lower>().solve(x - mean);
  return -0.5 * x.size() * kLog2Pi - half_logdet - 0.5 * z.squaredNorm();
}

inline double log1p_exp(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Weighted mean and covariance of row-stacked samples (weights need not sum
// to one).  Used for particle-moment proposals.
inline void weighted_moments(const Mat& rows, const Vec& w, Vec& mean,
                             Mat& cov) {
  const double wsum = w.sum();
  mean = (rows.transpose() * w) / wsum;
  Mat centered = rows.rowwise() - mean.transpose();
  cov = (centered.transpose() * (w.asDiagonal() * centered)) / wsum;
  cov = 0.5 * (cov + cov.transpose());
}

// Floor eigenvalues to keep a covariance usable as a proposal.
inline Mat make_pd(const Mat& cov, double floor_rel = 1e-8) {
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  Vec ev = es.eigenvalues();
  const double floor_abs =
      std::max(ev.cwiseAbs().maxCoeff() * floor_rel, 1e-14);
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    ev[i] = std::max(ev[i], floor_abs);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace gpdtsm
