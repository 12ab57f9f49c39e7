#include "gpdtsm/gpou.hpp"

#include <cmath>

#include "gpdtsm/linalg.hpp"

namespace gpdtsm::gpou {

namespace {

Eigen::LLT<Mat> factor_kp(const Mat& kp) {
  Eigen::LLT<Mat> llt(kp);
  if (llt.info() == Eigen::Success) return llt;
  // Conditioning fallback: escalate from the documented 1e-10 jitter.
  Mat kj = kp;
  double jitter = 1e-10;
  for (int k = 0; k < 4; ++k) {
    kj.diagonal().array() += jitter;
    llt.compute(kj);
    if (llt.info() == Eigen::Success) return llt;
    jitter *= 100.0;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(kp);
  throw NumericalError(
      "p_loglik: K_P factorization failed, eigenvalue range [" +
      std::to_string(es.eigenvalues().minCoeff()) + ", " +
      std::to_string(es.eigenvalues().maxCoeff()) + "]");
}

}  // namespace

PDynParams build_p_dynamics(const Vec& mu_p_q, const Mat& phi_p_q,
                            const Mat& sigma_p_chol, double lambda12,
                            const Vec* lambda0, const Mat* lambda1_full) {
  const Eigen::Index n = mu_p_q.size();
  PDynParams pd;
  pd.lambda12 = lambda12;
  pd.sigma_p_chol = sigma_p_chol;
  pd.mu_p_p = mu_p_q;
  if (lambda0 != nullptr) pd.mu_p_p += *lambda0;
  pd.phi_p_p = phi_p_q;
  if (lambda1_full != nullptr) {
    pd.phi_p_p += *lambda1_full;
  } else {
    if (n < 2)
      throw ValidationError("build_p_dynamics: lambda12 needs N >= 2");
    pd.phi_p_p(0, 1) += lambda12;
  }
  return pd;
}

StackedResiduals residuals(const Mat& p, const PDynParams& pd) {
  const Eigen::Index t_len = p.rows() - 1;
  const Eigen::Index n = p.cols();
  if (t_len < 1) throw ValidationError("residuals: need at least two dates");

  StackedResiduals out;
  out.per_eq.resize(t_len, n);
  for (Eigen::Index t = 1; t <= t_len; ++t)
    out.per_eq.row(t - 1) = p.row(t) - pd.mu_p_p.transpose() -
                            p.row(t - 1) * pd.phi_p_p.transpose();
  out.s.resize(n * t_len);
  for (Eigen::Index j = 0; j < n; ++j)
    out.s.segment(j * t_len, t_len) = out.per_eq.col(j);
  return out;
}

StackedResiduals residuals(const termstructure::PcPanel& panel,
                           const PDynParams& pd) {
  return residuals(panel.p, pd);
}

Mat build_kp(const gpkernel::GpCov& k, const Mat& sigma_p_chol) {
  const Eigen::Index t_len = k.t_len();
  const Mat ssp = sigma_p_chol * sigma_p_chol.transpose();
  Mat kp = k.k;
  for (Eigen::Index j1 = 0; j1 < 3; ++j1)
    for (Eigen::Index j2 = 0; j2 < 3; ++j2)
      kp.block(j1 * t_len, j2 * t_len, t_len, t_len).diagonal().array() +=
          ssp(j1, j2);
  return kp;
}

double p_loglik(const StackedResiduals& s, const gpkernel::GpCov& k,
                const Mat& sigma_p_chol) {
  const Eigen::Index t_len = s.per_eq.rows();
  const Eigen::Index n = s.per_eq.cols();
  if (k.t_len() != t_len)
    throw ValidationError("p_loglik: kernel window does not match residuals");

  if (k.all_zero()) {
    // Latent function switched off: iid VAR innovations.
    double ll = 0.0;
    const Vec zero = Vec::Zero(n);
    for (Eigen::Index t = 0; t < t_len; ++t)
      ll += mvn_logpdf_chol(s.per_eq.row(t).transpose(), zero, sigma_p_chol);
    return ll;
  }

  const Eigen::LLT<Mat> llt = factor_kp(build_kp(k, sigma_p_chol));
  double half_logdet = 0.0;
  for (Eigen::Index i = 0; i < llt.matrixLLT().rows(); ++i)
    half_logdet += std::log(llt.matrixLLT()(i, i));
  const Vec z = llt.matrixL().solve(s.s);
  return -0.5 * static_cast<double>(t_len * n) * kLog2Pi - half_logdet -
         0.5 * z.squaredNorm();
}

void posterior_v(const StackedResiduals& s, const gpkernel::GpCov& k,
                 const Mat& sigma_p_chol, Vec& mean, Mat& cov) {
  const Eigen::Index dim = s.s.size();
  if (k.all_zero()) {
    mean = Vec::Zero(dim);
    cov = Mat::Zero(dim, dim);
    return;
  }
  const Eigen::LLT<Mat> llt = factor_kp(build_kp(k, sigma_p_chol));
  const Vec alpha = llt.solve(s.s);
  mean = k.k * alpha;
  cov = k.k - k.k * llt.solve(k.k);
  cov = 0.5 * (cov + cov.transpose());
}

PcPredictive predictive_pc(const Vec& p_last, const StackedResiduals& s,
                           const gpkernel::GpCov& k, const Mat3& k0,
                           const Mat& k_next, const PDynParams& pd) {
  const Eigen::Index n = p_last.size();
  const Mat ssp = pd.sigma_p_chol * pd.sigma_p_chol.transpose();

  PcPredictive out;
  out.gp_corr = Vec::Zero(n);
  Mat cov = k0 + ssp;
  if (!k.all_zero()) {
    const Eigen::LLT<Mat> llt = factor_kp(build_kp(k, pd.sigma_p_chol));
    out.gp_corr = k_next.transpose() * llt.solve(s.s);
    cov -= k_next.transpose() * llt.solve(k_next);
  }
  out.mean = pd.mu_p_p + pd.phi_p_p * p_last + out.gp_corr;

  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  const double tol = 1e-8 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -tol)
    throw NumericalError("predictive_pc: covariance not PSD, min eigenvalue " +
                         std::to_string(es.eigenvalues().minCoeff()));
  if (es.eigenvalues().minCoeff() < 0.0) {
    Vec ev = es.eigenvalues().cwiseMax(0.0);
    cov = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  }
  out.cov = cov;
  return out;
}

}  // namespace gpdtsm::gpou
