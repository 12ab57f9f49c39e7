#include "gpdtsm/gpkernel.hpp"

#include <cmath>

namespace gpdtsm::gpkernel {

void KernelHypers::validate() const {
  for (int j = 0; j < 3; ++j) {
    if (active[j] && !(ell_k[j] > 0.0))
      throw ValidationError("KernelHypers: active block " + std::to_string(j) +
                            " needs ell > 0");
    if (!(sigma_k[j] >= 0.0))
      throw ValidationError("KernelHypers: sigma_k must be >= 0");
  }
}

bool GpCov::all_zero() const {
  for (const auto& b : blocks)
    if (b.size() > 0 && b.cwiseAbs().maxCoeff() > 0.0) return false;
  return true;
}

double sqexp(double x_a, double x_b, double ell, double sigma) {
  if (!(ell > 0.0)) throw ValidationError("sqexp: ell must be > 0");
  const double d = x_a - x_b;
  return sqexp_scalar(d * d, ell, sigma);
}

double sqexp(const Vec& x_a, const Vec& x_b, double ell, double sigma) {
  if (!(ell > 0.0)) throw ValidationError("sqexp: ell must be > 0");
  return sqexp_scalar((x_a - x_b).squaredNorm(), ell, sigma);
}

GpCov build_block_K(const Vec& macros, const KernelHypers& hypers) {
  hypers.validate();
  if (!macros.allFinite())
    throw ValidationError("build_block_K: non-finite macro value");
  const Eigen::Index t_len = macros.size();

  GpCov cov;
  cov.inputs = macros;
  cov.k = Mat::Zero(3 * t_len, 3 * t_len);
  for (int j = 0; j < 3; ++j) {
    cov.blocks[j] = Mat::Zero(t_len, t_len);
    if (!hypers.active[j] || hypers.sigma_k[j] == 0.0) continue;
    const double s2 = hypers.sigma_k[j] * hypers.sigma_k[j];
    const double inv2l2 = 1.0 / (2.0 * hypers.ell_k[j] * hypers.ell_k[j]);
    for (Eigen::Index a = 0; a < t_len; ++a) {
      cov.blocks[j](a, a) = s2;
      for (Eigen::Index b = 0; b < a; ++b) {
        const double d = macros[a] - macros[b];
        const double v = s2 * std::exp(-d * d * inv2l2);
        cov.blocks[j](a, b) = v;
        cov.blocks[j](b, a) = v;
      }
    }
    cov.k.block(j * t_len, j * t_len, t_len, t_len) = cov.blocks[j];
  }
  return cov;
}

void build_cross_K(const Vec& macros, double m_next,
                   const KernelHypers& hypers, Mat3& k0, Mat& k_next) {
  hypers.validate();
  if (!macros.allFinite() || !std::isfinite(m_next))
    throw ValidationError("build_cross_K: non-finite macro value");
  const Eigen::Index t_len = macros.size();

  k0.setZero();
  k_next = Mat::Zero(3 * t_len, 3);
  for (int j = 0; j < 3; ++j) {
    if (!hypers.active[j] || hypers.sigma_k[j] == 0.0) continue;
    const double s2 = hypers.sigma_k[j] * hypers.sigma_k[j];
    const double inv2l2 = 1.0 / (2.0 * hypers.ell_k[j] * hypers.ell_k[j]);
    k0(j, j) = s2;
    for (Eigen::Index a = 0; a < t_len; ++a) {
      const double d = macros[a] - m_next;
      k_next(j * t_len + a, j) = s2 * std::exp(-d * d * inv2l2);
    }
  }
}

}  // namespace gpdtsm::gpkernel
