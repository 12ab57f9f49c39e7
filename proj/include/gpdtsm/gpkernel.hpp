#pragma once

#include <array>

#include "gpdtsm/types.hpp"

// Squared-exponential kernel and the block-diagonal covariance pieces of the
// three-output latent function: the gram matrix K over the lagged macro
// inputs, and the cross pieces (k0, k_next) toward one step ahead.
namespace gpdtsm::gpkernel {

struct KernelHypers {
  Vec3 ell_k = Vec3::Ones();    // length-scales, positive where active
  Vec3 sigma_k = Vec3::Zero();  // signal standard deviations, >= 0
  std::array<bool, 3> active = {false, false, false};

  bool any_active() const { return active[0] || active[1] || active[2]; }
  void validate() const;
};

struct GpCov {
  Mat k;                      // 3T x 3T, block diagonal
  std::array<Mat, 3> blocks;  // the T x T diagonal blocks
  Vec inputs;                 // macro values the gram was built over

  Eigen::Index t_len() const { return inputs.size(); }
  bool all_zero() const;
};

template <typename Scalar>
Scalar sqexp_scalar(Scalar dist2, Scalar ell, Scalar sigma) {
  using std::exp;
  return sigma * sigma * exp(-dist2 / (2.0 * ell * ell));
}

double sqexp(double x_a, double x_b, double ell, double sigma);
double sqexp(const Vec& x_a, const Vec& x_b, double ell, double sigma);

// Gram blocks over macros[0..T-1]; inactive blocks are zero matrices.
GpCov build_block_K(const Vec& macros, const KernelHypers& hypers);

// Cross covariances toward the next-step input m_next:
//   k0     = diag over blocks of k(m_next, m_next), zero where inactive;
//   k_next = 3T x 3 with column j carrying block j's cross vector in rows
//            [jT, (j+1)T) and zeros elsewhere.
void build_cross_K(const Vec& macros, double m_next,
                   const KernelHypers& hypers, Mat3& k0, Mat& k_next);

}  // namespace gpdtsm::gpkernel
