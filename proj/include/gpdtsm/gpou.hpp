#pragma once

#include "gpdtsm/gpkernel.hpp"
#include "gpdtsm/termstructure.hpp"
#include "gpdtsm/types.hpp"

// Real-world PC dynamics with a latent-function mean shift: residual
// construction, the marginal likelihood with the latent function integrated
// out, the posterior over the function values, and the one-step predictive
// Gaussian for the PCs.
namespace gpdtsm::gpou {

struct PDynParams {
  Vec mu_p_p;     // N
  Mat phi_p_p;    // N x N
  double lambda12 = 0.0;
  Mat sigma_p_chol;
};

struct StackedResiduals {
  Vec s;       // 3T, equation-major: all of equation 1, then 2, then 3
  Mat per_eq;  // T x N, row t-1 is s_t
};

struct PcPredictive {
  Vec mean;     // N
  Mat cov;      // N x N, symmetric PSD
  Vec gp_corr;  // the mean shift coming from the conditioned latent function
};

// Risk-price map: phi_p_p = phi_p_q + lambda1 where lambda1 is zero except
// entry (1,2) = lambda12 (1-indexed); mu_p_p = mu_p_q + lambda0 with lambda0
// zero under the adopted restriction.  The optional arguments lift the
// restriction: lambda0 frees the intercept, lambda1_full replaces the
// single-entry form with a dense matrix (maximally flexible model).
PDynParams build_p_dynamics(const Vec& mu_p_q, const Mat& phi_p_q,
                            const Mat& sigma_p_chol, double lambda12,
                            const Vec* lambda0 = nullptr,
                            const Mat* lambda1_full = nullptr);

// s_t = P_t - mu_p_p - phi_p_p P_{t-1} for t = 1..T (panel rows 0..T).
StackedResiduals residuals(const termstructure::PcPanel& panel,
                           const PDynParams& pd);
StackedResiduals residuals(const Mat& p, const PDynParams& pd);

// Marginal Gaussian log-density of S under cov K + Sigma_P Sigma_P' (x) I_T.
double p_loglik(const StackedResiduals& s, const gpkernel::GpCov& k,
                const Mat& sigma_p_chol);

// Posterior of the stacked latent function values given S.
void posterior_v(const StackedResiduals& s, const gpkernel::GpCov& k,
                 const Mat& sigma_p_chol, Vec& mean, Mat& cov);

// One-step predictive of the PCs given the residual history and the cross
// pieces toward the next macro input.
PcPredictive predictive_pc(const Vec& p_last, const StackedResiduals& s,
                           const gpkernel::GpCov& k, const Mat3& k0,
                           const Mat& k_next, const PDynParams& pd);

// K_P = K + Sigma_P Sigma_P' (x) I_T in the equation-major layout.
Mat build_kp(const gpkernel::GpCov& k, const Mat& sigma_p_chol);

}  // namespace gpdtsm::gpou
