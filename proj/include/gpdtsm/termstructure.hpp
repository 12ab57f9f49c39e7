#pragma once

#include <string>
#include <vector>

#include "gpdtsm/types.hpp"

// Bond pricing under the canonical risk-neutral form (short rate = sum of
// latent states, diagonal feedback with ordered eigenvalues), rotation of the
// loadings onto observed principal components, and the cross-sectional
// measurement likelihood.
//
// Unit contract: yields are per-month continuously compounded decimals and
// maturities are in months throughout the library.  The CSV layer converts
// from annualized decimals at the boundary.
namespace gpdtsm::termstructure {

struct QParams {
  double k_inf_q = 0.0;  // long-run short-rate constant, monthly decimal
  Vec g_q;               // diagonal of the Q feedback matrix, strictly decreasing
  Mat sigma_p_chol;      // lower Cholesky factor of the PC innovation covariance
  double sigma_e2 = 1.0; // measurement-error variance, squared decimal yield

  int n_factors() const { return static_cast<int>(g_q.size()); }
  void validate() const;
};

// Loadings of yields on the latent states: y^n = a_x[n] + b_x.row(n) * X.
struct LatentLoadings {
  Vec maturities;  // months, ascending
  Vec a_x;         // J
  Mat b_x;         // J x N
};

// Loadings after rotation onto PCs, plus the rotated short rate and
// Q dynamics that come out of the same change of variables.
struct PricingLoadings {
  Vec maturities;
  Vec a_x;
  Mat b_x;
  Vec a_p;        // J
  Mat b_p;        // J x N
  double delta0_p = 0.0;
  Vec delta1_p;   // N
  Vec mu_p_q;     // N
  Mat phi_p_q;    // N x N

  // Model-implied yield for the row at index j given PCs p.
  double yield(Eigen::Index j, const Vec& p) const {
    return a_p[j] + b_p.row(j).dot(p);
  }
  // Index of a maturity (months) in `maturities`; -1 if absent.
  Eigen::Index find_maturity(double months) const;
};

struct PcPanel {
  std::vector<std::string> dates;  // optional, length T+1 when set
  Mat p;       // (T+1) x N principal components
  Mat w;       // N x J loading rows
  Mat w_perp;  // (J-N) x J null-space basis rows

  int n_obs() const { return static_cast<int>(p.rows()); }
  int n_factors() const { return static_cast<int>(p.cols()); }
};

// Forward recursion of the pricing difference equations from maturity 1 up to
// max(maturities), with the latent innovation factor supplied explicitly.
// Returns per-maturity yield loadings (log-price loadings divided by -n).
LatentLoadings compute_latent_loadings(const QParams& qp, const Vec& maturities,
                                       const Mat& sigma_latent);

// Convenience overload treating qp.sigma_p_chol as the latent factor, for use
// when the states themselves are the PCs (identity rotation) or in tests.
LatentLoadings compute_latent_loadings(const QParams& qp, const Vec& maturities);

// Rotation onto P = W y.  Throws ValidationError on a knife-edge W B_X.
// When qp is supplied the rotated Q dynamics (mu_p_q, phi_p_q) are filled in
// as well; otherwise those fields are left empty.
PricingLoadings rotate_loadings(const LatentLoadings& latent, const Mat& w,
                                const QParams* qp = nullptr);

// Full composition used by the likelihood: the latent innovation factor is
// pinned by sigma_p_chol through Sigma = (W B_X)^{-1} Sigma_P, which only
// needs B_X and therefore no fixed-point iteration.
PricingLoadings model_loadings(const QParams& qp, const Mat& w,
                               const Vec& maturities);

// Loadings evaluated on eval_maturities while the rotation stays pinned by
// the panel grid the PCs were built from (forecast legs need off-grid rows).
PricingLoadings model_loadings(const QParams& qp, const Mat& w,
                               const Vec& panel_maturities,
                               const Vec& eval_maturities);

// Cross-sectional Gaussian log-likelihood: the components of the fit residual
// in the W_perp directions are iid N(0, sigma_e2), J-N of them per date.
double q_loglik(const PcPanel& panel, const Mat& yields,
                const PricingLoadings& loadings, double sigma_e2);

// Residual sum of squares sum_t ||W_perp e_t||^2 per date, for conjugate
// sigma_e2 updates.  Row t of the result is ||W_perp e_t||^2.
Vec q_residual_ss(const PcPanel& panel, const Mat& yields,
                  const PricingLoadings& loadings);

// Same density as q_loglik recovered from precomputed residual sums.
double q_loglik_from_ss(double ss_total, Eigen::Index n_terms, double sigma_e2);

// PCA of the yield panel: W = top eigenvector rows of the covariance, sign
// fixed so each row's largest-magnitude entry is positive; P = y W'.
PcPanel extract_pcs(const Mat& yields, int n_factors);

// Noise-free model surface y_t = a_p + b_p P_t for each row of p.
Mat model_yields(const PricingLoadings& loadings, const Mat& p);

}  // namespace gpdtsm::termstructure
