#pragma once

#include <array>

#include "gpdtsm/gpou.hpp"
#include "gpdtsm/termstructure.hpp"
#include "gpdtsm/types.hpp"

// Linear unspanned-macro benchmark: the PC dynamics gain a feedback term
// Phi_PM M_{t-1}, with the free entries (lambda12 plus unmasked feedback
// rows) collected in lambda_gamma through a zero/one selection matrix.
// The pricing side is shared with termstructure.
namespace gpdtsm::linearmacro {

struct LinearRestriction {
  Mat s_sel;       // N(N+R+1) x n_free selection matrix
  Vec r_vec;       // vec[mu_p_q, phi_p_q, 0]
  Vec lambda_gamma;  // free entries: lambda12 first, then feedback rows
  std::array<bool, 3> mask{};  // which feedback rows are free
  int n_factors = 3;
  int n_macros = 1;

  int n_free() const { return static_cast<int>(s_sel.cols()); }
  // beta = vec(B) with B = [mu_p_p, phi_p_p, phi_pm], column-major.
  Vec beta(const Vec& lambda_gamma_values) const;
  Vec beta() const { return beta(lambda_gamma); }
  // Split beta back into the dynamics pieces.
  void unpack_beta(const Vec& beta_vec, Vec& mu_p_p, Mat& phi_p_p,
                   Mat& phi_pm) const;
  // Recover lambda_gamma from a coefficient matrix (inverse of beta()).
  Vec lambda_from_beta(const Vec& beta_vec) const;
};

// Build the restriction for the adopted risk-price set: lambda12 free (unless
// include_lambda12 is false) plus one feedback coefficient per unmasked row.
LinearRestriction build_restriction(const std::array<bool, 3>& mask,
                                    const Vec& mu_p_q, const Mat& phi_p_q,
                                    bool include_lambda12 = true);

// Gaussian VAR log-likelihood of P_t given (1, P_{t-1}, M_{t-1}) with
// innovation factor sigma_p_chol.  macros row t aligns with P row t (the
// regression uses macros[t-1] for P_t).
double linear_p_loglik(const Mat& p, const Vec& macros, const Vec& mu_p_p,
                       const Mat& phi_p_p, const Mat& phi_pm,
                       const Mat& sigma_p_chol);

// Spec-level wrapper: derives the rotated dynamics from the Q side, applies
// the restriction, and evaluates the likelihood on the panel.
double linear_p_loglik(const termstructure::PcPanel& panel, const Vec& macros,
                       const termstructure::QParams& qp,
                       const Vec& lambda_gamma,
                       const std::array<bool, 3>& mask, const Vec& maturities);

}  // namespace gpdtsm::linearmacro
