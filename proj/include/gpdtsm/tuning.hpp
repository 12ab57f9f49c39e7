#pragma once

#include "gpdtsm/likelihood.hpp"
#include "gpdtsm/mle.hpp"
#include "gpdtsm/theta.hpp"

// Empirical-Bayes calibration of the kernel signal scales on the training
// window: (1) posterior mode of the no-macro model, (2) per-equation
// dispersion of its transition residuals, (3) joint fit of the length-scales
// and one common multiplier c, with sigma_k = c * residual dispersion.
// The scales are frozen afterwards; only the length-scales stay free.
namespace gpdtsm::tuning {

struct TuneResult {
  Vec sigma_k;      // 3, zero on inactive blocks
  double c_hat = 0.0;
  Vec ell_hat;      // 3, one on inactive blocks
  Vec resid_sd;     // per-equation dispersion of step-1 residuals
  Vec theta_base;   // step-1 posterior mode (no-macro layout)
  double logpost_base = 0.0;
  double p_loglik_at_opt = 0.0;
};

TuneResult tune_sigma_k(const inference::Model& gp_model,
                        const inference::DataWindow& train,
                        const mle::MleOptions& opt = {}, int nm_iter = 600);

}  // namespace gpdtsm::tuning
