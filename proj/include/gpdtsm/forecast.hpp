#pragma once

#include "gpdtsm/ibis.hpp"
#include "gpdtsm/likelihood.hpp"
#include "gpdtsm/theta.hpp"

// One-step-ahead prediction: per particle, rebuild the loadings, draw the
// next-period PCs from the conditional predictive, and map the draw to a
// holding-period excess return per maturity.  Yields are monthly decimals
// and maturities months throughout.
namespace gpdtsm::forecast {

struct PredictiveDraws {
  Vec weights;        // normalized particle weights, length N
  Mat pc_draws;       // N x n_factors
  Mat rx_draws;       // N x n_maturities
  Vec point_rx;       // weighted mean per maturity
  Vec rx_maturities;  // months
  Vec gp_shift_mean;  // weighted mean latent-function shift of the PC mean
};

// rx over one month: hold an n-month bond for a month against the 1-month
// yield; continuously compounded decimal.  All three legs (n and 1 at t,
// n-1 at t+1) must exist in the grid.
double observed_excess_return(const Vec& yields_t, const Vec& yields_t1,
                              const Vec& grid_months, double n_months);

// Draws at d.t_end for each maturity in rx_maturities.  Particle streams
// advance (one PC draw each).  Every leg comes from the particle's own model
// surface, so panel gaps never block the prediction; only the observed-return
// calculation needs a fill policy.
PredictiveDraws predict_excess_returns(inference::ParticleSystem& ps,
                                       const inference::Model& m,
                                       const inference::DataWindow& d,
                                       const Vec& rx_maturities);

// Model-implied yield at an arbitrary maturity from weighted particle-mean
// loadings; used to fill observed-return legs when explicitly enabled.
double particle_mean_yield(const inference::ParticleSystem& ps,
                           const inference::Model& m, const Vec& pcs_at_date,
                           double maturity_months);

}  // namespace gpdtsm::forecast
