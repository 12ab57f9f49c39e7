#pragma once

#include <limits>

#include "gpdtsm/theta.hpp"
#include "gpdtsm/types.hpp"

// Incremental posterior evaluation used by the samplers.  Every evaluation at
// data index t splits the log posterior into the pieces the adaptive
// tempering and the conjugate measurement-variance update need:
//   target(phi) = logprior + [terms through t-1] + phi * [increment at t].
namespace gpdtsm::inference {

// Non-owning view of the data available at index t_end (inclusive).
struct DataWindow {
  const termstructure::PcPanel* pcs = nullptr;
  const Mat* yields = nullptr;        // (rows >= t_end+1) x J, monthly decimal
  const Vec* macro_kernel = nullptr;  // standardized, for the GP inputs
  const Vec* macro_linear = nullptr;  // raw, for the linear feedback
  int t_end = 0;

  int n_obs() const { return t_end + 1; }
};

struct LikParts {
  double logprior = 0.0;
  double q_prev = 0.0, q_inc = 0.0;  // cross-section (measurement) terms
  double ss_prev = 0.0, ss_inc = 0.0;  // squared measurement residuals
  double p_prev = 0.0, p_inc = 0.0;  // PC transition terms
  bool ok = false;

  double log_u() const { return q_inc + p_inc; }
  double loglik() const { return q_prev + q_inc + p_prev + p_inc; }
  double target(double phi) const {
    if (!ok) return -std::numeric_limits<double>::infinity();
    return logprior + q_prev + p_prev + phi * (q_inc + p_inc);
  }
};

// Evaluates all pieces at d.t_end.  Parameter points outside the numerically
// representable region come back with ok = false (a -inf target) instead of
// throwing, so rogue particles just receive zero weight.
LikParts eval_lik(const Model& m, const DataWindow& d, const Vec& x);

// Full-window log posterior (prior + likelihood through t_end); -inf when
// the point is invalid.  This is the optimizer objective.
double log_posterior(const Model& m, const DataWindow& d, const Vec& x);

// Recomputes only the sigma_e2-dependent cross-section terms of `parts`
// after a conjugate update changed x(off_sigma_e2).
void refresh_q_terms(const Model& m, const DataWindow& d, const Vec& x,
                     LikParts& parts);

// Transition terms from a single time-major factorization: p_prev covers the
// window without its newest date, p_inc the increment.  Matches the
// equation-major marginal likelihood in gpou up to roundoff.
void p_terms_time_major(const Mat& per_eq_resid, const Vec& kernel_inputs,
                        const gpkernel::KernelHypers& kh,
                        const Mat& sigma_p_chol, double& p_prev,
                        double& p_inc);

}  // namespace gpdtsm::inference
