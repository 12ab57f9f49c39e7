#pragma once

#include "gpdtsm/likelihood.hpp"
#include "gpdtsm/proposals.hpp"
#include "gpdtsm/theta.hpp"

// The rejuvenation kernel: a conjugate draw of the measurement variance
// followed by one heavy-tailed independence Metropolis update per parameter
// block.  Each sweep leaves the phi-tempered posterior at the window end
// invariant.
namespace gpdtsm::inference {

struct BlockProposals {
  Proposal q;     // long-run constant and eigenvalue coordinates
  Proposal chol;  // innovation factor coordinates
  Proposal rest;  // kernel, risk-price and feedback coordinates
  bool has_rest = false;

  // Block marginals of a joint moment approximation (optimizer curvature or
  // weighted particle moments).
  static BlockProposals from_joint(const ModelSpec& spec, const Vec& mean,
                                   const Mat& cov, double dof = 5.0,
                                   double inflate = 1.0);
};

struct McmcStats {
  long acc_q = 0, acc_chol = 0, acc_rest = 0;
  long try_q = 0, try_chol = 0, try_rest = 0;

  double rate() const {
    const long tries = try_q + try_chol + try_rest;
    return tries == 0 ? 0.0
                      : static_cast<double>(acc_q + acc_chol + acc_rest) /
                            static_cast<double>(tries);
  }
};

// One sweep at inverse temperature phi on the window ending at d.t_end.
// x and parts are updated in place; parts stays consistent with x.
void mcmc_step(const Model& m, const DataWindow& d, double phi,
               const BlockProposals& props, Vec& x, LikParts& parts,
               RngStream& rng, McmcStats* stats = nullptr);

// The conjugate measurement-variance draw alone (exposed for exactness
// tests): replaces x(off_sigma_e2) and refreshes the affected terms.
void gibbs_sigma_e2(const Model& m, const DataWindow& d, double phi, Vec& x,
                    LikParts& parts, RngStream& rng);

}  // namespace gpdtsm::inference
