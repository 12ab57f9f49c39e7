#pragma once

#include <vector>

#include "gpdtsm/rng.hpp"
#include "gpdtsm/types.hpp"

// Heavy-tailed independence proposal: multivariate t with moments matched to
// a Gaussian approximation of the target (optimizer curvature or weighted
// particle moments).
namespace gpdtsm::inference {

struct Proposal {
  Vec mean;
  Mat scale_chol;  // lower factor of the t scale matrix
  double dof = 5.0;

  // Scale chosen so the proposal variance equals cov (dof/(dof-2) adjusted);
  // cov is floored to positive definite first.  inflate multiplies the
  // target covariance before matching.
  static Proposal from_moments(const Vec& mean, const Mat& cov,
                               double dof = 5.0, double inflate = 1.0);

  Vec sample(RngStream& rng) const;
  double logpdf(const Vec& x) const;
  // Restriction to a coordinate block: proposes only x(idx) jointly, with
  // the block marginal of the matched moments.
  Proposal marginal(const std::vector<int>& idx) const;
};

}  // namespace gpdtsm::inference
