#include "gpdtsm/proposals.hpp"

#include <cmath>

#include "gpdtsm/linalg.hpp"

namespace gpdtsm::inference {

Proposal Proposal::from_moments(const Vec& mean, const Mat& cov, double dof,
                                double inflate) {
  if (!(dof > 2.0))
    throw ValidationError("t proposal needs dof > 2 to match moments");
  if (cov.rows() != mean.size() || cov.cols() != mean.size())
    throw ValidationError("proposal moment dimensions disagree");
  Proposal p;
  p.mean = mean;
  p.dof = dof;
  const Mat scale = make_pd(cov) * (inflate * (dof - 2.0) / dof);
  p.scale_chol = chol_with_retry(scale, "t proposal scale").matrixL();
  return p;
}

Vec Proposal::sample(RngStream& rng) const {
  const Eigen::Index d = mean.size();
  Vec z(d);
  for (Eigen::Index i = 0; i < d; ++i) z(i) = rng.normal();
  const double u = rng.chisq(dof);
  return mean + scale_chol * z * std::sqrt(dof / u);
}

double Proposal::logpdf(const Vec& x) const {
  const Eigen::Index d = mean.size();
  const Vec z = scale_chol.triangularView<Eigen::Lower>().solve(x - mean);
  const double quad = z.squaredNorm();
  double logdet_half = 0.0;
  for (Eigen::Index i = 0; i < d; ++i)
    logdet_half += std::log(scale_chol(i, i));
  return std::lgamma(0.5 * (dof + d)) - std::lgamma(0.5 * dof) -
         0.5 * d * std::log(dof * kPi) - logdet_half -
         0.5 * (dof + d) * std::log1p(quad / dof);
}

Proposal Proposal::marginal(const std::vector<int>& idx) const {
  const Mat full = scale_chol * scale_chol.transpose();
  const Eigen::Index d = static_cast<Eigen::Index>(idx.size());
  Vec mu(d);
  Mat block(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    mu(i) = mean(idx[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < d; ++j)
      block(i, j) = full(idx[static_cast<std::size_t>(i)],
                         idx[static_cast<std::size_t>(j)]);
  }
  Proposal p;
  p.mean = mu;
  p.dof = dof;
  p.scale_chol = chol_with_retry(block, "t proposal block scale").matrixL();
  return p;
}

}  // namespace gpdtsm::inference
