#include "gpdtsm/mcmc.hpp"

#include <cmath>

namespace gpdtsm::inference {

BlockProposals BlockProposals::from_joint(const ModelSpec& spec,
                                          const Vec& mean, const Mat& cov,
                                          double dof, double inflate) {
  const McmcBlocks blocks = mcmc_blocks(spec);
  const Proposal joint = Proposal::from_moments(mean, cov, dof, inflate);
  BlockProposals out;
  out.q = joint.marginal(blocks.q);
  out.chol = joint.marginal(blocks.chol);
  out.has_rest = !blocks.rest.empty();
  if (out.has_rest) out.rest = joint.marginal(blocks.rest);
  return out;
}

void gibbs_sigma_e2(const Model& m, const DataWindow& d, double phi, Vec& x,
                    LikParts& parts, RngStream& rng) {
  const int per_date = m.gibbs_resid_dof_jr
                           ? static_cast<int>(m.w.cols()) - 1
                           : static_cast<int>(m.w_perp.rows());
  const double alpha_post =
      m.priors.sigma_e2_alpha +
      static_cast<double>(per_date) * (static_cast<double>(d.t_end) + phi);
  const double beta_post = std::max(
      m.priors.sigma_e2_beta + parts.ss_prev + phi * parts.ss_inc, 1e-12);
  if (!(alpha_post > 0.0))
    throw ValidationError("sigma_e2 draw needs a positive shape; supply a "
                          "proper prior for empty windows");
  // sigma_e2 ~ InvGamma(alpha_post/2, beta_post/2)
  const double g = rng.gamma(0.5 * alpha_post, 1.0);
  x(m.layout().off_sigma_e2) = std::log(0.5 * beta_post) - std::log(g);
  refresh_q_terms(m, d, x, parts);
}

namespace {

void mh_block(const Model& m, const DataWindow& d, double phi,
              const Proposal& prop, const std::vector<int>& idx, Vec& x,
              LikParts& parts, RngStream& rng, long& tries, long& accepts) {
  ++tries;
  const Eigen::Index nb = static_cast<Eigen::Index>(idx.size());
  Vec old_block(nb);
  for (Eigen::Index i = 0; i < nb; ++i)
    old_block(i) = x(idx[static_cast<std::size_t>(i)]);
  const Vec new_block = prop.sample(rng);

  Vec x_new = x;
  for (Eigen::Index i = 0; i < nb; ++i)
    x_new(idx[static_cast<std::size_t>(i)]) = new_block(i);
  const LikParts parts_new = eval_lik(m, d, x_new);

  const double log_ratio = parts_new.target(phi) - parts.target(phi) +
                           prop.logpdf(old_block) - prop.logpdf(new_block);
  if (std::log(rng.uniform()) < log_ratio) {
    x = x_new;
    parts = parts_new;
    ++accepts;
  }
}

}  // namespace

void mcmc_step(const Model& m, const DataWindow& d, double phi,
               const BlockProposals& props, Vec& x, LikParts& parts,
               RngStream& rng, McmcStats* stats) {
  const McmcBlocks blocks = mcmc_blocks(m.spec);
  McmcStats local;
  gibbs_sigma_e2(m, d, phi, x, parts, rng);
  mh_block(m, d, phi, props.chol, blocks.chol, x, parts, rng, local.try_chol,
           local.acc_chol);
  mh_block(m, d, phi, props.q, blocks.q, x, parts, rng, local.try_q,
           local.acc_q);
  if (props.has_rest)
    mh_block(m, d, phi, props.rest, blocks.rest, x, parts, rng,
             local.try_rest, local.acc_rest);
  if (stats != nullptr) {
    stats->acc_q += local.acc_q;
    stats->acc_chol += local.acc_chol;
    stats->acc_rest += local.acc_rest;
    stats->try_q += local.try_q;
    stats->try_chol += local.try_chol;
    stats->try_rest += local.try_rest;
  }
}

}  // namespace gpdtsm::inference
