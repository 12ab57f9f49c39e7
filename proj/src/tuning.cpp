#include "gpdtsm/tuning.hpp"

#include <cmath>

#include "gpdtsm/gpou.hpp"

namespace gpdtsm::tuning {

TuneResult tune_sigma_k(const inference::Model& gp_model,
                        const inference::DataWindow& train,
                        const mle::MleOptions& opt, int nm_iter) {
  if (gp_model.spec.form != inference::ModelForm::gp)
    throw ValidationError("tune_sigma_k: model has no kernel blocks");
  if (train.macro_kernel == nullptr)
    throw ValidationError("tune_sigma_k: missing standardized macro");
  const int t_end = train.t_end;
  if (t_end < 8) throw ValidationError("tune_sigma_k: window too short");

  // Step 1: posterior mode with the kernel switched off.
  inference::Model base = gp_model;
  base.spec.form = inference::ModelForm::yields_only;
  base.spec.mask = {false, false, false};
  base.sigma_k.setZero();
  const Vec x0 = mle::initial_guess(base, train);
  const mle::MleResult fit = mle::maximize_posterior(base, train, x0, opt);

  TuneResult out;
  out.theta_base = fit.x;
  out.logpost_base = fit.logpost;

  // Step 2: dispersion of the fitted transition residuals.
  const auto u = inference::unpack(base, fit.x);
  const auto loadings =
      termstructure::model_loadings(u.qp, base.w, base.maturities);
  const auto pd = gpou::build_p_dynamics(
      loadings.mu_p_q, loadings.phi_p_q, u.qp.sigma_p_chol, u.lambda12,
      &u.lambda0, u.dense_lambda1 ? &u.lambda1_full : nullptr);
  const Mat p_window = train.pcs->p.topRows(t_end + 1);
  const auto resid = gpou::residuals(p_window, pd);
  const int n = static_cast<int>(resid.per_eq.cols());
  const int t_len = static_cast<int>(resid.per_eq.rows());
  out.resid_sd = Vec(n);
  for (int j = 0; j < n; ++j) {
    const double mu = resid.per_eq.col(j).mean();
    out.resid_sd(j) = std::sqrt(
        (resid.per_eq.col(j).array() - mu).square().sum() / (t_len - 1));
  }

  // Step 3: maximize the transition likelihood over the active
  // length-scales and the common multiplier (z = log coordinates).
  const auto& mask = gp_model.spec.mask;
  std::vector<int> active;
  for (int j = 0; j < 3 && j < n; ++j)
    if (mask[static_cast<std::size_t>(j)]) active.push_back(j);
  if (active.empty())
    throw ValidationError("tune_sigma_k: no active kernel blocks");

  const Vec inputs = train.macro_kernel->head(t_len);
  auto hypers_at = [&](const Vec& z) {
    gpkernel::KernelHypers kh;
    const double c = std::exp(z(z.size() - 1));
    for (std::size_t a = 0; a < active.size(); ++a) {
      const int j = active[a];
      kh.active[static_cast<std::size_t>(j)] = true;
      kh.ell_k(j) = std::exp(z(static_cast<Eigen::Index>(a)));
      kh.sigma_k(j) = c * out.resid_sd(j);
    }
    return kh;
  };
  auto neg_pll = [&](const Vec& z) {
    const auto cov = gpkernel::build_block_K(inputs, hypers_at(z));
    return -gpou::p_loglik(resid, cov, u.qp.sigma_p_chol);
  };

  Vec z0 = Vec::Zero(static_cast<Eigen::Index>(active.size()) + 1);
  z0(z0.size() - 1) = std::log(0.7);
  const Vec step = Vec::Constant(z0.size(), 0.7);
  double f_best = 0.0;
  const Vec z_hat = mle::nelder_mead(neg_pll, z0, step, nm_iter, 1e-7, &f_best);

  out.c_hat = std::exp(z_hat(z_hat.size() - 1));
  out.ell_hat = Vec::Ones(3);
  out.sigma_k = Vec::Zero(3);
  for (std::size_t a = 0; a < active.size(); ++a) {
    const int j = active[a];
    out.ell_hat(j) = std::exp(z_hat(static_cast<Eigen::Index>(a)));
    out.sigma_k(j) = out.c_hat * out.resid_sd(j);
  }
  out.p_loglik_at_opt = -f_best;
  return out;
}

}  // namespace gpdtsm::tuning
