#include "gpdtsm/likelihood.hpp"

#include <cmath>

#include "gpdtsm/gpou.hpp"
#include "gpdtsm/linalg.hpp"
#include "gpdtsm/linearmacro.hpp"

namespace gpdtsm::inference {

namespace {

bool all_finite(const LikParts& p) {
  return std::isfinite(p.logprior) && std::isfinite(p.q_prev) &&
         std::isfinite(p.q_inc) && std::isfinite(p.p_prev) &&
         std::isfinite(p.p_inc) && std::isfinite(p.ss_prev) &&
         std::isfinite(p.ss_inc);
}

void check_window(const Model& m, const DataWindow& d) {
  if (d.pcs == nullptr || d.yields == nullptr)
    throw ValidationError("data window is missing the panel");
  if (d.t_end < 0 || d.t_end >= d.pcs->p.rows() ||
      d.t_end >= d.yields->rows())
    throw ValidationError("data window end is out of range");
  if (m.spec.form == ModelForm::gp && d.macro_kernel == nullptr)
    throw ValidationError("latent-function model needs the standardized macro");
  if (m.spec.form == ModelForm::linear && d.macro_linear == nullptr)
    throw ValidationError("linear-feedback model needs the raw macro");
}

// Per-transition Gaussian terms when the transitions are independent
// (no kernel mass): returns the term for P_t | P_{t-1} at index t.
double transition_term(const Mat& p, const gpou::PDynParams& pd,
                       const Mat* phi_pm, const Vec* macro, int t) {
  Vec mean = pd.mu_p_p + pd.phi_p_p * p.row(t - 1).transpose();
  if (phi_pm != nullptr && macro != nullptr)
    mean += phi_pm->col(0) * (*macro)(t - 1);
  return mvn_logpdf_chol(p.row(t).transpose(), mean, pd.sigma_p_chol);
}

}  // namespace

// One factorization yields both the full-window transition density and the
// density of the window without its newest date: in time-major order the
// shorter window's covariance is the leading principal block, so its terms
// drop out of the same Cholesky factor.  Values agree with the equation-major
// evaluation in gpou to floating-point roundoff.
void p_terms_time_major(const Mat& per_eq, const Vec& inputs,
                        const gpkernel::KernelHypers& kh,
                        const Mat& sigma_p_chol, double& p_prev,
                        double& p_inc) {
  const Eigen::Index t_len = per_eq.rows();
  const Eigen::Index n = per_eq.cols();
  if (inputs.size() != t_len)
    throw ValidationError("kernel inputs do not match the residual window");
  const Mat ssp = sigma_p_chol * sigma_p_chol.transpose();
  const Eigen::Index dim = n * t_len;

  Mat kp = Mat::Zero(dim, dim);
  for (Eigen::Index j = 0; j < n && j < 3; ++j) {
    if (!kh.active[static_cast<std::size_t>(j)] || kh.sigma_k(j) <= 0.0)
      continue;
    for (Eigen::Index a = 0; a < t_len; ++a)
      for (Eigen::Index b = 0; b < t_len; ++b)
        kp(a * n + j, b * n + j) +=
            gpkernel::sqexp(inputs(a), inputs(b), kh.ell_k(j), kh.sigma_k(j));
  }
  for (Eigen::Index t = 0; t < t_len; ++t)
    kp.block(t * n, t * n, n, n) += ssp;

  Eigen::LLT<Mat> llt(kp);
  if (llt.info() != Eigen::Success) {
    Mat kj = kp;
    double jitter = 1e-10;
    int tries = 0;
    for (; tries < 4; ++tries) {
      kj.diagonal().array() += jitter;
      llt.compute(kj);
      if (llt.info() == Eigen::Success) break;
      jitter *= 100.0;
    }
    if (tries == 4)
      throw NumericalError("p_terms: K_P factorization failed");
  }

  Vec s(dim);
  for (Eigen::Index t = 0; t < t_len; ++t)
    for (Eigen::Index j = 0; j < n; ++j) s(t * n + j) = per_eq(t, j);
  const Vec z = llt.matrixL().solve(s);
  const Mat& lmat = llt.matrixLLT();
  double hl_full = 0.0, hl_prev = 0.0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double lg = std::log(lmat(i, i));
    hl_full += lg;
    if (i < dim - n) hl_prev += lg;
  }
  const double full = -0.5 * static_cast<double>(dim) * kLog2Pi - hl_full -
                      0.5 * z.squaredNorm();
  p_prev = t_len > 1
               ? -0.5 * static_cast<double>(dim - n) * kLog2Pi - hl_prev -
                     0.5 * z.head(dim - n).squaredNorm()
               : 0.0;
  p_inc = full - p_prev;
}

LikParts eval_lik(const Model& m, const DataWindow& d, const Vec& x) {
  check_window(m, d);
  LikParts parts;
  try {
    const UnpackedTheta u = unpack(m, x);
    u.qp.validate();
    const auto loadings =
        termstructure::model_loadings(u.qp, m.w, m.maturities);
    const int t = d.t_end;
    const int j_minus_n = static_cast<int>(m.w_perp.rows());

    // Cross-section: squared W_perp residuals per date through t.
    const Vec ss = termstructure::q_residual_ss(
        *d.pcs, d.yields->topRows(t + 1), loadings);
    parts.ss_inc = ss(t);
    parts.ss_prev = ss.head(t).sum();
    parts.q_prev = t == 0 ? 0.0
                          : termstructure::q_loglik_from_ss(
                                parts.ss_prev, static_cast<Eigen::Index>(t) *
                                                   j_minus_n,
                                u.qp.sigma_e2);
    parts.q_inc = termstructure::q_loglik_from_ss(parts.ss_inc, j_minus_n,
                                                  u.qp.sigma_e2);

    // Transitions.
    const auto pd = gpou::build_p_dynamics(
        loadings.mu_p_q, loadings.phi_p_q, u.qp.sigma_p_chol, u.lambda12,
        &u.lambda0, u.dense_lambda1 ? &u.lambda1_full : nullptr);
    const Mat p_window = d.pcs->p.topRows(t + 1);
    if (t >= 1) {
      if (m.spec.form == ModelForm::gp && u.kh.any_active() &&
          u.kh.sigma_k.maxCoeff() > 0.0) {
        const auto s_full = gpou::residuals(p_window, pd);
        p_terms_time_major(s_full.per_eq, d.macro_kernel->head(t), u.kh,
                           u.qp.sigma_p_chol, parts.p_prev, parts.p_inc);
      } else {
        const Mat* phi_pm =
            m.spec.form == ModelForm::linear ? &u.phi_pm : nullptr;
        for (int tau = 1; tau <= t; ++tau) {
          const double term =
              transition_term(p_window, pd, phi_pm, d.macro_linear, tau);
          if (tau < t)
            parts.p_prev += term;
          else
            parts.p_inc = term;
        }
      }
    }
    parts.logprior = log_prior(m, x);
    parts.ok = all_finite(parts);
  } catch (const ValidationError&) {
    parts.ok = false;
  } catch (const NumericalError&) {
    parts.ok = false;
  }
  return parts;
}

double log_posterior(const Model& m, const DataWindow& d, const Vec& x) {
  const LikParts parts = eval_lik(m, d, x);
  return parts.target(1.0);
}

void refresh_q_terms(const Model& m, const DataWindow& d, const Vec& x,
                     LikParts& parts) {
  const double sigma_e2 = std::exp(x(m.layout().off_sigma_e2));
  const int j_minus_n = static_cast<int>(m.w_perp.rows());
  parts.q_prev =
      d.t_end == 0
          ? 0.0
          : termstructure::q_loglik_from_ss(
                parts.ss_prev,
                static_cast<Eigen::Index>(d.t_end) * j_minus_n, sigma_e2);
  parts.q_inc =
      termstructure::q_loglik_from_ss(parts.ss_inc, j_minus_n, sigma_e2);
  parts.logprior = log_prior(m, x);
  parts.ok = all_finite(parts);
}

}  // namespace gpdtsm::inference
