#include "gpdtsm/linearmacro.hpp"

#include "gpdtsm/linalg.hpp"

namespace gpdtsm::linearmacro {

namespace {

// vec index of entry (row, col) in the N x (N+R+1) coefficient matrix
// B = [mu, phi, phi_pm], column-major.
int vec_index(int row, int col, int n) { return col * n + row; }

}  // namespace

Vec LinearRestriction::beta(const Vec& lambda_gamma_values) const {
  if (lambda_gamma_values.size() != s_sel.cols())
    throw ValidationError("lambda_gamma size does not match restriction");
  return s_sel * lambda_gamma_values + r_vec;
}

void LinearRestriction::unpack_beta(const Vec& beta_vec, Vec& mu_p_p,
                                    Mat& phi_p_p, Mat& phi_pm) const {
  const int n = n_factors, r = n_macros;
  if (beta_vec.size() != n * (n + r + 1))
    throw ValidationError("beta size does not match restriction");
  mu_p_p = beta_vec.head(n);
  phi_p_p = Mat(n, n);
  for (int c = 0; c < n; ++c) phi_p_p.col(c) = beta_vec.segment((1 + c) * n, n);
  phi_pm = Mat(n, r);
  for (int c = 0; c < r; ++c)
    phi_pm.col(c) = beta_vec.segment((1 + n + c) * n, n);
}

Vec LinearRestriction::lambda_from_beta(const Vec& beta_vec) const {
  // s_sel has orthonormal unit columns, so the projection is a transpose.
  return s_sel.transpose() * (beta_vec - r_vec);
}

LinearRestriction build_restriction(const std::array<bool, 3>& mask,
                                    const Vec& mu_p_q, const Mat& phi_p_q,
                                    bool include_lambda12) {
  const int n = static_cast<int>(mu_p_q.size());
  if (phi_p_q.rows() != n || phi_p_q.cols() != n)
    throw ValidationError("mu_p_q / phi_p_q dimension mismatch");
  if (n < 2 && include_lambda12)
    throw ValidationError("lambda12 requires at least two factors");
  const int r = 1;
  int n_free = include_lambda12 ? 1 : 0;
  for (bool m : mask) n_free += m ? r : 0;
  if (n_free == 0)
    throw ValidationError(
        "degenerate restriction: no free risk-price or feedback entries");

  LinearRestriction lr;
  lr.n_factors = n;
  lr.n_macros = r;
  lr.mask = mask;
  const int dim = n * (n + r + 1);
  lr.s_sel = Mat::Zero(dim, n_free);
  lr.r_vec = Vec::Zero(dim);
  lr.lambda_gamma = Vec::Zero(n_free);

  lr.r_vec.head(n) = mu_p_q;
  for (int c = 0; c < n; ++c)
    lr.r_vec.segment((1 + c) * n, n) = phi_p_q.col(c);

  int col = 0;
  if (include_lambda12) lr.s_sel(vec_index(0, 2, n), col++) = 1.0;
  for (int row = 0; row < n && row < 3; ++row)
    if (mask[static_cast<std::size_t>(row)])
      lr.s_sel(vec_index(row, n + 1, n), col++) = 1.0;
  return lr;
}

double linear_p_loglik(const Mat& p, const Vec& macros, const Vec& mu_p_p,
                       const Mat& phi_p_p, const Mat& phi_pm,
                       const Mat& sigma_p_chol) {
  const int n = static_cast<int>(p.cols());
  const int t_len = static_cast<int>(p.rows()) - 1;
  if (t_len < 1) throw ValidationError("need at least two PC observations");
  if (macros.size() < p.rows())
    throw ValidationError("macro series shorter than PC panel");
  double ll = 0.0;
  Vec resid(n);
  for (int t = 1; t <= t_len; ++t) {
    resid = p.row(t).transpose() - mu_p_p - phi_p_p * p.row(t - 1).transpose() -
            phi_pm * Vec::Constant(1, macros(t - 1));
    ll += mvn_logpdf_chol(resid, Vec::Zero(n), sigma_p_chol);
  }
  return ll;
}

double linear_p_loglik(const termstructure::PcPanel& panel, const Vec& macros,
                       const termstructure::QParams& qp,
                       const Vec& lambda_gamma,
                       const std::array<bool, 3>& mask, const Vec& maturities) {
  const auto loadings = termstructure::model_loadings(qp, panel.w, maturities);
  auto lr = build_restriction(mask, loadings.mu_p_q, loadings.phi_p_q);
  Vec mu;
  Mat phi, phi_pm;
  lr.unpack_beta(lr.beta(lambda_gamma), mu, phi, phi_pm);
  return linear_p_loglik(panel.p, macros, mu, phi, phi_pm, qp.sigma_p_chol);
}

}  // namespace gpdtsm::linearmacro
