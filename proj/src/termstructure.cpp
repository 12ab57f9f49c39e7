#include "gpdtsm/termstructure.hpp"

#include <algorithm>
#include <cmath>

#include "gpdtsm/linalg.hpp"

namespace gpdtsm::termstructure {

namespace {

void validate_maturities(const Vec& maturities) {
  if (maturities.size() == 0)
    throw ValidationError("maturities: empty list");
  for (Eigen::Index j = 0; j < maturities.size(); ++j) {
    const double m = maturities[j];
    if (!(m >= 1.0) || m != std::floor(m))
      throw ValidationError("maturities: entries must be whole months >= 1, got " +
                            std::to_string(m));
    if (j > 0 && maturities[j] <= maturities[j - 1])
      throw ValidationError("maturities: must be strictly ascending");
  }
}

}  // namespace

void QParams::validate() const {
  const int n = n_factors();
  if (n < 1) throw ValidationError("QParams: empty g_q");
  for (int i = 1; i < n; ++i)
    if (!(g_q[i] < g_q[i - 1]))
      throw ValidationError(
          "QParams: g_q must be strictly decreasing (identification)");
  if (sigma_p_chol.rows() != n || sigma_p_chol.cols() != n)
    throw ValidationError("QParams: sigma_p_chol must be N x N");
  for (int i = 0; i < n; ++i)
    if (!(sigma_p_chol(i, i) > 0.0))
      throw ValidationError("QParams: sigma_p_chol diagonal must be positive");
  if (!(sigma_e2 > 0.0)) throw ValidationError("QParams: sigma_e2 must be > 0");
}

Eigen::Index PricingLoadings::find_maturity(double months) const {
  for (Eigen::Index j = 0; j < maturities.size(); ++j)
    if (maturities[j] == months) return j;
  return -1;
}

LatentLoadings compute_latent_loadings(const QParams& qp, const Vec& maturities,
                                       const Mat& sigma_latent) {
  qp.validate();
  validate_maturities(maturities);
  const int n_fac = qp.n_factors();
  const int j_count = static_cast<int>(maturities.size());
  const int n_max = static_cast<int>(maturities[maturities.size() - 1]);

  // Short rate r = delta0 + delta1' X with the canonical normalization.
  const double delta0 = 0.0;
  const Vec delta1 = Vec::Ones(n_fac);
  const Vec mu_q = (Vec(n_fac) << qp.k_inf_q, Vec::Zero(n_fac - 1)).finished();
  const Mat ssp = sigma_latent * sigma_latent.transpose();

  LatentLoadings out;
  out.maturities = maturities;
  out.a_x.resize(j_count);
  out.b_x.resize(j_count, n_fac);

  // Log-price recursion: a_1 = -delta0, b_1 = -delta1,
  //   a_{n+1} = a_n + b_n' mu_q + (1/2) b_n' Sigma Sigma' b_n - delta0
  //   b_{n+1} = diag(g_q) b_n - delta1.
  double a_n = -delta0;
  Vec b_n = -delta1;
  int next_out = 0;
  for (int n = 1; n <= n_max; ++n) {
    if (next_out < j_count && maturities[next_out] == n) {
      out.a_x[next_out] = -a_n / n;
      out.b_x.row(next_out) = -b_n.transpose() / n;
      ++next_out;
    }
    const double a_next =
        a_n + b_n.dot(mu_q) + 0.5 * b_n.dot(ssp * b_n) - delta0;
    b_n = qp.g_q.asDiagonal() * b_n - delta1;
    a_n = a_next;
  }
  return out;
}

LatentLoadings compute_latent_loadings(const QParams& qp,
                                       const Vec& maturities) {
  return compute_latent_loadings(qp, maturities, qp.sigma_p_chol);
}

PricingLoadings rotate_loadings(const LatentLoadings& latent, const Mat& w,
                                const QParams* qp) {
  const int n_fac = static_cast<int>(latent.b_x.cols());
  if (w.rows() != n_fac || w.cols() != latent.b_x.rows())
    throw ValidationError("rotate_loadings: W must be N x J");

  const Mat wb = w * latent.b_x;
  Eigen::JacobiSVD<Mat> svd(wb, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  if (!(smin > 0.0) || smax / smin > 1e12)
    throw ValidationError("rotate_loadings: knife-edge rotation, cond(W B_X) = " +
                          std::to_string(smin > 0 ? smax / smin : INFINITY));
  const Mat wb_inv = wb.partialPivLu().inverse();

  PricingLoadings out;
  out.maturities = latent.maturities;
  out.a_x = latent.a_x;
  out.b_x = latent.b_x;
  const Vec wa = w * latent.a_x;
  out.b_p = latent.b_x * wb_inv;
  out.a_p = latent.a_x - out.b_p * wa;

  const Vec delta1 = Vec::Ones(n_fac);
  out.delta0_p = 0.0 - delta1.dot(wb_inv * wa);
  out.delta1_p = wb_inv.transpose() * delta1;

  if (qp != nullptr) {
    const Vec mu_q =
        (Vec(n_fac) << qp->k_inf_q, Vec::Zero(n_fac - 1)).finished();
    out.phi_p_q = wb * qp->g_q.asDiagonal() * wb_inv;
    out.mu_p_q =
        wb * mu_q + (Mat::Identity(n_fac, n_fac) - out.phi_p_q) * wa;
  }
  return out;
}

PricingLoadings model_loadings(const QParams& qp, const Mat& w,
                               const Vec& maturities) {
  // B_X depends only on g_q, so the latent innovation factor implied by
  // sigma_p_chol is available before the intercept recursion runs.
  QParams probe = qp;
  probe.k_inf_q = 0.0;
  probe.sigma_p_chol = Mat::Identity(qp.n_factors(), qp.n_factors());
  const LatentLoadings shape = compute_latent_loadings(probe, maturities);

  const Mat wb = w * shape.b_x;
  Eigen::PartialPivLU<Mat> lu(wb);
  if (std::abs(lu.determinant()) < 1e-300)
    throw ValidationError("model_loadings: knife-edge rotation (W B_X singular)");
  const Mat sigma_latent = lu.solve(qp.sigma_p_chol);

  return rotate_loadings(compute_latent_loadings(qp, maturities, sigma_latent),
                         w, &qp);
}

PricingLoadings model_loadings(const QParams& qp, const Mat& w,
                               const Vec& panel_maturities,
                               const Vec& eval_maturities) {
  validate_maturities(panel_maturities);
  validate_maturities(eval_maturities);
  // Merged grid so one recursion serves both the rotation and the output.
  std::vector<double> merged;
  merged.reserve(
      static_cast<std::size_t>(panel_maturities.size() + eval_maturities.size()));
  {
    Eigen::Index a = 0, b = 0;
    while (a < panel_maturities.size() || b < eval_maturities.size()) {
      double next;
      if (a == panel_maturities.size())
        next = eval_maturities[b];
      else if (b == eval_maturities.size())
        next = panel_maturities[a];
      else
        next = std::min(panel_maturities[a], eval_maturities[b]);
      if (a < panel_maturities.size() && panel_maturities[a] == next) ++a;
      if (b < eval_maturities.size() && eval_maturities[b] == next) ++b;
      merged.push_back(next);
    }
  }
  Vec grid = Eigen::Map<const Vec>(merged.data(),
                                   static_cast<Eigen::Index>(merged.size()));

  QParams probe = qp;
  probe.k_inf_q = 0.0;
  probe.sigma_p_chol = Mat::Identity(qp.n_factors(), qp.n_factors());
  const LatentLoadings shape = compute_latent_loadings(probe, grid);

  const int n_fac = qp.n_factors();
  Mat b_panel(panel_maturities.size(), n_fac);
  {
    Eigen::Index a = 0;
    for (Eigen::Index g = 0; g < grid.size() && a < panel_maturities.size(); ++g)
      if (grid[g] == panel_maturities[a]) b_panel.row(a++) = shape.b_x.row(g);
  }
  const Mat wb = w * b_panel;
  Eigen::PartialPivLU<Mat> lu(wb);
  if (std::abs(lu.determinant()) < 1e-300)
    throw ValidationError("model_loadings: knife-edge rotation (W B_X singular)");
  const Mat sigma_latent = lu.solve(qp.sigma_p_chol);

  const LatentLoadings full = compute_latent_loadings(qp, grid, sigma_latent);
  Vec a_panel(panel_maturities.size());
  Mat b_panel2(panel_maturities.size(), n_fac);
  PricingLoadings out;
  out.maturities = eval_maturities;
  out.a_x.resize(eval_maturities.size());
  out.b_x.resize(eval_maturities.size(), n_fac);
  {
    Eigen::Index a = 0, b = 0;
    for (Eigen::Index g = 0; g < grid.size(); ++g) {
      if (a < panel_maturities.size() && grid[g] == panel_maturities[a]) {
        a_panel[a] = full.a_x[g];
        b_panel2.row(a) = full.b_x.row(g);
        ++a;
      }
      if (b < eval_maturities.size() && grid[g] == eval_maturities[b]) {
        out.a_x[b] = full.a_x[g];
        out.b_x.row(b) = full.b_x.row(g);
        ++b;
      }
    }
  }
  const Mat wb2 = w * b_panel2;
  const Mat wb_inv = wb2.partialPivLu().inverse();
  const Vec wa = w * a_panel;
  out.b_p = out.b_x * wb_inv;
  out.a_p = out.a_x - out.b_p * wa;
  const Vec delta1 = Vec::Ones(n_fac);
  out.delta0_p = -delta1.dot(wb_inv * wa);
  out.delta1_p = wb_inv.transpose() * delta1;
  const Vec mu_q = (Vec(n_fac) << qp.k_inf_q, Vec::Zero(n_fac - 1)).finished();
  out.phi_p_q = wb2 * qp.g_q.asDiagonal() * wb_inv;
  out.mu_p_q = wb2 * mu_q + (Mat::Identity(n_fac, n_fac) - out.phi_p_q) * wa;
  return out;
}

Vec q_residual_ss(const PcPanel& panel, const Mat& yields,
                  const PricingLoadings& loadings) {
  const Eigen::Index t_count = yields.rows();
  if (panel.p.rows() < t_count)
    throw ValidationError("q_residual_ss: panel has fewer dates than yields");
  // W_perp e_t with e_t = y_t - a_p - b_p P_t; the W-directions of e_t vanish
  // identically because P_t = W y_t, so this captures the whole residual.
  const Vec za = panel.w_perp * loadings.a_p;
  const Mat zb = panel.w_perp * loadings.b_p;
  Vec ss(t_count);
  for (Eigen::Index t = 0; t < t_count; ++t) {
    const Vec z = panel.w_perp * yields.row(t).transpose() - za -
                  zb * panel.p.row(t).transpose();
    ss[t] = z.squaredNorm();
  }
  return ss;
}

double q_loglik_from_ss(double ss_total, Eigen::Index n_terms,
                        double sigma_e2) {
  if (!(sigma_e2 > 0.0)) throw ValidationError("q_loglik: sigma_e2 must be > 0");
  return -0.5 * static_cast<double>(n_terms) *
             (kLog2Pi + std::log(sigma_e2)) -
         0.5 * ss_total / sigma_e2;
}

double q_loglik(const PcPanel& panel, const Mat& yields,
                const PricingLoadings& loadings, double sigma_e2) {
  const Vec ss = q_residual_ss(panel, yields, loadings);
  const Eigen::Index dim_err = panel.w_perp.rows();
  return q_loglik_from_ss(ss.sum(), yields.rows() * dim_err, sigma_e2);
}

PcPanel extract_pcs(const Mat& yields, int n_factors) {
  const Eigen::Index t_count = yields.rows();
  const Eigen::Index j_count = yields.cols();
  if (n_factors < 1 || n_factors > j_count)
    throw ValidationError("extract_pcs: need 1 <= N <= J");
  if (t_count <= j_count)
    throw ValidationError("extract_pcs: need more dates than maturities");
  if (!yields.allFinite())
    throw ValidationError("extract_pcs: non-finite yield entries");

  const Mat centered = yields.rowwise() - yields.colwise().mean();
  const Mat cov = centered.transpose() * centered /
                  static_cast<double>(t_count - 1);
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  if (es.info() != Eigen::Success)
    throw NumericalError("extract_pcs: eigendecomposition failed");
  if (!(es.eigenvalues().maxCoeff() > 0.0))
    throw ValidationError("extract_pcs: degenerate panel (no yield variation)");

  // Eigenvalues ascend; take rows in descending order of explained variance.
  PcPanel panel;
  panel.w.resize(n_factors, j_count);
  panel.w_perp.resize(j_count - n_factors, j_count);
  for (Eigen::Index k = 0; k < j_count; ++k) {
    Vec v = es.eigenvectors().col(j_count - 1 - k);
    Eigen::Index imax;
    v.cwiseAbs().maxCoeff(&imax);
    if (v[imax] < 0.0) v = -v;
    if (k < n_factors)
      panel.w.row(k) = v.transpose();
    else
      panel.w_perp.row(k - n_factors) = v.transpose();
  }
  panel.p = yields * panel.w.transpose();
  return panel;
}

Mat model_yields(const PricingLoadings& loadings, const Mat& p) {
  Mat y(p.rows(), loadings.a_p.size());
  for (Eigen::Index t = 0; t < p.rows(); ++t)
    y.row(t) = loadings.a_p.transpose() +
               p.row(t) * loadings.b_p.transpose();
  return y;
}

}  // namespace gpdtsm::termstructure
