#include "gpdtsm/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gpdtsm/gpou.hpp"
#include "gpdtsm/parallel.hpp"

namespace gpdtsm::forecast {

namespace {

Eigen::Index grid_index(const Vec& grid, double months) {
  for (Eigen::Index j = 0; j < grid.size(); ++j)
    if (grid[j] == months) return j;
  return -1;
}

double leg_or_throw(const Vec& yields, const Vec& grid, double months,
                    const char* role) {
  const Eigen::Index j = grid_index(grid, months);
  if (j < 0)
    throw ValidationError(
        "excess return needs the " + std::to_string(months) +
        "-month yield (" + role +
        " leg) which the panel lacks; supply an interpolated panel or "
        "enable the model fill");
  return yields[j];
}

}  // namespace

double observed_excess_return(const Vec& yields_t, const Vec& yields_t1,
                              const Vec& grid_months, double n_months) {
  if (yields_t.size() != grid_months.size() ||
      yields_t1.size() != grid_months.size())
    throw ValidationError("observed_excess_return: yields/grid size mismatch");
  if (!(n_months >= 1.0))
    throw ValidationError("observed_excess_return: maturity below one month");
  if (n_months == 1.0) return 0.0;  // the bond matures into the funding leg
  const double y_n = leg_or_throw(yields_t, grid_months, n_months, "held");
  const double y_1 = leg_or_throw(yields_t, grid_months, 1.0, "funding");
  const double y_next =
      leg_or_throw(yields_t1, grid_months, n_months - 1.0, "sold");
  return -(n_months - 1.0) * y_next + n_months * y_n - y_1;
}

PredictiveDraws predict_excess_returns(inference::ParticleSystem& ps,
                                       const inference::Model& m,
                                       const inference::DataWindow& d,
                                       const Vec& rx_maturities) {
  const int n_part = ps.n_particles();
  const int n_rx = static_cast<int>(rx_maturities.size());
  const int n_fac = m.spec.n_factors;
  const int t = d.t_end;
  if (n_rx == 0) throw ValidationError("no forecast maturities given");
  for (int k = 0; k < n_rx; ++k)
    if (!(rx_maturities[k] >= 2.0))
      throw ValidationError("forecast maturities must be at least two months");

  // Legs the draws need from each particle's own surface.  Whether the
  // observed panel can price the same legs is the caller's concern (the
  // observed-return calculation applies the fill policy).
  std::set<double> legs{1.0};
  for (int k = 0; k < n_rx; ++k) {
    legs.insert(rx_maturities[k]);
    legs.insert(rx_maturities[k] - 1.0);
  }
  Vec eval_grid(static_cast<Eigen::Index>(legs.size()));
  {
    Eigen::Index i = 0;
    for (double v : legs) eval_grid[i++] = v;
  }

  PredictiveDraws out;
  out.rx_maturities = rx_maturities;
  out.pc_draws = Mat::Zero(n_part, n_fac);
  out.rx_draws = Mat::Zero(n_part, n_rx);
  Mat gp_shift(n_part, n_fac);
  gp_shift.setZero();
  std::vector<char> failed(static_cast<std::size_t>(n_part), 0);

  const Mat p_window = d.pcs->p.topRows(t + 1);
  const Vec p_last = p_window.row(t).transpose();

  parallel_for(n_part, [&](int i) {
    try {
      const Vec x = ps.thetas.row(i).transpose();
      const auto u = inference::unpack(m, x);
      u.qp.validate();
      const auto loadings = termstructure::model_loadings(
          u.qp, m.w, m.maturities, eval_grid);
      const auto pd = gpou::build_p_dynamics(
          loadings.mu_p_q, loadings.phi_p_q, u.qp.sigma_p_chol, u.lambda12,
          &u.lambda0, u.dense_lambda1 ? &u.lambda1_full : nullptr);

      gpou::PcPredictive pred;
      if (t >= 1) {
        const auto resid = gpou::residuals(p_window, pd);
        gpkernel::GpCov cov;
        Mat3 k0 = Mat3::Zero();
        Mat k_next = Mat::Zero(3 * static_cast<Eigen::Index>(t), 3);
        if (m.spec.form == inference::ModelForm::gp && u.kh.any_active()) {
          const Vec inputs = d.macro_kernel->head(t);
          cov = gpkernel::build_block_K(inputs, u.kh);
          gpkernel::build_cross_K(inputs, (*d.macro_kernel)(t), u.kh, k0,
                                  k_next);
        } else {
          cov.k = Mat::Zero(3 * static_cast<Eigen::Index>(t),
                            3 * static_cast<Eigen::Index>(t));
          cov.inputs = Vec::Zero(t);
          for (auto& b : cov.blocks) b = Mat::Zero(t, t);
        }
        pred = gpou::predictive_pc(p_last, resid, cov, k0, k_next, pd);
      } else {
        pred.mean = pd.mu_p_p + pd.phi_p_p * p_last;
        pred.cov = pd.sigma_p_chol * pd.sigma_p_chol.transpose();
        pred.gp_corr = Vec::Zero(n_fac);
      }
      if (m.spec.form == inference::ModelForm::linear)
        pred.mean += u.phi_pm.col(0) * (*d.macro_linear)(t);

      Eigen::SelfAdjointEigenSolver<Mat> es(pred.cov);
      const Vec root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
      Vec z(n_fac);
      for (int j = 0; j < n_fac; ++j)
        z(j) = ps.streams[static_cast<std::size_t>(i)].normal();
      const Vec p_next =
          pred.mean + es.eigenvectors() * root.cwiseProduct(z);

      out.pc_draws.row(i) = p_next.transpose();
      gp_shift.row(i) = pred.gp_corr.transpose();
      for (int k = 0; k < n_rx; ++k) {
        const double n_m = rx_maturities[k];
        const Eigen::Index jn = loadings.find_maturity(n_m);
        const Eigen::Index jn1 = loadings.find_maturity(n_m - 1.0);
        const Eigen::Index j1 = loadings.find_maturity(1.0);
        const double y_next = loadings.yield(jn1, p_next);
        const double y_n = loadings.yield(jn, p_last);
        const double y_1 = loadings.yield(j1, p_last);
        out.rx_draws(i, k) = -(n_m - 1.0) * y_next + n_m * y_n - y_1;
      }
    } catch (const ValidationError&) {
      failed[static_cast<std::size_t>(i)] = 1;
    } catch (const NumericalError&) {
      failed[static_cast<std::size_t>(i)] = 1;
    }
  });

  Vec w = ps.normalized_weights();
  double lost = 0.0;
  for (int i = 0; i < n_part; ++i)
    if (failed[static_cast<std::size_t>(i)]) {
      lost += w(i);
      w(i) = 0.0;
    }
  const double remaining = w.sum();
  if (!(remaining > 0.0))
    throw NumericalError("predict_excess_returns: every particle failed");
  w /= remaining;

  out.weights = w;
  out.point_rx = out.rx_draws.transpose() * w;
  out.gp_shift_mean = gp_shift.transpose() * w;
  return out;
}

double particle_mean_yield(const inference::ParticleSystem& ps,
                           const inference::Model& m, const Vec& pcs_at_date,
                           double maturity_months) {
  Vec grid(1);
  grid << maturity_months;
  const Vec w = ps.normalized_weights();
  double acc = 0.0, wsum = 0.0;
  for (int i = 0; i < ps.n_particles(); ++i) {
    if (w(i) <= 0.0) continue;
    try {
      const auto u = inference::unpack(m, ps.thetas.row(i).transpose());
      u.qp.validate();
      const auto loadings =
          termstructure::model_loadings(u.qp, m.w, m.maturities, grid);
      acc += w(i) * loadings.yield(0, pcs_at_date);
      wsum += w(i);
    } catch (const ValidationError&) {
    } catch (const NumericalError&) {
    }
  }
  if (!(wsum > 0.0))
    throw NumericalError("particle_mean_yield: every particle failed");
  return acc / wsum;
}

}  // namespace gpdtsm::forecast
