#include "gpdtsm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

namespace gpdtsm::evaluation {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double normal_upper_p(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace

OlsFit ols(const Vec& y, const Mat& x) {
  const auto t = y.size();
  if (t == 0) throw ValidationError("ols: empty response");
  if (x.rows() != t)
    throw ValidationError("ols: design has " + std::to_string(x.rows()) +
                          " rows but response has " + std::to_string(t));
  Mat design(t, x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;

  Eigen::CompleteOrthogonalDecomposition<Mat> cod(design);
  OlsFit fit;
  fit.coef = cod.solve(y);
  fit.rank_deficient = cod.rank() < design.cols();
  fit.fitted = design * fit.coef;
  fit.resid = y - fit.fitted;

  const double ybar = y.mean();
  const double tss = (y.array() - ybar).square().sum();
  const double ssr = fit.resid.squaredNorm();
  if (tss <= 0.0) {
    fit.r2 = kNan;
    fit.adj_r2 = kNan;
    return fit;
  }
  fit.r2 = 1.0 - ssr / tss;
  const auto p = x.cols();
  fit.adj_r2 = (t > p + 1)
                   ? 1.0 - (1.0 - fit.r2) * double(t - 1) / double(t - p - 1)
                   : kNan;
  return fit;
}

double adjusted_r2(const Vec& y, const Mat& x) { return ols(y, x).adj_r2; }

double delta_adjusted_r2(const Vec& y, const Mat& x_base, const Mat& x_extra) {
  if (x_base.rows() != x_extra.rows())
    throw ValidationError("delta_adjusted_r2: base/extra row mismatch");
  Mat full(x_base.rows(), x_base.cols() + x_extra.cols());
  full.leftCols(x_base.cols()) = x_base;
  full.rightCols(x_extra.cols()) = x_extra;
  return adjusted_r2(y, full) - adjusted_r2(y, x_base);
}

R2osResult r2_os(const Vec& model_errors, const Vec& bench_errors) {
  if (model_errors.size() == 0)
    throw ValidationError("r2_os: empty error series");
  if (model_errors.size() != bench_errors.size())
    throw ValidationError("r2_os: model and benchmark series differ in length");
  R2osResult out;
  const double sse_b = bench_errors.squaredNorm();
  if (sse_b <= 0.0) {
    out.value = kNan;
    out.undefined = true;
    return out;
  }
  out.value = 1.0 - model_errors.squaredNorm() / sse_b;
  return out;
}

Vec cw_loss_diff(const Vec& realized, const Vec& f_model, const Vec& f_bench) {
  if (realized.size() != f_model.size() || realized.size() != f_bench.size())
    throw ValidationError("cw_loss_diff: series lengths differ");
  const Vec e_m = realized - f_model;
  const Vec e_b = realized - f_bench;
  return e_b.array().square() - e_m.array().square() +
         (f_bench - f_model).array().square();
}

int nw_auto_lag(int t_obs) {
  if (t_obs <= 0) return 0;
  return int(std::floor(4.0 * std::pow(double(t_obs) / 100.0, 2.0 / 9.0)));
}

DmCwResult dm_cw_test(const Vec& loss_diff, int lags) {
  const auto t = loss_diff.size();
  if (t < 10)
    throw ValidationError("dm_cw_test: need at least 10 observations, got " +
                          std::to_string(t));
  if (lags < 0) throw ValidationError("dm_cw_test: negative lag count");

  DmCwResult out;
  out.lags = lags;
  const double dbar = loss_diff.mean();
  const Vec centered = loss_diff.array() - dbar;

  // Bartlett-weighted long-run variance with 1/T autocovariances.
  const double gamma0 = centered.squaredNorm() / double(t);
  double lrv = gamma0;
  for (int l = 1; l <= std::min<int>(lags, int(t) - 1); ++l) {
    const double gl =
        centered.tail(t - l).dot(centered.head(t - l)) / double(t);
    lrv += 2.0 * (1.0 - double(l) / double(lags + 1)) * gl;
  }
  if (lrv <= 0.0) lrv = gamma0;  // Bartlett can undershoot; fall back

  if (lrv <= 0.0) {
    if (std::abs(dbar) <= 0.0) {
      out.stat = 0.0;
      out.p_one_sided = 0.5;
    } else {
      out.stat = dbar > 0 ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
      out.p_one_sided = kNan;
      out.degenerate = true;
    }
    return out;
  }
  out.stat = dbar / std::sqrt(lrv / double(t));
  out.p_one_sided = normal_upper_p(out.stat);
  return out;
}

namespace {

struct UtilityCurve {
  Vec prob;    // normalized particle weights
  Vec payoff;  // exp(rx_i) - 1
  double gross_rf = 1.0;
  double gamma = 3.0;

  // Expected utility at weight w; -inf when some wealth is nonpositive.
  double operator()(double w) const {
    double total = 0.0;
    for (Eigen::Index i = 0; i < prob.size(); ++i) {
      const double wealth = gross_rf * (1.0 + w * payoff(i));
      if (wealth <= 0.0) return -std::numeric_limits<double>::infinity();
      total += prob(i) * std::pow(wealth, 1.0 - gamma);
    }
    return total / (1.0 - gamma);
  }
};

}  // namespace

double optimal_weight(const Vec& weights, const Vec& rx_draws, double gamma,
                      double rf) {
  if (weights.size() == 0 || weights.size() != rx_draws.size())
    throw ValidationError("optimal_weight: weights/draws size mismatch");
  if (!(gamma > 1.0))
    throw ValidationError("optimal_weight: requires gamma > 1");
  if (!rx_draws.allFinite() || !weights.allFinite())
    throw ValidationError("optimal_weight: non-finite draws or weights");
  const double wsum = weights.sum();
  if (!(wsum > 0.0))
    throw ValidationError("optimal_weight: weights must sum to a positive value");

  UtilityCurve u;
  u.prob = weights / wsum;
  u.payoff = rx_draws.array().exp() - 1.0;
  u.gross_rf = std::exp(rf);
  u.gamma = gamma;

  if (u.payoff.cwiseAbs().maxCoeff() < 1e-14) return 0.0;  // indifference

  // Wealth is linear in w per draw, so the feasible region {all W_i > 0}
  // is an interval containing 0; shrink slightly to keep utility finite.
  double lo = -10.0, hi = 10.0;
  for (Eigen::Index i = 0; i < u.payoff.size(); ++i) {
    const double p = u.payoff(i);
    if (p > 0.0)
      lo = std::max(lo, -1.0 / p);
    else if (p < 0.0)
      hi = std::min(hi, -1.0 / p);
  }
  const double margin = 1e-9 * (hi - lo);
  lo += margin;
  hi -= margin;

  // Golden-section search (expected utility is concave in w).
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
  double f1 = u(x1), f2 = u(x2);
  for (int iter = 0; iter < 200 && (b - a) > 1e-10; ++iter) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = u(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = u(x1);
    }
  }
  double w_star = (f1 > f2) ? x1 : x2;
  double f_star = std::max(f1, f2);

  // Local quadratic refinement around the golden-section optimum.
  const double h = std::max(1e-6, 1e-4 * std::abs(w_star));
  const double wl = std::max(lo, w_star - h), wr = std::min(hi, w_star + h);
  const double fl = u(wl), fr = u(wr);
  const double denom = fr - 2.0 * f_star + fl;
  if (std::isfinite(denom) && denom < 0.0) {
    const double vertex = w_star - 0.5 * (wr - wl) * (fr - fl) / (2.0 * denom);
    if (vertex > lo && vertex < hi) {
      const double fv = u(vertex);
      if (fv > f_star) {
        w_star = vertex;
        f_star = fv;
      }
    }
  }
  return w_star;
}

double realized_portfolio_return(double w, double rf, double rx_realized) {
  return std::exp(rf) * (1.0 - w) + w * std::exp(rf + rx_realized) - 1.0;
}

double cer_relative(const Vec& r_model, const Vec& r_bench, double gamma,
                    const std::vector<std::string>* dates) {
  const auto t = r_model.size();
  if (t == 0) throw ValidationError("cer_relative: empty return series");
  if (r_bench.size() != t)
    throw ValidationError("cer_relative: model/benchmark length mismatch");
  if (!(gamma > 1.0)) throw ValidationError("cer_relative: requires gamma > 1");

  auto label = [&](Eigen::Index i) {
    return (dates && i < Eigen::Index(dates->size())) ? (*dates)[i]
                                                      : std::to_string(i);
  };
  std::ostringstream bad;
  int n_bad = 0;
  for (Eigen::Index i = 0; i < t; ++i) {
    if (r_model(i) <= -1.0 || r_bench(i) <= -1.0) {
      bad << (n_bad++ ? ", " : "") << label(i);
    }
  }
  if (n_bad > 0)
    throw ValidationError(
        "cer_relative: nonpositive realized wealth (utility undefined) at: " +
        bad.str());

  // avg U((1+r_b) e^delta) = avg U(1+r_m) with U(W) = W^{1-gamma}/(1-gamma)
  // gives e^{delta(1-gamma)} = A_m / A_b with A = avg (1+r)^{1-gamma}.
  const double ex = 1.0 - gamma;
  const double a_m = (r_model.array() + 1.0).pow(ex).mean();
  const double a_b = (r_bench.array() + 1.0).pow(ex).mean();
  const double delta = std::log(a_m / a_b) / ex;
  return 1200.0 * delta;
}

RpDecomposition rp_decompose(const Mat& v_hat, const Mat& pcs,
                             const Mat& macro_lagged) {
  const auto t = v_hat.rows();
  const auto n = v_hat.cols();
  if (t == 0 || n == 0) throw ValidationError("rp_decompose: empty v-hat");
  if (pcs.rows() != t)
    throw ValidationError("rp_decompose: PC panel has " +
                          std::to_string(pcs.rows()) + " rows, v-hat has " +
                          std::to_string(t));
  if (macro_lagged.rows() != t)
    throw ValidationError("rp_decompose: macro series has " +
                          std::to_string(macro_lagged.rows()) +
                          " rows, v-hat has " + std::to_string(t));

  RpDecomposition out;
  out.spanned.resize(t, n);
  out.hidden.resize(t, n);
  out.coef_a.resize(n);
  out.coef_b.resize(n, pcs.cols());
  out.r2_vhat_on_macro.resize(n);
  out.r2_spanned_on_macro.resize(n);
  out.r2_hidden_on_macro.resize(n);
  out.hidden_zero.assign(std::size_t(n), false);

  // Adjusted R^2 on the lagged macro battery; a component with (numerically)
  // no variation has nothing to explain and is reported as 0.
  auto battery_r2 = [&](const Vec& y) {
    const double sd = std::sqrt((y.array() - y.mean()).square().sum());
    if (sd <= 1e-12 * std::max(1.0, y.cwiseAbs().maxCoeff())) return 0.0;
    return adjusted_r2(y, macro_lagged);
  };

  for (Eigen::Index j = 0; j < n; ++j) {
    const Vec vj = v_hat.col(j);
    OlsFit fit = ols(vj, pcs);
    out.rank_deficient = out.rank_deficient || fit.rank_deficient;
    out.spanned.col(j) = fit.fitted;
    out.hidden.col(j) = fit.resid;
    out.coef_a(j) = fit.coef(0);
    out.coef_b.row(j) = fit.coef.tail(pcs.cols()).transpose();

    out.r2_vhat_on_macro(j) = battery_r2(vj);
    out.r2_spanned_on_macro(j) = battery_r2(out.spanned.col(j));
    const double hidden_scale = out.hidden.col(j).cwiseAbs().maxCoeff();
    if (hidden_scale <= 1e-10 * std::max(1.0, vj.cwiseAbs().maxCoeff())) {
      out.hidden_zero[std::size_t(j)] = true;
      out.r2_hidden_on_macro(j) = 0.0;
    } else {
      out.r2_hidden_on_macro(j) = battery_r2(out.hidden.col(j));
    }
  }
  return out;
}

std::string significance_stars(double p_value) {
  if (!(p_value == p_value)) return "";  // NaN
  if (p_value < 0.01) return "***";
  if (p_value < 0.05) return "**";
  if (p_value < 0.10) return "*";
  return "";
}

}  // namespace gpdtsm::evaluation
