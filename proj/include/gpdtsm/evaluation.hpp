#pragma once

// Out-of-sample forecast evaluation: Campbell-Thompson out-of-sample R^2,
// Diebold-Mariano / Clark-West predictive-accuracy tests with Newey-West
// long-run variance, power-utility portfolio choice (optimal risky-bond
// weight, realized portfolio returns, certainty-equivalent-return spreads),
// adjusted-R^2 regression batteries, and the decomposition of the fitted
// conditional-mean adjustment into a PC-spanned part and a hidden residual.

#include <string>
#include <vector>

#include "gpdtsm/types.hpp"

namespace gpdtsm::evaluation {

// Ordinary least squares of y on [1, x] (intercept prepended internally).
// Rank-deficient designs are solved in the minimum-norm sense and flagged.
struct OlsFit {
  Vec coef;    // intercept first, then one slope per column of x
  Vec fitted;  // same length as y
  Vec resid;   // y - fitted
  double r2 = 0.0;      // NaN when y has zero variance
  double adj_r2 = 0.0;  // NaN when y has zero variance or t <= p+1
  bool rank_deficient = false;
};
OlsFit ols(const Vec& y, const Mat& x);

// Adjusted R^2 of y on [1, x]: 1 - (1-R^2)(T-1)/(T-p-1), p = x.cols().
// Returns NaN when T <= p+1 or y has zero variance.
double adjusted_r2(const Vec& y, const Mat& x);

// adjusted_r2(y, [x_base x_extra]) - adjusted_r2(y, x_base).
double delta_adjusted_r2(const Vec& y, const Mat& x_base, const Mat& x_extra);

// Out-of-sample R^2: 1 - SSE(model) / SSE(benchmark) on aligned error series.
struct R2osResult {
  double value = 0.0;
  bool undefined = false;  // benchmark SSE is zero
};
R2osResult r2_os(const Vec& model_errors, const Vec& bench_errors);

// Clark-West adjusted loss differential for nested model comparisons:
//   d_t = e_bench^2 - e_model^2 + (f_bench - f_model)^2.
// Positive mean favors the model.
Vec cw_loss_diff(const Vec& realized, const Vec& f_model, const Vec& f_bench);

// Automatic Newey-West truncation lag: floor(4 * (T/100)^{2/9}).
int nw_auto_lag(int t_obs);

// One-sided test that the mean of the loss differential is positive.
// stat = mean(d) / sqrt(S/T) with S the Bartlett-weighted long-run variance
// built from 1/T-normalized autocovariances; p = 1 - Phi(stat).
// lags = 0 reduces to the classical t-statistic with the population
// standard deviation. A series with zero variance and zero mean returns
// (0, 0.5); zero variance with nonzero mean is flagged degenerate (p NaN).
struct DmCwResult {
  double stat = 0.0;
  double p_one_sided = 0.5;
  int lags = 0;
  bool degenerate = false;
};
DmCwResult dm_cw_test(const Vec& loss_diff, int lags);

// Optimal weight on the risky bond for a power-utility investor:
//   w* = argmax_w sum_i omega_i U(W_i(w)),  U(W) = W^{1-gamma}/(1-gamma),
//   W_i(w) = exp(rf)(1-w) + w exp(rf + rx_i),
// searched over w in [-10, 10] restricted to draws-feasible wealth
// (golden-section plus a local quadratic refinement). Particle weights may
// be unnormalized; all-zero return draws break the tie at w = 0.
double optimal_weight(const Vec& weights, const Vec& rx_draws, double gamma,
                      double rf);

// Net realized portfolio return for weight w when rx_realized materializes.
double realized_portfolio_return(double w, double rf, double rx_realized);

// Annualized certainty-equivalent-return spread in percent: the constant
// monthly log increment delta solving
//   avg U((1+r_bench) e^delta) = avg U(1+r_model),
// reported as 1200 * delta. Throws ValidationError when any 1+r is
// nonpositive (power utility undefined), listing the offending positions.
double cer_relative(const Vec& r_model, const Vec& r_bench, double gamma,
                    const std::vector<std::string>* dates = nullptr);

// Split the posterior-mean conditional adjustment v-hat (T x N, one column
// per transition equation) into the part spanned by [1, P_t] and the hidden
// residual, then measure how much of each component the lagged macro series
// explains (adjusted R^2 battery).
struct RpDecomposition {
  Mat spanned;            // T x N fitted values of v-hat on [1, P_t]
  Mat hidden;             // T x N residuals, orthogonal to [1, P_t]
  Vec coef_a;             // per-equation intercept
  Mat coef_b;             // N x N, row j = PC slopes for equation j
  Vec r2_vhat_on_macro;   // adjusted R^2 per equation
  Vec r2_spanned_on_macro;
  Vec r2_hidden_on_macro;
  std::vector<bool> hidden_zero;  // hidden ~ 0: its R^2 reported as 0
  bool rank_deficient = false;    // PCs collinear; pseudo-inverse used
};
RpDecomposition rp_decompose(const Mat& v_hat, const Mat& pcs,
                             const Mat& macro_lagged);

// Standard significance stars: *** at 1%, ** at 5%, * at 10%, else "".
std::string significance_stars(double p_value);

}  // namespace gpdtsm::evaluation
