#include <doctest.h>

#include <array>
#include <cmath>

#include "gpdtsm/gpkernel.hpp"
#include "gpdtsm/gpou.hpp"
#include "gpdtsm/linearmacro.hpp"
#include "gpdtsm/rng.hpp"
#include "gpdtsm/termstructure.hpp"
#include "gpdtsm/types.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace gpdtsm;
using linearmacro::build_restriction;
using linearmacro::LinearRestriction;

namespace {

struct Draw {
  Vec mu;      // 3
  Mat phi;     // 3 x 3, spectral radius below one by construction
  Mat chol;    // innovation factor
  Mat p;       // (T+1) x 3
  Vec macro;   // T+1
};

Draw random_draw(int t_len, std::uint64_t seed) {
  RngStream rng(seed, 0);
  Draw d;
  d.mu = Vec(3);
  for (int i = 0; i < 3; ++i) d.mu(i) = 1e-4 * rng.normal();
  d.phi = Mat(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      d.phi(i, j) = (i == j ? 0.8 : 0.0) + 0.05 * rng.normal();
  d.chol = Mat::Zero(3, 3);
  for (int i = 0; i < 3; ++i) {
    d.chol(i, i) = 1e-4 * (1.0 + rng.uniform());
    for (int j = 0; j < i; ++j) d.chol(i, j) = 2e-5 * rng.normal();
  }
  d.p = Mat(t_len + 1, 3);
  for (Eigen::Index t = 0; t <= t_len; ++t)
    for (int j = 0; j < 3; ++j) d.p(t, j) = 1e-3 * rng.normal();
  d.macro = Vec(t_len + 1);
  for (int t = 0; t <= t_len; ++t) d.macro(t) = rng.normal();
  return d;
}

}  // namespace

TEST_CASE("restriction assembles the coefficient matrix entry by entry") {
  const Vec mu_q = (Vec(3) << 1e-4, -2e-5, 3e-5).finished();
  Mat phi_q(3, 3);
  phi_q << 0.99, 0.013, -0.002, 0.004, 0.93, 0.021, -0.001, 0.007, 0.85;

  const std::array<bool, 3> mask{true, false, true};
  const auto lr = build_restriction(mask, mu_q, phi_q);
  CHECK(lr.n_free() == 3);  // lambda12 + two feedback rows

  const Vec x = (Vec(3) << 0.3, 7e-4, -4e-4).finished();
  Vec mu;
  Mat phi, phi_pm;
  lr.unpack_beta(lr.beta(x), mu, phi, phi_pm);

  CHECK((mu - mu_q).cwiseAbs().maxCoeff() == 0.0);
  Mat phi_expect = phi_q;
  phi_expect(0, 1) += 0.3;  // the single free risk-price slope entry
  CHECK((phi - phi_expect).cwiseAbs().maxCoeff() == 0.0);
  CHECK(phi_pm.rows() == 3);
  CHECK(phi_pm.cols() == 1);
  CHECK(phi_pm(0, 0) == 7e-4);
  CHECK(phi_pm(1, 0) == 0.0);
  CHECK(phi_pm(2, 0) == -4e-4);

  SUBCASE("lambda_from_beta inverts beta") {
    const Vec back = lr.lambda_from_beta(lr.beta(x));
    CHECK((back - x).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("without the risk-price entry only feedback rows are free") {
    const auto lr2 = build_restriction(mask, mu_q, phi_q, false);
    CHECK(lr2.n_free() == 2);
    const Vec x2 = (Vec(2) << 5e-4, -1e-4).finished();
    Vec mu2;
    Mat phi2, pm2;
    lr2.unpack_beta(lr2.beta(x2), mu2, phi2, pm2);
    CHECK((phi2 - phi_q).cwiseAbs().maxCoeff() == 0.0);
    CHECK(pm2(0, 0) == 5e-4);
    CHECK(pm2(2, 0) == -1e-4);
    CHECK((lr2.lambda_from_beta(lr2.beta(x2)) - x2).cwiseAbs().maxCoeff() <
          1e-14);
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(lr.beta(Vec::Zero(2)), ValidationError);
    CHECK_THROWS_AS(
        build_restriction({false, false, false}, mu_q, phi_q, false),
        ValidationError);
    CHECK_THROWS_AS(build_restriction(mask, Vec::Zero(1), Mat::Zero(1, 1)),
                    ValidationError);
  }
}

TEST_CASE("VAR likelihood matches a per-transition dense Gaussian oracle") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Draw d = random_draw(10, 100 + seed);
    Mat phi_pm(3, 1);
    phi_pm << 6e-4, -3e-4, 1e-4;
    const double got = linearmacro::linear_p_loglik(d.p, d.macro, d.mu, d.phi,
                                                    phi_pm, d.chol);
    const Mat ssp = d.chol * d.chol.transpose();
    double oracle = 0.0;
    for (int t = 1; t <= 10; ++t) {
      const Vec mean = d.mu + d.phi * d.p.row(t - 1).transpose() +
                       phi_pm.col(0) * d.macro(t - 1);
      oracle += oracles::dense_gauss_logpdf(d.p.row(t).transpose(), mean, ssp);
    }
    CHECK(std::abs(got - oracle) < 1e-9 * std::max(1.0, std::abs(oracle)));
  }
}

TEST_CASE("zero feedback nests the kernel-free latent-function model") {
  // With the macro kernel switched off on one side and the feedback matrix
  // zero on the other, both reduce to the same Gaussian VAR.
  gpkernel::KernelHypers off;  // all inactive
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Draw d = random_draw(8, 500 + seed);
    const double lm = linearmacro::linear_p_loglik(
        d.p, d.macro, d.mu, d.phi, Mat::Zero(3, 1), d.chol);

    gpou::PDynParams pd;
    pd.mu_p_p = d.mu;
    pd.phi_p_p = d.phi;
    pd.sigma_p_chol = d.chol;
    const auto resid = gpou::residuals(d.p, pd);
    const auto cov = gpkernel::build_block_K(d.macro.head(8), off);
    const double gp = gpou::p_loglik(resid, cov, d.chol);

    CHECK(std::abs(lm - gp) < 1e-10 * std::max(1.0, std::abs(lm)));

    // One-step predictive moments coincide as well.
    Mat3 k0;
    Mat k_next;
    gpkernel::build_cross_K(d.macro.head(8), d.macro(8), off, k0, k_next);
    const Vec p_last = d.p.row(8).transpose();
    const auto pred = gpou::predictive_pc(p_last, resid, cov, k0, k_next, pd);
    const Vec mean_lin = d.mu + d.phi * p_last;
    const Mat cov_lin = d.chol * d.chol.transpose();
    CHECK((pred.mean - mean_lin).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((pred.cov - cov_lin).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(pred.gp_corr.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("panel wrapper routes the rotated dynamics and restriction") {
  const auto b = fixtures::make_bundle("LM_110", 30, 123);
  const std::array<bool, 3> mask{true, true, false};
  const Vec lg = (Vec(3) << 0.12, 4e-4, -2e-4).finished();

  const double got = linearmacro::linear_p_loglik(
      b.panel, b.truth.macro, b.truth.qp, lg, mask, b.truth.maturities);

  // Hand assembly: rotated Q dynamics, risk-price slope entry, feedback rows.
  const auto pl = termstructure::model_loadings(b.truth.qp, b.panel.w,
                                                b.truth.maturities);
  Mat phi = pl.phi_p_q;
  phi(0, 1) += lg(0);
  Mat phi_pm = Mat::Zero(3, 1);
  phi_pm(0, 0) = lg(1);
  phi_pm(1, 0) = lg(2);
  const double direct = linearmacro::linear_p_loglik(
      b.panel.p, b.truth.macro, pl.mu_p_q, phi, phi_pm, b.truth.qp.sigma_p_chol);
  CHECK(got == doctest::Approx(direct).epsilon(1e-12));

  SUBCASE("with everything zeroed it collapses to the no-feedback VAR") {
    const Vec zero = Vec::Zero(3);
    const double base = linearmacro::linear_p_loglik(
        b.panel, b.truth.macro, b.truth.qp, zero, mask, b.truth.maturities);
    gpou::PDynParams pd = gpou::build_p_dynamics(pl.mu_p_q, pl.phi_p_q,
                                                 b.truth.qp.sigma_p_chol, 0.0);
    const auto resid = gpou::residuals(b.panel, pd);
    gpkernel::KernelHypers off;
    const auto cov = gpkernel::build_block_K(
        b.truth.macro.head(b.panel.p.rows() - 1), off);
    const double gp = gpou::p_loglik(resid, cov, b.truth.qp.sigma_p_chol);
    CHECK(base == doctest::Approx(gp).epsilon(1e-10));
  }
  SUBCASE("macro series shorter than the panel is rejected") {
    CHECK_THROWS_AS(linearmacro::linear_p_loglik(
                        b.panel.p, b.truth.macro.head(5), Vec::Zero(3),
                        Mat::Identity(3, 3), Mat::Zero(3, 1),
                        b.truth.qp.sigma_p_chol),
                    ValidationError);
  }
}
