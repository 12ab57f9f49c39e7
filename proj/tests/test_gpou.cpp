#include <doctest.h>

#include <vector>

#include "gpdtsm/gpkernel.hpp"
#include "gpdtsm/gpou.hpp"
#include "gpdtsm/likelihood.hpp"
#include "gpdtsm/linalg.hpp"
#include "gpdtsm/rng.hpp"
#include "gpdtsm/types.hpp"
#include "oracles.hpp"

using namespace gpdtsm;
using gpkernel::GpCov;
using gpkernel::KernelHypers;
using gpou::PDynParams;
using gpou::StackedResiduals;

namespace {

struct Instance {
  Mat p;           // (T+1) x 3 PC path
  Vec macro;       // T kernel inputs (lagged into each transition)
  PDynParams pd;
  KernelHypers kh;
  GpCov cov;
  StackedResiduals resid;
};

Instance make_instance(int t_len, std::uint64_t seed,
                       std::array<bool, 3> active = {true, true, true}) {
  RngStream rng(seed, 0);
  Instance in;
  in.pd.mu_p_p = (Vec(3) << 2e-4, -1e-4, 5e-5).finished();
  Mat phi(3, 3);
  phi << 0.95, 0.02, -0.01, 0.01, 0.9, 0.03, 0.0, -0.02, 0.8;
  in.pd.phi_p_p = phi;
  Mat l = Mat::Zero(3, 3);
  l(0, 0) = 3e-4;
  l(1, 0) = 5e-5;
  l(1, 1) = 2e-4;
  l(2, 0) = -4e-5;
  l(2, 1) = 3e-5;
  l(2, 2) = 1e-4;
  in.pd.sigma_p_chol = l;

  in.kh.active = active;
  in.kh.ell_k = (Vec3() << 0.9, 1.3, 0.7).finished();
  in.kh.sigma_k = (Vec3() << 4e-4, 2e-4, 1e-4).finished();
  for (int j = 0; j < 3; ++j)
    if (!active[static_cast<std::size_t>(j)]) in.kh.sigma_k(j) = 0.0;

  in.p = Mat(t_len + 1, 3);
  for (Eigen::Index t = 0; t <= t_len; ++t)
    for (int j = 0; j < 3; ++j) in.p(t, j) = 1e-3 * rng.normal();
  in.macro = Vec(t_len);
  for (int t = 0; t < t_len; ++t) in.macro(t) = rng.normal();

  in.cov = gpkernel::build_block_K(in.macro, in.kh);
  in.resid = gpou::residuals(in.p, in.pd);
  return in;
}

// Equation-major dense covariance built from scratch, index j*T + t.
Mat dense_kp(const Instance& in) {
  const Eigen::Index t_len = in.macro.size();
  const Mat ssp = in.pd.sigma_p_chol * in.pd.sigma_p_chol.transpose();
  Mat kp = Mat::Zero(3 * t_len, 3 * t_len);
  for (int j = 0; j < 3; ++j)
    for (int jp = 0; jp < 3; ++jp)
      for (Eigen::Index a = 0; a < t_len; ++a)
        for (Eigen::Index b = 0; b < t_len; ++b) {
          double v = (a == b) ? ssp(j, jp) : 0.0;
          if (j == jp && in.kh.active[static_cast<std::size_t>(j)])
            v += gpkernel::sqexp(in.macro(a), in.macro(b), in.kh.ell_k(j),
                                 in.kh.sigma_k(j));
          kp(j * t_len + a, jp * t_len + b) = v;
        }
  return kp;
}

}  // namespace

TEST_CASE("residual stacking: values and layout") {
  const Instance in = make_instance(4, 3);
  for (int t = 1; t <= 4; ++t) {
    const Vec expect = in.p.row(t).transpose() - in.pd.mu_p_p -
                       in.pd.phi_p_p * in.p.row(t - 1).transpose();
    for (int j = 0; j < 3; ++j) {
      CHECK(std::abs(in.resid.per_eq(t - 1, j) - expect(j)) < 1e-15);
      // Equation-major stacked copy: all of equation j, dates in order.
      CHECK(std::abs(in.resid.s(j * 4 + (t - 1)) - expect(j)) < 1e-15);
    }
  }
}

TEST_CASE("marginal likelihood matches the dense Gaussian oracle") {
  for (int t_len : {2, 3}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const Instance in = make_instance(t_len, seed);
      const Mat kp = dense_kp(in);
      const double oracle = oracles::dense_gauss_logpdf(
          in.resid.s, Vec::Zero(3 * t_len), kp);
      const double got =
          gpou::p_loglik(in.resid, in.cov, in.pd.sigma_p_chol);
      CHECK(std::abs(got - oracle) < 1e-8);
      // Library assembly of the same covariance agrees entrywise.
      CHECK((gpou::build_kp(in.cov, in.pd.sigma_p_chol) - kp)
                .cwiseAbs()
                .maxCoeff() < 1e-15);
    }
  }
}

TEST_CASE("latent-function posterior matches dense joint conditioning") {
  for (int t_len : {2, 3}) {
    const Instance in = make_instance(t_len, 7 + t_len);
    const Eigen::Index dim = 3 * t_len;

    // Joint [v; s]: v ~ N(0, K), s = v + eta with eta ~ N(0, SSP (x) I).
    Mat joint = Mat::Zero(2 * dim, 2 * dim);
    const Mat kp = dense_kp(in);
    Mat k_only = Mat::Zero(dim, dim);
    for (int j = 0; j < 3; ++j)
      k_only.block(j * t_len, j * t_len, t_len, t_len) =
          in.cov.blocks[static_cast<std::size_t>(j)];
    joint.topLeftCorner(dim, dim) = k_only;
    joint.topRightCorner(dim, dim) = k_only;
    joint.bottomLeftCorner(dim, dim) = k_only;
    joint.bottomRightCorner(dim, dim) = kp;  // K + noise

    std::vector<int> ia(dim), ib(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      ia[static_cast<std::size_t>(i)] = static_cast<int>(i);
      ib[static_cast<std::size_t>(i)] = static_cast<int>(dim + i);
    }
    const auto cond = oracles::dense_condition(Vec::Zero(2 * dim), joint, ia,
                                               ib, in.resid.s);

    Vec mean;
    Mat cov;
    gpou::posterior_v(in.resid, in.cov, in.pd.sigma_p_chol, mean, cov);
    CHECK((mean - cond.mean).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((cov - cond.cov).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("one-step predictive matches dense joint conditioning") {
  for (int t_len : {2, 3}) {
    const Instance in = make_instance(t_len, 17 + t_len);
    const Eigen::Index dim = 3 * t_len;
    const double m_next = 0.35;

    Mat3 k0;
    Mat k_next;
    gpkernel::build_cross_K(in.macro, m_next, in.kh, k0, k_next);
    const Vec p_last = in.p.row(t_len).transpose();
    const auto pred = gpou::predictive_pc(p_last, in.resid, in.cov, k0,
                                          k_next, in.pd);

    // Dense oracle: joint of [v_next (3); s (3T)].
    const Mat kp = dense_kp(in);
    Mat joint = Mat::Zero(3 + dim, 3 + dim);
    joint.topLeftCorner(3, 3) = k0;
    joint.topRightCorner(3, dim) = k_next.transpose();
    joint.bottomLeftCorner(dim, 3) = k_next;
    joint.bottomRightCorner(dim, dim) = kp;
    std::vector<int> ia{0, 1, 2};
    std::vector<int> ib(dim);
    for (Eigen::Index i = 0; i < dim; ++i)
      ib[static_cast<std::size_t>(i)] = static_cast<int>(3 + i);
    const auto cond = oracles::dense_condition(Vec::Zero(3 + dim), joint, ia,
                                               ib, in.resid.s);

    const Vec mean_oracle =
        in.pd.mu_p_p + in.pd.phi_p_p * p_last + cond.mean;
    const Mat cov_oracle =
        cond.cov + in.pd.sigma_p_chol * in.pd.sigma_p_chol.transpose();

    CHECK((pred.mean - mean_oracle).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((pred.cov - cov_oracle).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((pred.gp_corr - cond.mean).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("kernel-free marginal is the sum of independent transitions") {
  const Instance in = make_instance(5, 29, {false, false, false});
  REQUIRE(in.cov.all_zero());
  const Eigen::LLT<Mat> llt(
      Mat(in.pd.sigma_p_chol * in.pd.sigma_p_chol.transpose()));
  double direct = 0.0;
  for (int t = 1; t <= 5; ++t) {
    const Vec mean = in.pd.mu_p_p + in.pd.phi_p_p * in.p.row(t - 1).transpose();
    direct += mvn_logpdf(in.p.row(t).transpose(), mean, llt);
  }
  CHECK(gpou::p_loglik(in.resid, in.cov, in.pd.sigma_p_chol) ==
        doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("time-major incremental terms equal two equation-major marginals") {
  for (int t_len : {2, 3, 6}) {
    const Instance in = make_instance(t_len, 31 + t_len);
    double p_prev = 0.0, p_inc = 0.0;
    inference::p_terms_time_major(in.resid.per_eq, in.macro, in.kh,
                                  in.pd.sigma_p_chol, p_prev, p_inc);

    const double full = gpou::p_loglik(in.resid, in.cov, in.pd.sigma_p_chol);
    CHECK(p_prev + p_inc == doctest::Approx(full).epsilon(1e-9));

    if (t_len > 1) {
      Instance head = in;
      head.macro = in.macro.head(t_len - 1);
      head.cov = gpkernel::build_block_K(head.macro, in.kh);
      StackedResiduals rh;
      rh.per_eq = in.resid.per_eq.topRows(t_len - 1);
      rh.s = Vec(3 * (t_len - 1));
      for (int j = 0; j < 3; ++j)
        for (int t = 0; t < t_len - 1; ++t)
          rh.s(j * (t_len - 1) + t) = rh.per_eq(t, j);
      const double prev_direct =
          gpou::p_loglik(rh, head.cov, in.pd.sigma_p_chol);
      CHECK(p_prev == doctest::Approx(prev_direct).epsilon(1e-9));
    }
  }
}

TEST_CASE("risk-price map: restricted, freed intercept, dense") {
  const Vec mu_q = (Vec(3) << 1e-4, 2e-5, -1e-5).finished();
  Mat phi_q(3, 3);
  phi_q << 0.99, 0.01, 0.0, 0.0, 0.94, 0.02, 0.01, 0.0, 0.86;
  Mat l = Mat::Identity(3, 3) * 1e-4;

  SUBCASE("lambda12 shifts only the level-on-slope entry") {
    const auto pd = gpou::build_p_dynamics(mu_q, phi_q, l, 0.3);
    CHECK(pd.phi_p_p(0, 1) == doctest::Approx(phi_q(0, 1) + 0.3));
    Mat diff = pd.phi_p_p - phi_q;
    diff(0, 1) = 0.0;
    CHECK(diff.cwiseAbs().maxCoeff() == 0.0);
    CHECK((pd.mu_p_p - mu_q).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("freed lambda0 shifts the drift") {
    const Vec lam0 = (Vec(3) << 5e-5, 0.0, -2e-5).finished();
    const auto pd = gpou::build_p_dynamics(mu_q, phi_q, l, 0.1, &lam0);
    CHECK((pd.mu_p_p - (mu_q + lam0)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("dense lambda1 replaces the single-entry form") {
    Mat lam1 = Mat::Constant(3, 3, 0.05);
    const auto pd =
        gpou::build_p_dynamics(mu_q, phi_q, l, 0.7, nullptr, &lam1);
    CHECK((pd.phi_p_p - (phi_q + lam1)).cwiseAbs().maxCoeff() == 0.0);
  }
}
