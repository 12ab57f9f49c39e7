#include <doctest.h>

#include <cmath>
#include <limits>

#include "gpdtsm/forecast.hpp"
#include "gpdtsm/ibis.hpp"
#include "gpdtsm/termstructure.hpp"
#include "gpdtsm/types.hpp"
#include "fixtures.hpp"

using namespace gpdtsm;
using forecast::observed_excess_return;

TEST_CASE("observed excess return: identities and hand values") {
  const Vec grid = (Vec(3) << 1, 23, 24).finished();
  const Vec y_t = (Vec(3) << 0.002, 0.0035, 0.0036).finished();
  const Vec y_t1 = (Vec(3) << 0.0021, 0.0034, 0.0037).finished();

  SUBCASE("one-month bond matures into the funding leg: exactly zero") {
    CHECK(observed_excess_return(y_t, y_t1, grid, 1.0) == 0.0);
  }
  SUBCASE("three-leg hand computation") {
    const double expect = -23.0 * 0.0034 + 24.0 * 0.0036 - 0.002;
    CHECK(observed_excess_return(y_t, y_t1, grid, 24.0) == expect);
  }
  SUBCASE("flat curve carries no excess return") {
    const double c = 0.00390625;  // 2^-8: the leg products stay exact
    const Vec flat = Vec::Constant(3, c);
    CHECK(observed_excess_return(flat, flat, grid, 24.0) == 0.0);
  }
  SUBCASE("missing legs and bad inputs are rejected") {
    const Vec no_sold = (Vec(2) << 1, 24).finished();
    CHECK_THROWS_AS(observed_excess_return(y_t.head(2), y_t1.head(2), no_sold,
                                           24.0),
                    ValidationError);
    const Vec no_funding = (Vec(2) << 23, 24).finished();
    CHECK_THROWS_AS(observed_excess_return(y_t.head(2), y_t1.head(2),
                                           no_funding, 24.0),
                    ValidationError);
    CHECK_THROWS_AS(observed_excess_return(y_t, y_t1, grid, 0.5),
                    ValidationError);
    CHECK_THROWS_AS(observed_excess_return(y_t.head(2), y_t1, grid, 24.0),
                    ValidationError);
  }
}

TEST_CASE("predictive draws: excess returns recompute from the PC draws") {
  const auto b = fixtures::make_bundle("GP_100", 20, 321);
  auto ps = inference::init_particles(b.model, 30, 6);
  const auto d = b.window(10);
  const Vec rx_mats = (Vec(2) << 24, 60).finished();

  const Mat thetas = ps.thetas;  // prediction never moves the particles
  auto out = forecast::predict_excess_returns(ps, b.model, d, rx_mats);
  CHECK((ps.thetas - thetas).cwiseAbs().maxCoeff() == 0.0);
  CHECK(out.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.pc_draws.rows() == 30);
  CHECK(out.rx_draws.cols() == 2);

  const Vec p_last = b.panel.p.row(10).transpose();
  int checked = 0;
  for (int i = 0; i < 30; ++i) {
    if (out.weights(i) <= 0.0) continue;  // failed particle, excluded anyway
    const auto u = inference::unpack(b.model, ps.thetas.row(i).transpose());
    for (int k = 0; k < 2; ++k) {
      const double n_m = rx_mats(k);
      Vec legs(3);
      legs << 1.0, n_m - 1.0, n_m;
      const auto lo = termstructure::model_loadings(u.qp, b.model.w,
                                                    b.model.maturities, legs);
      const Vec p_next = out.pc_draws.row(i).transpose();
      const double expect = -(n_m - 1.0) * lo.yield(1, p_next) +
                            n_m * lo.yield(2, p_last) - lo.yield(0, p_last);
      CHECK(std::abs(out.rx_draws(i, k) - expect) < 1e-12);
      ++checked;
    }
  }
  CHECK(checked > 20);  // most prior draws must price successfully

  // The point forecast is the weighted average of the draws.
  const Vec recompute = out.rx_draws.transpose() * out.weights;
  CHECK((recompute - out.point_rx).cwiseAbs().maxCoeff() < 1e-14);

  SUBCASE("maturities below two months cannot form a return") {
    const Vec bad = (Vec(1) << 1).finished();
    CHECK_THROWS_AS(forecast::predict_excess_returns(ps, b.model, d, bad),
                    ValidationError);
    CHECK_THROWS_AS(
        forecast::predict_excess_returns(ps, b.model, d, Vec()),
        ValidationError);
  }
}

TEST_CASE("yields-only model carries no latent shift, works at the origin") {
  const auto b = fixtures::make_bundle("M1", 8, 2);
  auto ps = inference::init_particles(b.model, 12, 44);
  const Vec rx_mats = (Vec(1) << 24).finished();

  auto d0 = b.window(0);  // no history: unconditional one-step draw
  const auto out0 = forecast::predict_excess_returns(ps, b.model, d0, rx_mats);
  CHECK(out0.gp_shift_mean.cwiseAbs().maxCoeff() == 0.0);
  CHECK(out0.point_rx.allFinite());

  auto d = b.window(5);
  const auto out = forecast::predict_excess_returns(ps, b.model, d, rx_mats);
  CHECK(out.gp_shift_mean.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("linear feedback shifts the predictive draws by phi_pm * macro") {
  const auto b = fixtures::make_bundle("LM_100", 16, 14);
  const auto l = b.model.layout();
  Vec x = fixtures::theta_from_truth(b);
  const double gamma = 0.02;
  x(l.off_phipm) = gamma;

  const int t = 9;
  const double shift = 0.5;
  Vec macro_a = b.truth.macro;
  Vec macro_b = b.truth.macro;
  macro_b(t) += shift;

  auto run = [&](const Vec& macro_linear) {
    auto ps = inference::init_particles(b.model, 8, 77);
    for (int i = 0; i < 8; ++i) ps.thetas.row(i) = x.transpose();
    inference::DataWindow d = b.window(t);
    d.macro_linear = &macro_linear;
    const Vec rx_mats = (Vec(1) << 24).finished();
    return forecast::predict_excess_returns(ps, b.model, d, rx_mats);
  };
  const auto out_a = run(macro_a);
  const auto out_b = run(macro_b);

  // Same streams, same z draws: the PC draws move by exactly the mean shift
  // gamma * delta-macro in the first factor and nowhere else.
  for (int i = 0; i < 8; ++i) {
    CHECK(std::abs(out_b.pc_draws(i, 0) - out_a.pc_draws(i, 0) -
                   gamma * shift) < 1e-12);
    CHECK(std::abs(out_b.pc_draws(i, 1) - out_a.pc_draws(i, 1)) < 1e-12);
    CHECK(std::abs(out_b.pc_draws(i, 2) - out_a.pc_draws(i, 2)) < 1e-12);
  }
}

TEST_CASE("particle-mean yield averages the per-particle curves") {
  const auto b = fixtures::make_bundle("M1", 8, 5);
  auto ps = inference::init_particles(b.model, 6, 3);
  const Vec x = fixtures::theta_from_truth(b);
  for (int i = 0; i < 6; ++i) ps.thetas.row(i) = x.transpose();

  const Vec p = b.panel.p.row(4).transpose();
  const double got = forecast::particle_mean_yield(ps, b.model, p, 48.0);

  const auto u = inference::unpack(b.model, x);
  Vec grid(1);
  grid << 48.0;
  const auto lo =
      termstructure::model_loadings(u.qp, b.model.w, b.model.maturities, grid);
  CHECK(got == doctest::Approx(lo.yield(0, p)).epsilon(1e-12));

  SUBCASE("a degenerate weight vector selects a single curve") {
    RngStream rng(1, 0);
    for (int i = 1; i < 6; ++i)
      ps.thetas.row(i) = inference::sample_prior(b.model, rng).transpose();
    ps.logw.setConstant(-std::numeric_limits<double>::infinity());
    ps.logw(0) = 0.0;
    const double single = forecast::particle_mean_yield(ps, b.model, p, 48.0);
    CHECK(single == doctest::Approx(lo.yield(0, p)).epsilon(1e-12));
  }
}
