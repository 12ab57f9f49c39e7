#include <doctest.h>

#include <cmath>

#include "gpdtsm/gradient.hpp"
#include "gpdtsm/likelihood.hpp"
#include "gpdtsm/rng.hpp"
#include "gpdtsm/types.hpp"
#include "fixtures.hpp"

using namespace gpdtsm;

namespace {

// Central finite difference of the production log posterior, per coordinate
// step sizes scaled to the coordinate magnitude.
Vec fd_gradient(const inference::Model& m, const inference::DataWindow& d,
                const Vec& x) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(i)));
    Vec xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (inference::log_posterior(m, d, xp) -
            inference::log_posterior(m, d, xm)) /
           (2.0 * h);
  }
  return g;
}

// A parameter point near the generating truth with mild random jitter, so the
// likelihood surface is well conditioned but the point is not special.
Vec jittered_theta(const fixtures::Bundle& b, RngStream& rng) {
  Vec x = fixtures::theta_from_truth(b);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += 0.01 * rng.normal();
  return x;
}

}  // namespace

TEST_CASE("mirror evaluation agrees with the production log posterior") {
  for (const char* id : {"M1", "GP_110", "LM_101", "M0"}) {
    const auto b = fixtures::make_bundle(id, 14, 41);
    const auto d = b.window(13);
    RngStream rng(7, 0);
    for (int rep = 0; rep < 20; ++rep) {
      const Vec x = jittered_theta(b, rng);
      const double prod = inference::log_posterior(b.model, d, x);
      const double mirror = gradient::mirror_log_posterior(b.model, d, x);
      CAPTURE(id);
      REQUIRE(std::isfinite(prod));
      CHECK(std::abs(prod - mirror) < 1e-9 * std::max(1.0, std::abs(prod)));
    }
  }
}

TEST_CASE("automatic gradient matches central differences") {
  // Twenty random instances on ten-date windows, mixing model families.
  const char* ids[4] = {"M1", "GP_100", "GP_111", "LM_110"};
  int checked = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const auto b =
        fixtures::make_bundle(ids[inst % 4], 10, 900 + inst);
    const auto d = b.window(9);
    RngStream rng(100 + inst, 0);
    const Vec x = jittered_theta(b, rng);
    REQUIRE(std::isfinite(inference::log_posterior(b.model, d, x)));

    const Vec ad = gradient::log_posterior_gradient(b.model, d, x);
    const Vec fd = fd_gradient(b.model, d, x);
    const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
    CAPTURE(inst);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      // Relative to the gradient scale; guards tiny-denominator blowups.
      const double denom = std::max(std::abs(fd(i)), 1e-6 * scale);
      CHECK(std::abs(ad(i) - fd(i)) / denom < 1e-4);
    }
    ++checked;
  }
  CHECK(checked == 20);
}

TEST_CASE("gradient is zero where the posterior is flat in a coordinate") {
  // For the yields-only model the feedback and kernel coordinates do not
  // exist; instead check an internal consistency: moving along the gradient
  // increases the posterior for a small step.
  const auto b = fixtures::make_bundle("M1", 12, 4242);
  const auto d = b.window(11);
  RngStream rng(3, 0);
  const Vec x = jittered_theta(b, rng);
  const Vec g = gradient::log_posterior_gradient(b.model, d, x);
  const double f0 = inference::log_posterior(b.model, d, x);
  const double step = 1e-7 / std::max(1.0, g.norm());
  const double f1 = inference::log_posterior(b.model, d, Vec(x + step * g));
  CHECK(f1 > f0);
}
