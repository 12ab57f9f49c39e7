#include <doctest.h>

#include <cmath>

#include "gpdtsm/gpkernel.hpp"
#include "gpdtsm/types.hpp"

using namespace gpdtsm;
using gpkernel::GpCov;
using gpkernel::KernelHypers;

TEST_CASE("squared-exponential kernel values") {
  const double ell = 0.7, sigma = 1.3;
  CHECK(gpkernel::sqexp(0.4, 0.4, ell, sigma) ==
        doctest::Approx(sigma * sigma).epsilon(1e-15));
  const double d = 0.9;
  const double expect = sigma * sigma * std::exp(-d * d / (2.0 * ell * ell));
  CHECK(gpkernel::sqexp(1.0, 1.0 + d, ell, sigma) ==
        doctest::Approx(expect).epsilon(1e-15));
  CHECK(gpkernel::sqexp(1.0 + d, 1.0, ell, sigma) ==
        doctest::Approx(expect).epsilon(1e-15));  // symmetry
  // Monotone decay in distance.
  CHECK(gpkernel::sqexp(0.0, 0.5, ell, sigma) >
        gpkernel::sqexp(0.0, 1.0, ell, sigma));
}

TEST_CASE("gram blocks: layout, inactivity, values") {
  KernelHypers kh;
  kh.active = {true, false, true};
  kh.ell_k = (Vec3() << 0.8, 1.0, 1.4).finished();
  kh.sigma_k = (Vec3() << 0.5, 0.0, 0.2).finished();
  kh.validate();

  const Vec m = (Vec(4) << -1.0, 0.2, 0.5, 2.0).finished();
  const GpCov cov = gpkernel::build_block_K(m, kh);

  CHECK(cov.t_len() == 4);
  CHECK(cov.k.rows() == 12);
  CHECK_FALSE(cov.all_zero());
  CHECK(cov.blocks[1].cwiseAbs().maxCoeff() == 0.0);

  for (int b : {0, 2}) {
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const double expect =
            gpkernel::sqexp(m(i), m(j), kh.ell_k(b), kh.sigma_k(b));
        CHECK(cov.blocks[static_cast<std::size_t>(b)](i, j) ==
              doctest::Approx(expect).epsilon(1e-15));
        // Equation-major full matrix holds the block at [4b, 4b).
        CHECK(cov.k(4 * b + i, 4 * b + j) ==
              doctest::Approx(expect).epsilon(1e-15));
      }
  }
  // Off-diagonal blocks of the full matrix are zero (independent outputs).
  CHECK(cov.k.block(0, 4, 4, 4).cwiseAbs().maxCoeff() == 0.0);
  CHECK((cov.k - cov.k.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cross pieces toward the next input") {
  KernelHypers kh;
  kh.active = {false, true, false};
  kh.ell_k = (Vec3() << 1.0, 0.6, 1.0).finished();
  kh.sigma_k = (Vec3() << 0.0, 0.9, 0.0).finished();

  const Vec m = (Vec(3) << 0.1, -0.4, 1.2).finished();
  const double m_next = 0.7;
  Mat3 k0;
  Mat k_next;
  gpkernel::build_cross_K(m, m_next, kh, k0, k_next);

  CHECK(k_next.rows() == 9);
  CHECK(k_next.cols() == 3);
  CHECK(k0(1, 1) == doctest::Approx(0.81).epsilon(1e-15));
  CHECK(k0(0, 0) == 0.0);
  CHECK(k0(2, 2) == 0.0);
  CHECK(k0(0, 1) == 0.0);

  for (int t = 0; t < 3; ++t) {
    CHECK(k_next(3 + t, 1) ==
          doctest::Approx(gpkernel::sqexp(m(t), m_next, 0.6, 0.9))
              .epsilon(1e-15));
    CHECK(k_next(t, 0) == 0.0);
    CHECK(k_next(6 + t, 2) == 0.0);
  }
  // Column of an active block is zero outside its own row range.
  CHECK(k_next.col(1).head(3).cwiseAbs().maxCoeff() == 0.0);
  CHECK(k_next.col(1).tail(3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hyperparameter validation") {
  KernelHypers kh;
  kh.active = {true, false, false};
  kh.sigma_k = (Vec3() << -0.1, 0.0, 0.0).finished();
  CHECK_THROWS_AS(kh.validate(), ValidationError);
  kh.sigma_k = (Vec3() << 0.5, 0.0, 0.0).finished();
  kh.ell_k(0) = 0.0;
  CHECK_THROWS_AS(kh.validate(), ValidationError);
  kh.ell_k(0) = 1.0;
  CHECK_NOTHROW(kh.validate());
  CHECK(kh.any_active());
}

TEST_CASE("no active blocks means an all-zero covariance") {
  KernelHypers kh;  // defaults: inactive everywhere
  const Vec m = (Vec(2) << 0.0, 1.0).finished();
  const GpCov cov = gpkernel::build_block_K(m, kh);
  CHECK(cov.all_zero());
  CHECK(cov.k.cwiseAbs().maxCoeff() == 0.0);
  CHECK_FALSE(kh.any_active());
}
