#pragma once

// Shared fixtures: small synthetic datasets and ready-made model/window
// bundles so each test file can focus on the property under test.

#include <cstdint>
#include <string>

#include "gpdtsm/likelihood.hpp"
#include "gpdtsm/simulate.hpp"
#include "gpdtsm/termstructure.hpp"
#include "gpdtsm/theta.hpp"
#include "gpdtsm/types.hpp"

namespace fixtures {

using namespace gpdtsm;

inline simulate::SimOptions sim_options(const std::string& model, int t) {
  simulate::SimOptions o;
  o.t = t;
  o.maturities = (Vec(11) << 1, 11, 12, 23, 24, 36, 59, 60, 84, 119, 120)
                     .finished();
  o.model = model;
  o.g = (Vec(3) << 0.997, 0.95, 0.85).finished();
  o.sigma_diag = (Vec(3) << 2e-4, 1e-4, 5e-5).finished();
  o.phi_pm = Vec::Zero(3);
  return o;
}

// Owns the storage a DataWindow points into.
struct Bundle {
  simulate::SimTruth truth;
  termstructure::PcPanel panel;
  Vec macro_std;  // standardized over the full sample
  inference::Model model;

  inference::DataWindow window(int t_end) const {
    inference::DataWindow d;
    d.pcs = &panel;
    d.yields = &truth.yields;
    d.macro_kernel = &macro_std;
    d.macro_linear = &truth.macro;
    d.t_end = t_end;
    return d;
  }
};

// Simulated data plus a model wired to the generating rotation, so test
// parameters live in the truth coordinates.
inline Bundle make_bundle(const std::string& model_id, int t,
                          std::uint64_t seed, double sigma_k_active = 4e-4) {
  Bundle b;
  simulate::SimOptions o = sim_options(model_id, t);
  b.truth = simulate::generate(o, seed);

  b.panel.p = b.truth.pcs;
  b.panel.w = b.truth.w_true;
  b.panel.w_perp = b.truth.w_perp;
  b.panel.dates = b.truth.dates;

  const double mean = b.truth.macro.mean();
  const double sd = std::sqrt(
      (b.truth.macro.array() - mean).square().sum() /
      static_cast<double>(b.truth.macro.size() - 1));
  b.macro_std = (b.truth.macro.array() - mean) / sd;

  b.model.spec = inference::ModelSpec::parse(model_id);
  b.model.maturities = b.truth.maturities;
  b.model.w = b.truth.w_true;
  b.model.w_perp = b.truth.w_perp;
  if (b.model.spec.form == inference::ModelForm::gp)
    for (int j = 0; j < 3; ++j)
      if (b.model.spec.mask[static_cast<std::size_t>(j)])
        b.model.sigma_k(j) = sigma_k_active;
  return b;
}

// A valid packed parameter point assembled from the generating truth.
inline Vec theta_from_truth(const Bundle& b) {
  inference::UnpackedTheta u;
  u.qp = b.truth.qp;
  u.kh.ell_k = Vec3::Ones();
  u.kh.sigma_k = Vec3::Zero();
  for (int j = 0; j < 3; ++j) {
    u.kh.active[static_cast<std::size_t>(j)] =
        b.model.spec.form == inference::ModelForm::gp &&
        b.model.spec.mask[static_cast<std::size_t>(j)];
    if (u.kh.active[static_cast<std::size_t>(j)])
      u.kh.sigma_k(j) = b.model.sigma_k(j);
  }
  u.lambda12 = 0.0;
  u.lambda0 = Vec::Zero(3);
  u.phi_pm = Mat::Zero(3, 1);
  u.dense_lambda1 = b.model.spec.dense_risk;
  if (u.dense_lambda1) u.lambda1_full = Mat::Zero(3, 3);
  return inference::pack(b.model, u);
}

}  // namespace fixtures
