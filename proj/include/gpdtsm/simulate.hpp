#pragma once

// Synthetic data generator drawing from the model itself: a stationary AR(1)
// macro path, a latent mean-shift path (Gaussian-process draw or linear
// feedback, per the model id), the PC vector autoregression, and a yield
// panel priced off the PCs with measurement noise confined to the
// PC-orthogonal directions.  The generating PC rotation comes from the
// singular vectors of the latent yield loadings, so the PCs are exactly
// recoverable from noise-free yields.

#include <cstdint>
#include <string>
#include <vector>

#include "gpdtsm/config.hpp"
#include "gpdtsm/termstructure.hpp"
#include "gpdtsm/theta.hpp"
#include "gpdtsm/types.hpp"

namespace gpdtsm::simulate {

struct SimOptions {
  int t = 200;            // number of monthly dates
  Vec maturities;         // months, ascending
  std::string model = "GP_100";
  double k_inf_q = 1e-5;  // monthly decimal
  Vec g;                  // strictly decreasing in (0,1)
  Vec sigma_diag;         // PC innovation standard deviations
  double sigma_e = 2e-5;  // measurement noise sd, monthly decimal
  double macro_rho = 0.9;
  double macro_sd = 1.0;
  double gp_c = 4e-4;     // latent-function signal scale
  double gp_ell = 1.0;    // length-scale in raw macro units
  double lambda12 = 0.0;  // slope-to-level risk price
  Vec phi_pm;             // linear-form macro feedback (3)
  std::string start_date = "1990-01-01";
  Vec fixed_macro;        // when non-empty, use this path instead of drawing

  static SimOptions from_config(const config::RunConfig& cfg);
};

struct SimTruth {
  std::vector<std::string> dates;
  Vec maturities;
  Mat yields;   // T x J monthly decimal, includes measurement noise
  Vec macro;    // T raw values
  Mat pcs;      // T x 3 true state path
  Mat w_true;   // 3 x J generating rotation
  Mat w_perp;   // (J-3) x J orthogonal complement
  Mat v;        // (T-1) x 3 latent shift, row t-1 feeds the move into date t
  Vec mu_p;     // P-measure drift actually used
  Mat phi_p;    // P-measure feedback actually used
  termstructure::QParams qp;
  inference::ModelSpec spec;
  std::uint64_t seed = 0;
};

SimTruth generate(const SimOptions& opt, std::uint64_t seed);

// Emits yields.csv, macros.csv, w_true.csv and truth.json into out_dir.
void write_outputs(const SimTruth& truth, const std::string& out_dir);

}  // namespace gpdtsm::simulate
