#pragma once

// Flat key=value run configuration ('#' starts a comment line).  Every
// tunable constant of the pipeline appears here with its default; unknown
// keys are rejected so typos cannot silently fall back to defaults.

#include <cstdint>
#include <string>
#include <vector>

#include "gpdtsm/theta.hpp"
#include "gpdtsm/types.hpp"

namespace gpdtsm::config {

struct RunConfig {
  // paths
  std::string yields_csv;
  std::string macros_csv;
  std::string weights_csv;  // optional fixed PC weights; empty = PCA
  std::string out_dir = "results";

  // model / data
  std::string model = "M1";
  std::string train_end;            // ISO date; empty = whole sample in-sample
  std::vector<double> maturities;   // months subset; empty = all columns

  // sequential inference
  int n_particles = 2000;
  double ess_alpha = 0.7;
  int mcmc_sweeps = 5;
  double bisect_tol = 0.01;
  std::string resampler = "multinomial";  // or "systematic"
  double proposal_dof = 5.0;
  double proposal_inflate = 1.0;
  std::uint64_t seed = 1;
  int checkpoint_every = 1;  // out-of-sample steps between checkpoints

  // priors
  inference::Priors priors;

  // portfolio / evaluation
  std::vector<double> rx_maturities{24, 60, 120};
  double gamma = 3.0;
  int nw_lags = -1;  // -1 = automatic floor(4 (T/100)^{2/9})
  std::string eval_bench_ledger;  // optional ledger whose forecasts replace EH

  // behavior switches
  bool fill_missing_legs = false;   // model-fill observed-return legs
  bool gibbs_resid_dof_jr = false;  // legacy residual-dof convention
  bool free_lambda0 = false;        // free intercept risk prices

  // kernel-scale tuning
  int tune_max_iter = 400;
  int tune_nm_iter = 600;

  // synthetic generator
  int sim_t = 200;
  double sim_k_inf_q = 1e-5;
  std::vector<double> sim_g{0.997, 0.95, 0.85};
  std::vector<double> sim_sigma_diag{2e-4, 1e-4, 5e-5};
  double sim_sigma_e = 2e-5;
  double sim_macro_rho = 0.9;
  double sim_macro_sd = 1.0;
  double sim_gp_c = 4e-4;
  double sim_gp_ell = 1.0;
  double sim_lambda12 = 0.0;
  std::vector<double> sim_phi_pm{0, 0, 0};
  std::vector<double> sim_maturities{1, 11, 12, 23, 24, 36, 59, 60, 84, 119, 120};
  std::string sim_start_date = "1990-01-01";
};

RunConfig parse_file(const std::string& path);
RunConfig parse_string(const std::string& text);

// Canonical rendering: every key, fixed order, current values.  Writing this
// next to the results makes reruns auditable and is itself deterministic.
std::string echo(const RunConfig& cfg);

}  // namespace gpdtsm::config
