#pragma once

#include <array>
#include <string>
#include <vector>

#include "gpdtsm/gpkernel.hpp"
#include "gpdtsm/rng.hpp"
#include "gpdtsm/termstructure.hpp"
#include "gpdtsm/types.hpp"

// Parameter plumbing: model identifiers, the packed transformed parameter
// vector, prior densities and prior sampling.  All samplers and optimizers
// work on the transformed coordinates (logs for positive parameters, an
// ordered-gap reparameterization for the Q eigenvalue vector).
namespace gpdtsm::inference {

enum class ModelForm { yields_only, gp, linear };

struct ModelSpec {
  ModelForm form = ModelForm::yields_only;
  std::array<bool, 3> mask{};   // active kernel blocks / macro feedback rows
  bool dense_risk = false;      // all N + N^2 risk-price entries free ("M0")
  bool free_lambda0 = false;    // free intercept prices alongside lambda12
  int n_factors = 3;
  std::string id = "M1";

  bool has_macro() const {
    return form != ModelForm::yields_only && (mask[0] || mask[1] || mask[2]);
  }
  int n_active() const {
    return (mask[0] ? 1 : 0) + (mask[1] ? 1 : 0) + (mask[2] ? 1 : 0);
  }
  // "M0", "M1", "GP_ijk", "LM_ijk" with ijk binary digits, at least one set.
  static ModelSpec parse(const std::string& id);
};

// Coordinate offsets inside the packed vector.
struct ThetaLayout {
  int n = 3;
  int dim = 0;
  int off_sigma_e2 = 0;  // log sigma_e2
  int off_kinf = 1;
  int off_zg = 2;        // n entries: g1 = z1, g_{j+1} = g_j - exp(z_{j+1})
  int off_chol = 0;      // n(n+1)/2, lower column-major, log on the diagonal
  int n_chol = 0;
  int off_ell = 0;       // one log length-scale per active kernel block
  int n_ell = 0;
  int off_risk = 0;      // lambda12 | lambda0+vec(lambda1) when dense
  int n_risk = 0;
  int off_phipm = 0;     // linear-form feedback entries, masked rows in order
  int n_phipm = 0;

  static ThetaLayout make(const ModelSpec& spec);
  std::vector<std::string> names(const ModelSpec& spec) const;
};

// Prior hyperparameters on the transformed coordinates.  sigma_e2 carries an
// inverse-gamma(alpha/2, beta/2) prior on the natural scale (the conjugate
// family of the measurement-error update); everything else is normal.
struct Priors {
  double sigma_e2_alpha = 6.0;
  double sigma_e2_beta = 1e-8;
  double kinf_mean = 0.0, kinf_sd = 0.05;
  double g1_mean = 0.97, g1_sd = 0.3;
  double gap_mean = -3.5, gap_sd = 1.5;  // log of eigenvalue gaps
  double chol_diag_mean = -8.0, chol_diag_sd = 2.0;
  double chol_off_mean = 0.0, chol_off_sd = 0.01;
  double log_ell_mean = 0.0, log_ell_sd = 1.0;
  double risk_mean = 0.0, risk_sd = 0.5;
  double lambda0_mean = 0.0, lambda0_sd = 0.01;
  double phipm_mean = 0.0, phipm_sd = 0.1;
};

// Everything fixed during inference: identifiers, the frozen PC rotation,
// the maturity grid, tuned kernel scales and prior hyperparameters.
struct Model {
  ModelSpec spec;
  Priors priors;
  Vec maturities;  // months, matches the yield panel columns
  Mat w;           // N x J PC weights
  Mat w_perp;      // (J-N) x J annihilator
  Vec sigma_k = Vec::Zero(3);  // tuned kernel scales, fixed during inference
  bool gibbs_resid_dof_jr = false;  // compat: J-R instead of J-N per date

  ThetaLayout layout() const { return ThetaLayout::make(spec); }
};

struct UnpackedTheta {
  termstructure::QParams qp;
  gpkernel::KernelHypers kh;  // ell from theta, sigma from Model::sigma_k
  double lambda12 = 0.0;
  Vec lambda0;        // n, zeros unless free
  Mat lambda1_full;   // n x n, only with dense risk prices
  bool dense_lambda1 = false;
  Mat phi_pm;         // n x 1, zeros unless linear form
};

UnpackedTheta unpack(const Model& m, const Vec& x);
Vec pack(const Model& m, const UnpackedTheta& u);

double log_prior(const Model& m, const Vec& x);
Vec sample_prior(const Model& m, RngStream& rng);

// Normal prior moments for every coordinate above index 0 (sigma_e2 is
// inverse-gamma and handled separately wherever the prior is evaluated).
void prior_normal_moments(const Model& m, Vec& mean, Vec& sd);

// Metropolis blocks: (q) eigenvalue side, (chol) innovation factor,
// (rest) kernel length-scales, risk prices and feedback entries.
struct McmcBlocks {
  std::vector<int> q, chol, rest;
};
McmcBlocks mcmc_blocks(const ModelSpec& spec);

}  // namespace gpdtsm::inference
