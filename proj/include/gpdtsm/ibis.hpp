#pragma once

#include <cstdint>
#include <vector>

#include "gpdtsm/likelihood.hpp"
#include "gpdtsm/mcmc.hpp"
#include "gpdtsm/rng.hpp"
#include "gpdtsm/theta.hpp"

// Sequential posterior updating over the data index: reweight by the
// incremental likelihood, and on effective-sample-size breaches bridge the
// update through adaptively bisected partial powers, resampling and
// rejuvenating the particles at each bridge step.  The marginal-likelihood
// estimate chains across bridge steps.
namespace gpdtsm::inference {

enum class Resampler { multinomial, systematic };

struct IbisOptions {
  int n_particles = 2000;
  double ess_alpha = 0.7;  // breach threshold as a fraction of N
  int mcmc_sweeps = 5;
  double bisect_tol = 0.01;
  int bisect_max_iter = 50;
  Resampler resampler = Resampler::multinomial;
  double proposal_dof = 5.0;
  double proposal_inflate = 1.0;
};

struct TemperingRound {
  int t = 0;
  double phi = 1.0;
  double ess_before = 0.0;  // ESS of the tested full-chunk update
  double acc_rate = 0.0;    // jitter acceptance rate, 0 when no move ran
  bool resampled = false;
};

struct ParticleSystem {
  Mat thetas;  // n_particles x dim
  Vec logw;
  std::vector<RngStream> streams;  // one stream per particle slot
  RngStream system_stream;         // serial draws (resampling)
  std::uint64_t master_seed = 0;
  int t_current = -1;  // newest data index incorporated
  double log_evidence = 0.0;
  std::vector<TemperingRound> history;
  long n_resample_moves = 0;
  long n_bisect_fallbacks = 0;

  int n_particles() const { return static_cast<int>(thetas.rows()); }
  Vec normalized_weights() const;
  double ess() const;
  void moments(Vec& mean, Mat& cov) const;
};

ParticleSystem init_particles(const Model& m, int n_particles,
                              std::uint64_t seed);

// Incorporate observation d.t_end, which must equal ps.t_current + 1.
void ibis_step(ParticleSystem& ps, const Model& m, const DataWindow& d,
               const IbisOptions& opt);

double ess_of(const Vec& logw);
double logsumexp(const Vec& logv);

std::vector<int> resample_indices(const Vec& norm_w, int n, Resampler kind,
                                  RngStream& rng);

}  // namespace gpdtsm::inference
