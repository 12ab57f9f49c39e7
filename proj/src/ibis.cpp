#include "gpdtsm/ibis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "gpdtsm/linalg.hpp"
#include "gpdtsm/parallel.hpp"

namespace gpdtsm::inference {

double logsumexp(const Vec& logv) {
  const double mx = logv.maxCoeff();
  if (!std::isfinite(mx)) return mx;  // all -inf stays -inf
  double acc = 0.0;
  for (Eigen::Index i = 0; i < logv.size(); ++i)
    acc += std::exp(logv(i) - mx);
  return mx + std::log(acc);
}

double ess_of(const Vec& logw) {
  const double mx = logw.maxCoeff();
  if (!std::isfinite(mx)) return 0.0;
  double s1 = 0.0, s2 = 0.0;
  for (Eigen::Index i = 0; i < logw.size(); ++i) {
    const double w = std::exp(logw(i) - mx);
    s1 += w;
    s2 += w * w;
  }
  return s1 * s1 / s2;
}

Vec ParticleSystem::normalized_weights() const {
  const double lse = logsumexp(logw);
  if (!std::isfinite(lse))
    throw NumericalError("particle weights have all collapsed to zero");
  Vec w(logw.size());
  for (Eigen::Index i = 0; i < logw.size(); ++i)
    w(i) = std::exp(logw(i) - lse);
  return w;
}

double ParticleSystem::ess() const { return ess_of(logw); }

void ParticleSystem::moments(Vec& mean, Mat& cov) const {
  weighted_moments(thetas, normalized_weights(), mean, cov);
}

ParticleSystem init_particles(const Model& m, int n_particles,
                              std::uint64_t seed) {
  if (n_particles < 2) throw ValidationError("need at least two particles");
  const int dim = m.layout().dim;
  ParticleSystem ps;
  ps.master_seed = seed;
  ps.system_stream = RngStream(seed, 0);
  ps.streams.reserve(static_cast<std::size_t>(n_particles));
  for (int i = 0; i < n_particles; ++i)
    ps.streams.emplace_back(seed, static_cast<std::uint64_t>(i) + 1);
  ps.thetas = Mat(n_particles, dim);
  for (int i = 0; i < n_particles; ++i)
    ps.thetas.row(i) =
        sample_prior(m, ps.streams[static_cast<std::size_t>(i)]).transpose();
  ps.logw = Vec::Zero(n_particles);
  return ps;
}

std::vector<int> resample_indices(const Vec& norm_w, int n, Resampler kind,
                                  RngStream& rng) {
  const int m = static_cast<int>(norm_w.size());
  Vec cdf(m);
  double acc = 0.0;
  for (int i = 0; i < m; ++i) {
    acc += norm_w(i);
    cdf(i) = acc;
  }
  cdf(m - 1) = 1.0;  // guard against roundoff in the tail

  std::vector<int> idx(static_cast<std::size_t>(n));
  if (kind == Resampler::multinomial) {
    for (int k = 0; k < n; ++k) {
      const double u = rng.uniform();
      idx[static_cast<std::size_t>(k)] = static_cast<int>(
          std::lower_bound(cdf.data(), cdf.data() + m, u) - cdf.data());
    }
  } else {
    const double u0 = rng.uniform() / n;
    int j = 0;
    for (int k = 0; k < n; ++k) {
      const double u = u0 + static_cast<double>(k) / n;
      while (j < m - 1 && cdf(j) < u) ++j;
      idx[static_cast<std::size_t>(k)] = j;
    }
  }
  return idx;
}

namespace {

// Largest phi in (phi_prev, 1] whose partial update keeps the ESS at or
// above the trigger; the caller has already established that phi = 1 fails.
double bisect_phi(const Vec& logw, const Vec& logu, double phi_prev,
                  double trigger, const IbisOptions& opt, bool& fallback) {
  double lo = phi_prev;  // known good (zero-length update)
  double hi = 1.0;       // known breach
  for (int it = 0;
       it < opt.bisect_max_iter && hi - lo > opt.bisect_tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double e = ess_of(logw + (mid - phi_prev) * logu);
    if (e >= trigger)
      lo = mid;
    else
      hi = mid;
  }
  fallback = lo <= phi_prev;
  if (fallback) lo = std::min(1.0, phi_prev + opt.bisect_tol);
  return lo;
}

}  // namespace

void ibis_step(ParticleSystem& ps, const Model& m, const DataWindow& d,
               const IbisOptions& opt) {
  if (d.t_end != ps.t_current + 1)
    throw ValidationError("ibis_step: observations must arrive in order");
  const int n = ps.n_particles();
  const double trigger = opt.ess_alpha * n;

  // Incremental terms at the new observation for every particle.
  std::vector<LikParts> parts(static_cast<std::size_t>(n));
  parallel_for(n, [&](int i) {
    parts[static_cast<std::size_t>(i)] =
        eval_lik(m, d, ps.thetas.row(i).transpose());
  });
  Vec logu(n);
  auto pull_logu = [&]() {
    for (int i = 0; i < n; ++i) {
      const auto& p = parts[static_cast<std::size_t>(i)];
      logu(i) = p.ok ? p.log_u() : -std::numeric_limits<double>::infinity();
    }
  };
  pull_logu();

  double phi_prev = 0.0;
  int round = 0;
  while (true) {
    const Vec logw_full = ps.logw + (1.0 - phi_prev) * logu;
    const double ess_full = ess_of(logw_full);
    const bool breach = ess_full < trigger;
    if (std::getenv("GPDTSM_TRACE") != nullptr)
      std::fprintf(stderr, "[trace] t=%d round=%d phi_prev=%g ess_full=%g\n",
                   d.t_end, round, phi_prev, ess_full);

    double phi = 1.0;
    if (breach) {
      bool fb = false;
      phi = bisect_phi(ps.logw, logu, phi_prev, trigger, opt, fb);
      if (fb) ++ps.n_bisect_fallbacks;
    }

    // Marginal-likelihood increment of this partial update.
    const Vec logw_new = ps.logw + (phi - phi_prev) * logu;
    const double lm = logsumexp(logw_new) - logsumexp(ps.logw);
    if (!std::isfinite(lm))
      throw NumericalError(
          "ibis_step: incremental weights all vanished at t = " +
          std::to_string(d.t_end));
    ps.log_evidence += lm;
    ps.logw = logw_new;

    TemperingRound rec;
    rec.t = d.t_end;
    rec.phi = phi;
    rec.ess_before = ess_full;

    if (!breach && round == 0) {
      // Plain reweighting step; particles keep their positions.
      ps.history.push_back(rec);
      break;
    }

    // Resample and rejuvenate at inverse temperature phi.
    rec.resampled = true;
    ++ps.n_resample_moves;
    Vec mean;
    Mat cov;
    weighted_moments(ps.thetas, ps.normalized_weights(), mean, cov);
    const BlockProposals props = BlockProposals::from_joint(
        m.spec, mean, cov, opt.proposal_dof, opt.proposal_inflate);

    const std::vector<int> anc = resample_indices(
        ps.normalized_weights(), n, opt.resampler, ps.system_stream);
    Mat thetas_new(n, ps.thetas.cols());
    std::vector<LikParts> parts_new(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      thetas_new.row(i) = ps.thetas.row(anc[static_cast<std::size_t>(i)]);
      parts_new[static_cast<std::size_t>(i)] =
          parts[static_cast<std::size_t>(anc[static_cast<std::size_t>(i)])];
    }
    ps.thetas.swap(thetas_new);
    parts.swap(parts_new);
    ps.logw.setZero();

    std::vector<McmcStats> stats(static_cast<std::size_t>(n));
    parallel_for(n, [&](int i) {
      Vec x = ps.thetas.row(i).transpose();
      for (int sweep = 0; sweep < opt.mcmc_sweeps; ++sweep)
        mcmc_step(m, d, phi, props, x, parts[static_cast<std::size_t>(i)],
                  ps.streams[static_cast<std::size_t>(i)],
                  &stats[static_cast<std::size_t>(i)]);
      ps.thetas.row(i) = x.transpose();
    });
    long acc = 0, tries = 0;
    for (const auto& s : stats) {
      acc += s.acc_q + s.acc_chol + s.acc_rest;
      tries += s.try_q + s.try_chol + s.try_rest;
    }
    rec.acc_rate = tries == 0 ? 0.0
                              : static_cast<double>(acc) /
                                    static_cast<double>(tries);
    ps.history.push_back(rec);
    pull_logu();

    if (phi >= 1.0) break;
    phi_prev = phi;
    ++round;
  }
  ps.t_current = d.t_end;
}

}  // namespace gpdtsm::inference
