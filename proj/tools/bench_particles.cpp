// Throughput benchmark: full-population likelihood evaluation with the
// OpenMP particle loop versus the serial reference path.  The two paths must
// produce bit-identical results; the benchmark prints the checksums so a
// mismatch is immediately visible.

#include <chrono>
#include <cstdio>

#include <CLI11.hpp>

#include "gpdtsm/ibis.hpp"
#include "gpdtsm/likelihood.hpp"
#include "gpdtsm/parallel.hpp"
#include "gpdtsm/simulate.hpp"

using namespace gpdtsm;

namespace {

double time_sweep(const inference::Model& m, const inference::DataWindow& d,
                  const Mat& thetas, int reps, double& checksum) {
  const auto n = thetas.rows();
  Vec targets(n);
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) {
    parallel_for(n, [&](std::ptrdiff_t i) {
      targets(i) =
          inference::eval_lik(m, d, thetas.row(i).transpose()).target(1.0);
    });
  }
  const auto stop = std::chrono::steady_clock::now();
  checksum = targets.sum();
  return std::chrono::duration<double>(stop - start).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"particle-loop throughput: OpenMP vs serial reference"};
  int n_particles = 256, t_len = 100, reps = 3;
  std::uint64_t seed = 7;
  app.add_option("--particles", n_particles, "population size");
  app.add_option("--t", t_len, "number of months");
  app.add_option("--reps", reps, "evaluation sweeps per timing");
  app.add_option("--seed", seed, "rng seed");
  CLI11_PARSE(app, argc, argv);

  simulate::SimOptions opts;
  opts.t = t_len;
  opts.maturities = (Vec(7) << 1, 6, 12, 24, 36, 60, 120).finished();
  opts.model = "GP_100";
  opts.g = (Vec(3) << 0.997, 0.95, 0.85).finished();
  opts.sigma_diag = (Vec(3) << 2e-4, 1e-4, 5e-5).finished();
  const auto truth = simulate::generate(opts, seed);

  termstructure::PcPanel pcs;
  pcs.dates = truth.dates;
  pcs.w = truth.w_true;
  pcs.w_perp = truth.w_perp;
  pcs.p = truth.yields * truth.w_true.transpose();

  inference::Model m;
  m.spec = inference::ModelSpec::parse("GP_100");
  m.maturities = truth.maturities;
  m.w = pcs.w;
  m.w_perp = pcs.w_perp;
  m.sigma_k = Vec::Zero(3);
  m.sigma_k(0) = opts.gp_c;

  const double mean = truth.macro.mean();
  const double sd = std::sqrt((truth.macro.array() - mean).square().mean());
  const Vec macro_std = (truth.macro.array() - mean) / sd;

  inference::DataWindow d;
  d.pcs = &pcs;
  d.yields = &truth.yields;
  d.macro_kernel = &macro_std;
  d.macro_linear = &truth.macro;
  d.t_end = t_len - 1;

  auto ps = inference::init_particles(m, n_particles, seed);

  std::printf("threads available: %d\n", max_threads());
  double sum_serial = 0.0, sum_parallel = 0.0;

  use_parallel() = false;
  const double warm = [&] {
    double c;
    return time_sweep(m, d, ps.thetas, 1, c);
  }();
  (void)warm;
  const double t_serial = time_sweep(m, d, ps.thetas, reps, sum_serial);

  use_parallel() = true;
  const double t_parallel = time_sweep(m, d, ps.thetas, reps, sum_parallel);

  const double evals = double(n_particles) * reps;
  std::printf("serial   : %8.3f s  (%8.1f evals/s)  checksum %.17g\n",
              t_serial, evals / t_serial, sum_serial);
  std::printf("parallel : %8.3f s  (%8.1f evals/s)  checksum %.17g\n",
              t_parallel, evals / t_parallel, sum_parallel);
  std::printf("speedup  : %.2fx\n", t_serial / t_parallel);
  if (sum_serial != sum_parallel) {
    std::printf("MISMATCH: serial and parallel checksums differ\n");
    return 1;
  }
  std::printf("checksums identical\n");
  return 0;
}
