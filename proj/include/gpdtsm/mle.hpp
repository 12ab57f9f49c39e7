#pragma once

#include <functional>

#include "gpdtsm/likelihood.hpp"
#include "gpdtsm/types.hpp"

// Posterior-mode search in the transformed coordinates: BFGS with the
// forward-mode gradient, curvature by central finite differences of the
// gradient, and a derivative-free simplex fallback for small problems.
namespace gpdtsm::mle {

struct MleOptions {
  int max_iter = 400;
  double grad_tol = 1e-6;
  double step0 = 0.05;
  double line_tol = 0.1;
  double fd_h = 1e-4;          // curvature difference step
  double eig_floor = 1e-8;     // curvature eigenvalue floor
  int nm_polish_iter = 0;      // optional simplex polish after BFGS
};

struct MleResult {
  Vec x;
  double logpost = 0.0;
  Mat hessian;  // of the negative log posterior, symmetrized
  Mat cov;      // floored inverse curvature
  int iters = 0;
  bool converged = false;
  bool floored = false;  // curvature needed flooring or a diagonal fallback
};

MleResult maximize_posterior(const inference::Model& m,
                             const inference::DataWindow& d, const Vec& x0,
                             const MleOptions& opt = {});

// Curvature and floored covariance around an arbitrary point (used when the
// proposal is rebuilt at particle means rather than at the optimum).
void curvature_at(const inference::Model& m, const inference::DataWindow& d,
                  const Vec& x, const MleOptions& opt, Mat& hessian, Mat& cov,
                  bool& floored);

// Generic Nelder-Mead minimizer (derivative-free), returning the best point.
Vec nelder_mead(const std::function<double(const Vec&)>& f, const Vec& x0,
                const Vec& step, int max_iter = 500, double size_tol = 1e-6,
                double* f_best = nullptr);

// Data-driven starting point: measurement variance from the PC fit residual,
// eigenvalues and innovation factor from an unrestricted first-order fit of
// the PCs, neutral kernel and risk-price coordinates.
Vec initial_guess(const inference::Model& m, const inference::DataWindow& d);

}  // namespace gpdtsm::mle
