#include "gpdtsm/mle.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <cmath>

#include "gpdtsm/gradient.hpp"
#include "gpdtsm/linalg.hpp"
#include "gpdtsm/theta.hpp"

namespace gpdtsm::mle {

namespace {

void gsl_quiet() {
  static auto* old = gsl_set_error_handler_off();
  (void)old;
}

struct Objective {
  const inference::Model* m;
  const inference::DataWindow* d;

  double value(const Vec& x) const {
    try {
      const double v = gradient::mirror_log_posterior(*m, *d, x);
      return std::isfinite(v) ? -v : 1e300;
    } catch (const ValidationError&) {
      return 1e300;
    } catch (const NumericalError&) {
      return 1e300;
    }
  }
  Vec grad(const Vec& x) const {
    try {
      Vec g = -gradient::log_posterior_gradient(*m, *d, x);
      if (!g.allFinite()) g.setZero();
      return g;
    } catch (const ValidationError&) {
      return Vec::Zero(x.size());
    } catch (const NumericalError&) {
      return Vec::Zero(x.size());
    }
  }
};

Vec from_gsl(const gsl_vector* v) {
  Vec x(static_cast<Eigen::Index>(v->size));
  for (std::size_t i = 0; i < v->size; ++i)
    x(static_cast<Eigen::Index>(i)) = gsl_vector_get(v, i);
  return x;
}

double gsl_f(const gsl_vector* v, void* params) {
  return static_cast<const Objective*>(params)->value(from_gsl(v));
}

void gsl_df(const gsl_vector* v, void* params, gsl_vector* g) {
  const Vec gr = static_cast<const Objective*>(params)->grad(from_gsl(v));
  for (Eigen::Index i = 0; i < gr.size(); ++i)
    gsl_vector_set(g, static_cast<std::size_t>(i), gr(i));
}

void gsl_fdf(const gsl_vector* v, void* params, double* f, gsl_vector* g) {
  *f = gsl_f(v, params);
  gsl_df(v, params, g);
}

struct NmWrap {
  const std::function<double(const Vec&)>* f;
};

double nm_f(const gsl_vector* v, void* params) {
  const auto* w = static_cast<const NmWrap*>(params);
  try {
    const double val = (*w->f)(from_gsl(v));
    return std::isfinite(val) ? val : 1e300;
  } catch (const ValidationError&) {
    return 1e300;
  } catch (const NumericalError&) {
    return 1e300;
  }
}

}  // namespace

Vec nelder_mead(const std::function<double(const Vec&)>& f, const Vec& x0,
                const Vec& step, int max_iter, double size_tol,
                double* f_best) {
  gsl_quiet();
  const std::size_t n = static_cast<std::size_t>(x0.size());
  NmWrap wrap{&f};
  gsl_multimin_function func;
  func.n = n;
  func.f = nm_f;
  func.params = &wrap;

  gsl_vector* gx = gsl_vector_alloc(n);
  gsl_vector* gs = gsl_vector_alloc(n);
  for (std::size_t i = 0; i < n; ++i) {
    gsl_vector_set(gx, i, x0(static_cast<Eigen::Index>(i)));
    gsl_vector_set(gs, i, step(static_cast<Eigen::Index>(i)));
  }
  gsl_multimin_fminimizer* s =
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_multimin_fminimizer_set(s, &func, gx, gs);

  int iter = 0;
  int status = GSL_CONTINUE;
  while (status == GSL_CONTINUE && iter < max_iter) {
    ++iter;
    if (gsl_multimin_fminimizer_iterate(s) != 0) break;
    status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), size_tol);
  }
  Vec best = from_gsl(s->x);
  if (f_best != nullptr) *f_best = s->fval;
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(gx);
  gsl_vector_free(gs);
  return best;
}

void curvature_at(const inference::Model& m, const inference::DataWindow& d,
                  const Vec& x, const MleOptions& opt, Mat& hessian, Mat& cov,
                  bool& floored) {
  const Objective obj{&m, &d};
  const Eigen::Index dim = x.size();
  hessian = Mat(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    const double h = opt.fd_h * std::max(1.0, std::abs(x(j)));
    Vec xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    hessian.col(j) = (obj.grad(xp) - obj.grad(xm)) / (2.0 * h);
  }
  hessian = 0.5 * (hessian + hessian.transpose()).eval();
  if (!hessian.allFinite()) {
    // diagonal fallback from second differences of the objective
    const double f0 = obj.value(x);
    hessian.setZero();
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double h = opt.fd_h * std::max(1.0, std::abs(x(j)));
      Vec xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      const double second =
          (obj.value(xp) - 2.0 * f0 + obj.value(xm)) / (h * h);
      hessian(j, j) = std::isfinite(second) ? second : opt.eig_floor;
    }
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(hessian);
  if (es.info() != Eigen::Success)
    throw NumericalError("curvature eigendecomposition failed");
  floored = es.eigenvalues().minCoeff() < opt.eig_floor;
  const Vec ev = es.eigenvalues().cwiseMax(opt.eig_floor);
  cov = es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
        es.eigenvectors().transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();
}

MleResult maximize_posterior(const inference::Model& m,
                             const inference::DataWindow& d, const Vec& x0,
                             const MleOptions& opt) {
  gsl_quiet();
  const Objective obj{&m, &d};
  const std::size_t n = static_cast<std::size_t>(x0.size());

  gsl_multimin_function_fdf func;
  func.n = n;
  func.f = gsl_f;
  func.df = gsl_df;
  func.fdf = gsl_fdf;
  func.params = const_cast<Objective*>(&obj);

  gsl_vector* gx = gsl_vector_alloc(n);
  for (std::size_t i = 0; i < n; ++i)
    gsl_vector_set(gx, i, x0(static_cast<Eigen::Index>(i)));
  gsl_multimin_fdfminimizer* s = gsl_multimin_fdfminimizer_alloc(
      gsl_multimin_fdfminimizer_vector_bfgs2, n);
  gsl_multimin_fdfminimizer_set(s, &func, gx, opt.step0, opt.line_tol);

  MleResult out;
  int status = GSL_CONTINUE;
  while (status == GSL_CONTINUE && out.iters < opt.max_iter) {
    ++out.iters;
    const int it = gsl_multimin_fdfminimizer_iterate(s);
    if (it != 0) break;  // no further progress along the line
    status = gsl_multimin_test_gradient(s->gradient, opt.grad_tol);
  }
  out.converged = status == GSL_SUCCESS;
  out.x = from_gsl(s->x);
  gsl_multimin_fdfminimizer_free(s);
  gsl_vector_free(gx);

  if (opt.nm_polish_iter > 0) {
    const Vec step = Vec::Constant(x0.size(), 0.01);
    double fb = 0.0;
    const Vec polished = nelder_mead(
        [&obj](const Vec& x) { return obj.value(x); }, out.x, step,
        opt.nm_polish_iter, 1e-8, &fb);
    if (fb < obj.value(out.x)) out.x = polished;
  }
  out.logpost = -obj.value(out.x);
  curvature_at(m, d, out.x, opt, out.hessian, out.cov, out.floored);
  return out;
}

Vec initial_guess(const inference::Model& m, const inference::DataWindow& d) {
  const auto l = m.layout();
  const Mat& p = d.pcs->p;
  const Mat& y = *d.yields;
  const int t_end = d.t_end;
  const int n = l.n;
  if (t_end < n + 2)
    throw ValidationError("initial_guess: window too short");

  // Unrestricted first-order fit of the PCs for the innovation factor.
  const int rows = t_end;  // transitions 1..t_end
  Mat xreg(rows, n + 1);
  Mat yreg(rows, n);
  for (int t = 1; t <= t_end; ++t) {
    xreg(t - 1, 0) = 1.0;
    xreg.row(t - 1).tail(n) = p.row(t - 1).head(n);
    yreg.row(t - 1) = p.row(t).head(n);
  }
  const Mat xtx = xreg.transpose() * xreg;
  const Mat beta = xtx.ldlt().solve(xreg.transpose() * yreg);
  const Mat resid = yreg - xreg * beta;
  Mat sigma = resid.transpose() * resid / std::max(1, rows - n - 1);
  const Mat chol = chol_with_retry(make_pd(sigma), "initial innovation factor").matrixL();

  // Measurement variance from the reconstruction error in the W_perp span.
  double ss = 0.0;
  int cnt = 0;
  const Vec ybar = y.topRows(t_end + 1).colwise().mean();
  for (int t = 0; t <= t_end; ++t) {
    const Vec z = m.w_perp * (y.row(t).transpose() - ybar);
    ss += z.squaredNorm();
    cnt += static_cast<int>(z.size());
  }
  const double sigma_e2 = std::max(ss / std::max(1, cnt), 1e-14);

  Vec x = Vec::Zero(l.dim);
  x(l.off_sigma_e2) = std::log(sigma_e2);
  Vec g(n);
  for (int j = 0; j < n; ++j) g(j) = 0.998 * std::pow(0.93, j);
  x(l.off_zg) = g(0);
  for (int j = 1; j < n; ++j) x(l.off_zg + j) = std::log(g(j - 1) - g(j));
  const double ybar_short = y.topRows(t_end + 1).col(0).mean();
  x(l.off_kinf) = std::max(1e-6, ybar_short * (1.0 - g(0)));
  int k = l.off_chol;
  for (int c = 0; c < n; ++c)
    for (int r = c; r < n; ++r, ++k)
      x(k) = r == c ? std::log(chol(r, c)) : chol(r, c);
  // Kernel, risk-price and feedback coordinates start at zero.
  return x;
}

}  // namespace gpdtsm::mle
