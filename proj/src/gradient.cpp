#include "gpdtsm/gradient.hpp"

#include <cmath>
#include <unsupported/Eigen/AutoDiff>
#include <utility>

namespace gpdtsm::gradient {

namespace {

template <typename S>
using VecS = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using MatS = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

inline double value_of(double x) { return x; }
template <typename D>
double value_of(const Eigen::AutoDiffScalar<D>& x) {
  return x.value();
}

// All matrix algebra below is written as coefficient loops: Eigen's dense
// kernels do not mix AutoDiffScalar expressions with plain constants safely.

template <typename S>
MatS<S> mul_dm(const Mat& a, const MatS<S>& b) {
  MatS<S> out(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      S acc(0.0);
      for (Eigen::Index k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

template <typename S>
MatS<S> mul_mm(const MatS<S>& a, const MatS<S>& b) {
  MatS<S> out(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      S acc(0.0);
      for (Eigen::Index k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

template <typename S>
MatS<S> transpose_m(const MatS<S>& a) {
  MatS<S> out(a.cols(), a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

// Partial-pivot Gaussian elimination solving a X = b.
template <typename S>
MatS<S> lu_solve(MatS<S> a, MatS<S> b) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.cols();
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index piv = c;
    double best = std::abs(value_of(a(c, c)));
    for (Eigen::Index r = c + 1; r < n; ++r) {
      const double v = std::abs(value_of(a(r, c)));
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (!(best > 0.0)) throw NumericalError("lu_solve: singular matrix");
    if (piv != c) {
      for (Eigen::Index k = 0; k < n; ++k) std::swap(a(c, k), a(piv, k));
      for (Eigen::Index k = 0; k < m; ++k) std::swap(b(c, k), b(piv, k));
    }
    for (Eigen::Index r = c + 1; r < n; ++r) {
      const S f = a(r, c) / a(c, c);
      for (Eigen::Index k = c + 1; k < n; ++k) a(r, k) -= f * a(c, k);
      for (Eigen::Index k = 0; k < m; ++k) b(r, k) -= f * b(c, k);
      a(r, c) = S(0.0);
    }
  }
  for (Eigen::Index c = n - 1; c >= 0; --c)
    for (Eigen::Index k = 0; k < m; ++k) {
      S acc = b(c, k);
      for (Eigen::Index j = c + 1; j < n; ++j) acc -= a(c, j) * b(j, k);
      b(c, k) = acc / a(c, c);
    }
  return b;
}

template <typename S>
struct DenseChol {
  MatS<S> l;

  explicit DenseChol(const MatS<S>& a) : l(a.rows(), a.rows()) {
    using std::sqrt;
    const Eigen::Index n = a.rows();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) l(i, j) = S(0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      S d = a(j, j);
      for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
      if (!(value_of(d) > 0.0))
        throw NumericalError("dense cholesky: matrix not positive definite");
      l(j, j) = sqrt(d);
      for (Eigen::Index i = j + 1; i < n; ++i) {
        S s = a(i, j);
        for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
        l(i, j) = s / l(j, j);
      }
    }
  }

  VecS<S> forward(const VecS<S>& b) const {
    const Eigen::Index n = l.rows();
    VecS<S> z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      S acc = b(i);
      for (Eigen::Index k = 0; k < i; ++k) acc -= l(i, k) * z(k);
      z(i) = acc / l(i, i);
    }
    return z;
  }

  S half_logdet() const {
    using std::log;
    S acc(0.0);
    for (Eigen::Index j = 0; j < l.rows(); ++j) acc += log(l(j, j));
    return acc;
  }

  // -dim/2 log 2pi - (1/2) log|A| - (1/2) b' A^{-1} b
  S gauss_logpdf(const VecS<S>& b) const {
    const VecS<S> z = forward(b);
    S quad(0.0);
    for (Eigen::Index i = 0; i < z.size(); ++i) quad += z(i) * z(i);
    return -0.5 * static_cast<double>(l.rows()) * kLog2Pi - half_logdet() -
           0.5 * quad;
  }
};

template <typename S>
S mirror(const inference::Model& m, const inference::DataWindow& d,
         const VecS<S>& x) {
  using std::exp;
  using std::log;
  const auto& spec = m.spec;
  const auto l = m.layout();
  const int n = l.n;
  if (x.size() != l.dim)
    throw ValidationError("parameter vector has wrong length");
  const Mat& w = m.w;
  const Mat& wp = m.w_perp;
  const Mat& p = d.pcs->p;
  const Mat& y = *d.yields;
  const int t_end = d.t_end;
  const Eigen::Index j_count = m.maturities.size();
  const int n_max = static_cast<int>(m.maturities(j_count - 1));

  // --- transformed coordinates ---
  const S sigma_e2 = exp(x(l.off_sigma_e2));
  const S kinf = x(l.off_kinf);
  VecS<S> g(n);
  g(0) = x(l.off_zg);
  for (int j = 1; j < n; ++j) g(j) = g(j - 1) - exp(x(l.off_zg + j));
  MatS<S> chol_p(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) chol_p(i, j) = S(0.0);
  {
    int k = l.off_chol;
    for (int c = 0; c < n; ++c)
      for (int r = c; r < n; ++r, ++k)
        chol_p(r, c) = r == c ? S(exp(x(k))) : x(k);
  }

  // --- yield loadings: slope recursion first, it pins the latent factor ---
  MatS<S> b_y(j_count, n);
  {
    VecS<S> b(n);
    for (int i = 0; i < n; ++i) b(i) = S(-1.0);
    Eigen::Index next = 0;
    for (int nn = 1; nn <= n_max; ++nn) {
      if (next < j_count && m.maturities(next) == nn) {
        for (int i = 0; i < n; ++i) b_y(next, i) = -b(i) / double(nn);
        ++next;
      }
      for (int i = 0; i < n; ++i) b(i) = g(i) * b(i) - 1.0;
    }
  }
  const MatS<S> wb = mul_dm(w, b_y);
  const MatS<S> sigma_x = lu_solve(wb, chol_p);
  MatS<S> ssx(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      S acc(0.0);
      for (int k = 0; k < n; ++k) acc += sigma_x(i, k) * sigma_x(j, k);
      ssx(i, j) = acc;
    }

  VecS<S> a_y(j_count);
  {
    S a(0.0);
    VecS<S> b(n);
    for (int i = 0; i < n; ++i) b(i) = S(-1.0);
    Eigen::Index next = 0;
    for (int nn = 1; nn <= n_max; ++nn) {
      if (next < j_count && m.maturities(next) == nn) {
        a_y(next) = -a / double(nn);
        ++next;
      }
      S quad(0.0);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) quad += b(i) * ssx(i, j) * b(j);
      a = a + b(0) * kinf + 0.5 * quad;
      for (int i = 0; i < n; ++i) b(i) = g(i) * b(i) - 1.0;
    }
  }

  // --- rotation onto the PCs ---
  VecS<S> wa(n);
  for (int i = 0; i < n; ++i) {
    S acc(0.0);
    for (Eigen::Index k = 0; k < j_count; ++k) acc += w(i, k) * a_y(k);
    wa(i) = acc;
  }
  const MatS<S> wb_t = transpose_m(wb);
  const MatS<S> b_p = transpose_m(lu_solve(wb_t, transpose_m(b_y)));
  VecS<S> a_p(j_count);
  for (Eigen::Index r = 0; r < j_count; ++r) {
    S acc = a_y(r);
    for (int i = 0; i < n; ++i) acc -= b_p(r, i) * wa(i);
    a_p(r) = acc;
  }
  MatS<S> wbg(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) wbg(i, j) = wb(i, j) * g(j);
  const MatS<S> phi_p_q = transpose_m(lu_solve(wb_t, transpose_m(wbg)));
  VecS<S> mu_p_q(n);
  for (int i = 0; i < n; ++i) {
    S acc = wb(i, 0) * kinf + wa(i);
    for (int j = 0; j < n; ++j) acc -= phi_p_q(i, j) * wa(j);
    mu_p_q(i) = acc;
  }

  // --- cross-section terms ---
  S ll(0.0);
  {
    const Eigen::Index dim_err = wp.rows();
    VecS<S> za(dim_err);
    MatS<S> zb(dim_err, n);
    for (Eigen::Index r = 0; r < dim_err; ++r) {
      S acc(0.0);
      for (Eigen::Index k = 0; k < j_count; ++k) acc += wp(r, k) * a_p(k);
      za(r) = acc;
      for (int i = 0; i < n; ++i) {
        S acc2(0.0);
        for (Eigen::Index k = 0; k < j_count; ++k)
          acc2 += wp(r, k) * b_p(k, i);
        zb(r, i) = acc2;
      }
    }
    S ss(0.0);
    for (int t = 0; t <= t_end; ++t)
      for (Eigen::Index r = 0; r < dim_err; ++r) {
        double wy = 0.0;
        for (Eigen::Index k = 0; k < j_count; ++k) wy += wp(r, k) * y(t, k);
        S resid = wy - za(r);
        for (int i = 0; i < n; ++i) resid -= zb(r, i) * p(t, i);
        ss += resid * resid;
      }
    ll += -0.5 * static_cast<double>((t_end + 1) * dim_err) *
              (kLog2Pi + log(sigma_e2)) -
          0.5 * ss / sigma_e2;
  }

  // --- transition terms ---
  VecS<S> mu_pp(n);
  MatS<S> phi_pp = phi_p_q;
  for (int i = 0; i < n; ++i) mu_pp(i) = mu_p_q(i);
  if (spec.dense_risk) {
    for (int i = 0; i < n; ++i) mu_pp(i) += x(l.off_risk + i);
    for (int c = 0; c < n; ++c)
      for (int r = 0; r < n; ++r)
        phi_pp(r, c) += x(l.off_risk + n + c * n + r);
  } else {
    phi_pp(0, 1) += x(l.off_risk);
    if (spec.free_lambda0)
      for (int i = 0; i < n; ++i) mu_pp(i) += x(l.off_risk + 1 + i);
  }
  MatS<S> phi_pm(n, 1);
  for (int i = 0; i < n; ++i) phi_pm(i, 0) = S(0.0);
  if (spec.form == inference::ModelForm::linear) {
    int f = l.off_phipm;
    for (int j = 0; j < 3 && j < n; ++j)
      if (spec.mask[static_cast<std::size_t>(j)]) phi_pm(j, 0) = x(f++);
  }

  if (t_end >= 1) {
    const int t_len = t_end;
    MatS<S> resid(t_len, n);
    for (int t = 1; t <= t_len; ++t)
      for (int i = 0; i < n; ++i) {
        S acc = p(t, i) - mu_pp(i);
        for (int j = 0; j < n; ++j) acc -= phi_pp(i, j) * p(t - 1, j);
        if (spec.form == inference::ModelForm::linear)
          acc -= phi_pm(i, 0) * (*d.macro_linear)(t - 1);
        resid(t - 1, i) = acc;
      }

    bool kernel_live = false;
    if (spec.form == inference::ModelForm::gp)
      for (int j = 0; j < 3; ++j)
        if (spec.mask[static_cast<std::size_t>(j)] && m.sigma_k(j) > 0.0)
          kernel_live = true;

    MatS<S> ssp(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        S acc(0.0);
        for (int k = 0; k < n; ++k) acc += chol_p(i, k) * chol_p(j, k);
        ssp(i, j) = acc;
      }

    if (kernel_live) {
      VecS<S> ell(3);
      {
        int e = l.off_ell;
        for (int j = 0; j < 3; ++j)
          ell(j) = spec.mask[static_cast<std::size_t>(j)] ? S(exp(x(e++)))
                                                          : S(1.0);
      }
      const int dim = n * t_len;
      MatS<S> kp(dim, dim);
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) kp(i, j) = S(0.0);
      for (int bj = 0; bj < n; ++bj)
        for (int bk = 0; bk < n; ++bk)
          for (int a = 0; a < t_len; ++a) {
            if (bj == bk && bj < 3 &&
                spec.mask[static_cast<std::size_t>(bj)] &&
                m.sigma_k(bj) > 0.0) {
              const double sig = m.sigma_k(bj);
              for (int b = 0; b < t_len; ++b) {
                const double dm =
                    (*d.macro_kernel)(a) - (*d.macro_kernel)(b);
                kp(bj * t_len + a, bk * t_len + b) +=
                    sig * sig *
                    exp(-(dm * dm) / (2.0 * ell(bj) * ell(bj)));
              }
            }
            kp(bj * t_len + a, bk * t_len + a) += ssp(bj, bk);
          }
      VecS<S> s(dim);
      for (int j = 0; j < n; ++j)
        for (int t = 0; t < t_len; ++t) s(j * t_len + t) = resid(t, j);
      ll += DenseChol<S>(kp).gauss_logpdf(s);
    } else {
      const DenseChol<S> c3(ssp);
      VecS<S> st(n);
      for (int t = 0; t < t_len; ++t) {
        for (int i = 0; i < n; ++i) st(i) = resid(t, i);
        ll += c3.gauss_logpdf(st);
      }
    }
  }

  // --- prior ---
  {
    const double a = 0.5 * m.priors.sigma_e2_alpha;
    const double b = 0.5 * m.priors.sigma_e2_beta;
    if (a > 0.0 && b > 0.0)
      ll += a * std::log(b) - std::lgamma(a) - a * x(l.off_sigma_e2) -
            b * exp(-x(l.off_sigma_e2));
    Vec mean, sd;
    inference::prior_normal_moments(m, mean, sd);
    for (int i = 1; i < l.dim; ++i) {
      const S u = (x(i) - mean(i)) / sd(i);
      ll += -0.5 * kLog2Pi - std::log(sd(i)) - 0.5 * u * u;
    }
  }
  return ll;
}

}  // namespace

double mirror_log_posterior(const inference::Model& m,
                            const inference::DataWindow& d, const Vec& x) {
  return mirror<double>(m, d, x);
}

Vec log_posterior_gradient(const inference::Model& m,
                           const inference::DataWindow& d, const Vec& x) {
  using AD = Eigen::AutoDiffScalar<Eigen::VectorXd>;
  const int dim = static_cast<int>(x.size());
  VecS<AD> xad(dim);
  for (int i = 0; i < dim; ++i) xad(i) = AD(x(i), dim, i);
  const AD out = mirror<AD>(m, d, xad);
  if (out.derivatives().size() == 0) return Vec::Zero(dim);
  return out.derivatives();
}

}  // namespace gpdtsm::gradient
