#include "gpdtsm/theta.hpp"

#include <cmath>

namespace gpdtsm::inference {

namespace {

// Keeps wild proposal coordinates representable; the likelihood of the
// resulting parameter point is clamped to -inf downstream, not here.
double safe_exp(double x) { return std::exp(std::min(x, 300.0)); }

bool parse_mask(const std::string& digits, std::array<bool, 3>& mask) {
  if (digits.size() != 3) return false;
  for (int i = 0; i < 3; ++i) {
    if (digits[static_cast<std::size_t>(i)] == '0')
      mask[static_cast<std::size_t>(i)] = false;
    else if (digits[static_cast<std::size_t>(i)] == '1')
      mask[static_cast<std::size_t>(i)] = true;
    else
      return false;
  }
  return mask[0] || mask[1] || mask[2];
}

}  // namespace

ModelSpec ModelSpec::parse(const std::string& id) {
  ModelSpec spec;
  spec.id = id;
  if (id == "M0") {
    spec.form = ModelForm::yields_only;
    spec.dense_risk = true;
    return spec;
  }
  if (id == "M1") {
    spec.form = ModelForm::yields_only;
    return spec;
  }
  if (id.rfind("GP_", 0) == 0 && parse_mask(id.substr(3), spec.mask)) {
    spec.form = ModelForm::gp;
    return spec;
  }
  if (id.rfind("LM_", 0) == 0 && parse_mask(id.substr(3), spec.mask)) {
    spec.form = ModelForm::linear;
    return spec;
  }
  throw ValidationError("unknown model id '" + id +
                        "' (expected M0, M1, GP_ijk or LM_ijk)");
}

ThetaLayout ThetaLayout::make(const ModelSpec& spec) {
  ThetaLayout l;
  l.n = spec.n_factors;
  l.off_sigma_e2 = 0;
  l.off_kinf = 1;
  l.off_zg = 2;
  l.off_chol = l.off_zg + l.n;
  l.n_chol = l.n * (l.n + 1) / 2;
  l.off_ell = l.off_chol + l.n_chol;
  l.n_ell = spec.form == ModelForm::gp ? spec.n_active() : 0;
  l.off_risk = l.off_ell + l.n_ell;
  if (spec.dense_risk)
    l.n_risk = l.n + l.n * l.n;
  else
    l.n_risk = 1 + (spec.free_lambda0 ? l.n : 0);
  l.off_phipm = l.off_risk + l.n_risk;
  l.n_phipm = spec.form == ModelForm::linear ? spec.n_active() : 0;
  l.dim = l.off_phipm + l.n_phipm;
  return l;
}

std::vector<std::string> ThetaLayout::names(const ModelSpec& spec) const {
  std::vector<std::string> out(static_cast<std::size_t>(dim));
  auto set = [&](int i, std::string s) {
    out[static_cast<std::size_t>(i)] = std::move(s);
  };
  set(off_sigma_e2, "log_sigma_e2");
  set(off_kinf, "k_inf_q");
  for (int j = 0; j < n; ++j)
    set(off_zg + j, j == 0 ? "g1" : "log_gap" + std::to_string(j + 1));
  int k = off_chol;
  for (int c = 0; c < n; ++c)
    for (int r = c; r < n; ++r, ++k)
      set(k, (r == c ? "log_chol_" : "chol_") + std::to_string(r + 1) +
                 std::to_string(c + 1));
  int e = off_ell;
  for (int j = 0; j < 3; ++j)
    if (spec.form == ModelForm::gp && spec.mask[static_cast<std::size_t>(j)])
      set(e++, "log_ell" + std::to_string(j + 1));
  if (spec.dense_risk) {
    for (int j = 0; j < n; ++j) set(off_risk + j, "lam0_" + std::to_string(j + 1));
    for (int c = 0; c < n; ++c)
      for (int r = 0; r < n; ++r)
        set(off_risk + n + c * n + r,
            "lam1_" + std::to_string(r + 1) + std::to_string(c + 1));
  } else {
    set(off_risk, "lam1_12");
    if (spec.free_lambda0)
      for (int j = 0; j < n; ++j)
        set(off_risk + 1 + j, "lam0_" + std::to_string(j + 1));
  }
  int f = off_phipm;
  for (int j = 0; j < 3; ++j)
    if (spec.form == ModelForm::linear &&
        spec.mask[static_cast<std::size_t>(j)])
      set(f++, "phi_pm" + std::to_string(j + 1));
  return out;
}

UnpackedTheta unpack(const Model& m, const Vec& x) {
  const ThetaLayout l = m.layout();
  if (x.size() != l.dim)
    throw ValidationError("parameter vector has wrong length");
  UnpackedTheta u;
  u.qp.sigma_e2 = safe_exp(x(l.off_sigma_e2));
  u.qp.k_inf_q = x(l.off_kinf);
  u.qp.g_q = Vec(l.n);
  u.qp.g_q(0) = x(l.off_zg);
  for (int j = 1; j < l.n; ++j)
    u.qp.g_q(j) = u.qp.g_q(j - 1) - safe_exp(x(l.off_zg + j));
  u.qp.sigma_p_chol = Mat::Zero(l.n, l.n);
  int k = l.off_chol;
  for (int c = 0; c < l.n; ++c)
    for (int r = c; r < l.n; ++r, ++k)
      u.qp.sigma_p_chol(r, c) = r == c ? safe_exp(x(k)) : x(k);

  if (m.spec.form == ModelForm::gp) {
    int e = l.off_ell;
    for (int j = 0; j < 3; ++j)
      if (m.spec.mask[static_cast<std::size_t>(j)]) {
        u.kh.active[static_cast<std::size_t>(j)] = true;
        u.kh.ell_k(j) = safe_exp(x(e++));
        u.kh.sigma_k(j) = m.sigma_k(j);
      }
  }

  u.lambda0 = Vec::Zero(l.n);
  u.lambda1_full = Mat::Zero(l.n, l.n);
  if (m.spec.dense_risk) {
    u.dense_lambda1 = true;
    u.lambda0 = x.segment(l.off_risk, l.n);
    for (int c = 0; c < l.n; ++c)
      u.lambda1_full.col(c) = x.segment(l.off_risk + l.n + c * l.n, l.n);
  } else {
    u.lambda12 = x(l.off_risk);
    if (m.spec.free_lambda0) u.lambda0 = x.segment(l.off_risk + 1, l.n);
  }

  u.phi_pm = Mat::Zero(l.n, 1);
  if (m.spec.form == ModelForm::linear) {
    int f = l.off_phipm;
    for (int j = 0; j < 3 && j < l.n; ++j)
      if (m.spec.mask[static_cast<std::size_t>(j)]) u.phi_pm(j, 0) = x(f++);
  }
  return u;
}

Vec pack(const Model& m, const UnpackedTheta& u) {
  const ThetaLayout l = m.layout();
  Vec x = Vec::Zero(l.dim);
  x(l.off_sigma_e2) = std::log(u.qp.sigma_e2);
  x(l.off_kinf) = u.qp.k_inf_q;
  x(l.off_zg) = u.qp.g_q(0);
  for (int j = 1; j < l.n; ++j)
    x(l.off_zg + j) = std::log(u.qp.g_q(j - 1) - u.qp.g_q(j));
  int k = l.off_chol;
  for (int c = 0; c < l.n; ++c)
    for (int r = c; r < l.n; ++r, ++k)
      x(k) = r == c ? std::log(u.qp.sigma_p_chol(r, c))
                    : u.qp.sigma_p_chol(r, c);
  if (m.spec.form == ModelForm::gp) {
    int e = l.off_ell;
    for (int j = 0; j < 3; ++j)
      if (m.spec.mask[static_cast<std::size_t>(j)])
        x(e++) = std::log(u.kh.ell_k(j));
  }
  if (m.spec.dense_risk) {
    x.segment(l.off_risk, l.n) = u.lambda0;
    for (int c = 0; c < l.n; ++c)
      x.segment(l.off_risk + l.n + c * l.n, l.n) = u.lambda1_full.col(c);
  } else {
    x(l.off_risk) = u.lambda12;
    if (m.spec.free_lambda0) x.segment(l.off_risk + 1, l.n) = u.lambda0;
  }
  if (m.spec.form == ModelForm::linear) {
    int f = l.off_phipm;
    for (int j = 0; j < 3 && j < l.n; ++j)
      if (m.spec.mask[static_cast<std::size_t>(j)]) x(f++) = u.phi_pm(j, 0);
  }
  return x;
}

void prior_normal_moments(const Model& m, Vec& mean, Vec& sd) {
  const ThetaLayout l = m.layout();
  const Priors& p = m.priors;
  mean = Vec::Zero(l.dim);
  sd = Vec::Ones(l.dim);
  mean(l.off_kinf) = p.kinf_mean;
  sd(l.off_kinf) = p.kinf_sd;
  mean(l.off_zg) = p.g1_mean;
  sd(l.off_zg) = p.g1_sd;
  for (int j = 1; j < l.n; ++j) {
    mean(l.off_zg + j) = p.gap_mean;
    sd(l.off_zg + j) = p.gap_sd;
  }
  int k = l.off_chol;
  for (int c = 0; c < l.n; ++c)
    for (int r = c; r < l.n; ++r, ++k) {
      mean(k) = r == c ? p.chol_diag_mean : p.chol_off_mean;
      sd(k) = r == c ? p.chol_diag_sd : p.chol_off_sd;
    }
  for (int e = 0; e < l.n_ell; ++e) {
    mean(l.off_ell + e) = p.log_ell_mean;
    sd(l.off_ell + e) = p.log_ell_sd;
  }
  if (m.spec.dense_risk) {
    for (int j = 0; j < l.n; ++j) {
      mean(l.off_risk + j) = p.lambda0_mean;
      sd(l.off_risk + j) = p.lambda0_sd;
    }
    for (int j = 0; j < l.n * l.n; ++j) {
      mean(l.off_risk + l.n + j) = p.risk_mean;
      sd(l.off_risk + l.n + j) = p.risk_sd;
    }
  } else {
    mean(l.off_risk) = p.risk_mean;
    sd(l.off_risk) = p.risk_sd;
    if (m.spec.free_lambda0)
      for (int j = 0; j < l.n; ++j) {
        mean(l.off_risk + 1 + j) = p.lambda0_mean;
        sd(l.off_risk + 1 + j) = p.lambda0_sd;
      }
  }
  for (int f = 0; f < l.n_phipm; ++f) {
    mean(l.off_phipm + f) = p.phipm_mean;
    sd(l.off_phipm + f) = p.phipm_sd;
  }
}

double log_prior(const Model& m, const Vec& x) {
  const ThetaLayout l = m.layout();
  if (x.size() != l.dim)
    throw ValidationError("parameter vector has wrong length");
  double lp = 0.0;
  const double a = 0.5 * m.priors.sigma_e2_alpha;
  const double b = 0.5 * m.priors.sigma_e2_beta;
  const double z = x(l.off_sigma_e2);
  if (a > 0.0 && b > 0.0)
    // inverse-gamma density of exp(z) plus the log jacobian exp(z)
    lp += a * std::log(b) - std::lgamma(a) - a * z - b * std::exp(-z);
  Vec mean, sd;
  prior_normal_moments(m, mean, sd);
  for (int i = 1; i < l.dim; ++i) {
    const double u = (x(i) - mean(i)) / sd(i);
    lp += -0.5 * kLog2Pi - std::log(sd(i)) - 0.5 * u * u;
  }
  return lp;
}

Vec sample_prior(const Model& m, RngStream& rng) {
  const ThetaLayout l = m.layout();
  const double a = 0.5 * m.priors.sigma_e2_alpha;
  const double b = 0.5 * m.priors.sigma_e2_beta;
  if (a <= 0.0 || b <= 0.0)
    throw ValidationError(
        "sampling from the prior requires a proper sigma_e2 prior "
        "(alpha, beta > 0)");
  Vec mean, sd;
  prior_normal_moments(m, mean, sd);
  Vec x(l.dim);
  x(l.off_sigma_e2) = std::log(b) - std::log(rng.gamma(a, 1.0));
  for (int i = 1; i < l.dim; ++i) x(i) = mean(i) + sd(i) * rng.normal();
  return x;
}

McmcBlocks mcmc_blocks(const ModelSpec& spec) {
  const ThetaLayout l = ThetaLayout::make(spec);
  McmcBlocks b;
  b.q.push_back(l.off_kinf);
  for (int j = 0; j < l.n; ++j) b.q.push_back(l.off_zg + j);
  for (int k = 0; k < l.n_chol; ++k) b.chol.push_back(l.off_chol + k);
  for (int e = 0; e < l.n_ell; ++e) b.rest.push_back(l.off_ell + e);
  for (int r = 0; r < l.n_risk; ++r) b.rest.push_back(l.off_risk + r);
  for (int f = 0; f < l.n_phipm; ++f) b.rest.push_back(l.off_phipm + f);
  return b;
}

}  // namespace gpdtsm::inference
