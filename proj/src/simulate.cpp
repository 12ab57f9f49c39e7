#include "gpdtsm/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "gpdtsm/data.hpp"
#include "gpdtsm/gpkernel.hpp"
#include "gpdtsm/gpou.hpp"
#include "gpdtsm/linalg.hpp"
#include "gpdtsm/rng.hpp"

namespace gpdtsm::simulate {

namespace {

std::string next_month(const std::string& iso) {
  int y = std::stoi(iso.substr(0, 4));
  int m = std::stoi(iso.substr(5, 2));
  const std::string day = iso.substr(8, 2);
  if (++m > 12) {
    m = 1;
    ++y;
  }
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%s", y, m, day.c_str());
  return buf;
}

nlohmann::json to_json(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

nlohmann::json to_json(const Mat& m) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(row);
  }
  return a;
}

}  // namespace

SimOptions SimOptions::from_config(const config::RunConfig& cfg) {
  SimOptions o;
  o.t = cfg.sim_t;
  o.maturities = Eigen::Map<const Vec>(cfg.sim_maturities.data(),
                                       Eigen::Index(cfg.sim_maturities.size()));
  o.model = cfg.model;
  o.k_inf_q = cfg.sim_k_inf_q;
  o.g = Eigen::Map<const Vec>(cfg.sim_g.data(), Eigen::Index(cfg.sim_g.size()));
  o.sigma_diag = Eigen::Map<const Vec>(cfg.sim_sigma_diag.data(),
                                       Eigen::Index(cfg.sim_sigma_diag.size()));
  o.sigma_e = cfg.sim_sigma_e;
  o.macro_rho = cfg.sim_macro_rho;
  o.macro_sd = cfg.sim_macro_sd;
  o.gp_c = cfg.sim_gp_c;
  o.gp_ell = cfg.sim_gp_ell;
  o.lambda12 = cfg.sim_lambda12;
  o.phi_pm = Eigen::Map<const Vec>(cfg.sim_phi_pm.data(),
                                   Eigen::Index(cfg.sim_phi_pm.size()));
  o.start_date = cfg.sim_start_date;
  return o;
}

SimTruth generate(const SimOptions& opt, std::uint64_t seed) {
  const int n = 3;
  if (opt.t < 4) throw ValidationError("simulate: need at least 4 dates");
  if (opt.g.size() != n || opt.sigma_diag.size() != n)
    throw ValidationError("simulate: g and sigma_diag must have 3 entries");
  if (opt.maturities.size() < n + 1)
    throw ValidationError("simulate: need at least 4 maturities");
  if (opt.sigma_e <= 0 || opt.sigma_diag.minCoeff() <= 0)
    throw ValidationError("simulate: noise scales must be positive");
  if (std::abs(opt.macro_rho) >= 1.0)
    throw ValidationError("simulate: |macro_rho| must be < 1");
  if (opt.fixed_macro.size() != 0 && opt.fixed_macro.size() != opt.t)
    throw ValidationError("simulate: fixed_macro length must equal sim_t");

  SimTruth tr;
  tr.seed = seed;
  tr.spec = inference::ModelSpec::parse(opt.model);
  tr.maturities = opt.maturities;

  tr.qp.k_inf_q = opt.k_inf_q;
  tr.qp.g_q = opt.g;
  tr.qp.sigma_p_chol = opt.sigma_diag.asDiagonal();
  tr.qp.sigma_e2 = opt.sigma_e * opt.sigma_e;
  tr.qp.validate();

  // Generating rotation: left singular vectors of the latent yield loadings.
  // W B_X is then invertible by construction and W has orthonormal rows, so
  // the orthogonal complement carries the measurement noise.
  const auto latent = termstructure::compute_latent_loadings(
      tr.qp, tr.maturities, Mat::Identity(n, n));
  Eigen::JacobiSVD<Mat> svd(latent.b_x, Eigen::ComputeFullU);
  const auto j = tr.maturities.size();
  Mat u = svd.matrixU();
  for (Eigen::Index c = 0; c < n; ++c) {  // sign convention as in PCA
    Eigen::Index arg = 0;
    u.col(c).cwiseAbs().maxCoeff(&arg);
    if (u(arg, c) < 0) u.col(c) = -u.col(c);
  }
  tr.w_true = u.leftCols(n).transpose();
  tr.w_perp = u.rightCols(j - n).transpose();

  const auto loadings =
      termstructure::model_loadings(tr.qp, tr.w_true, tr.maturities);
  const auto pd = gpou::build_p_dynamics(loadings.mu_p_q, loadings.phi_p_q,
                                         tr.qp.sigma_p_chol, opt.lambda12);
  tr.mu_p = pd.mu_p_p;
  tr.phi_p = pd.phi_p_p;
  const Eigen::EigenSolver<Mat> es(tr.phi_p);
  if (es.eigenvalues().cwiseAbs().maxCoeff() >= 1.0)
    throw ValidationError(
        "simulate: P-measure feedback is explosive; reduce g or lambda12");

  RngStream rng(seed, 0);
  const auto t_len = Eigen::Index(opt.t);

  // Macro path (stationary AR(1)), drawn first so a fixed path leaves the
  // remaining draw sequence unchanged across replications.
  if (opt.fixed_macro.size() == opt.t) {
    tr.macro = opt.fixed_macro;
  } else {
    tr.macro.resize(t_len);
    tr.macro(0) = opt.macro_sd * rng.normal();
    const double innov_sd =
        opt.macro_sd * std::sqrt(1.0 - opt.macro_rho * opt.macro_rho);
    for (Eigen::Index t = 1; t < t_len; ++t)
      tr.macro(t) = opt.macro_rho * tr.macro(t - 1) + innov_sd * rng.normal();
  }

  // Latent shift path over the T-1 transitions, driven by the lagged macro.
  tr.v = Mat::Zero(t_len - 1, n);
  const Vec inputs = tr.macro.head(t_len - 1);
  if (tr.spec.form == inference::ModelForm::gp && tr.spec.has_macro()) {
    gpkernel::KernelHypers kh;
    kh.ell_k = Vec3::Constant(opt.gp_ell);
    kh.sigma_k = Vec3::Constant(opt.gp_c);
    kh.active = tr.spec.mask;
    const auto cov = gpkernel::build_block_K(inputs, kh);
    for (int b = 0; b < n; ++b) {
      if (!kh.active[std::size_t(b)]) continue;
      Mat kb = cov.blocks[std::size_t(b)];
      kb.diagonal().array() += 1e-10 * opt.gp_c * opt.gp_c;
      const auto llt = chol_with_retry(kb, "simulate: latent gram");
      Vec z(t_len - 1);
      for (Eigen::Index t = 0; t < z.size(); ++t) z(t) = rng.normal();
      tr.v.col(b) = Mat(llt.matrixL()) * z;
    }
  } else if (tr.spec.form == inference::ModelForm::linear &&
             tr.spec.has_macro()) {
    if (opt.phi_pm.size() != n)
      throw ValidationError("simulate: phi_pm must have 3 entries");
    for (int b = 0; b < n; ++b)
      if (tr.spec.mask[std::size_t(b)]) tr.v.col(b) = opt.phi_pm(b) * inputs;
  }

  // PC path from the stationary mean, then yields with orthogonal noise.
  tr.pcs.resize(t_len, n);
  tr.pcs.row(0) =
      ((Mat::Identity(n, n) - tr.phi_p).lu().solve(tr.mu_p)).transpose();
  for (Eigen::Index t = 1; t < t_len; ++t) {
    Vec z(n);
    for (int i = 0; i < n; ++i) z(i) = rng.normal();
    tr.pcs.row(t) = (tr.mu_p + tr.phi_p * tr.pcs.row(t - 1).transpose() +
                     tr.v.row(t - 1).transpose() + tr.qp.sigma_p_chol * z)
                        .transpose();
  }

  tr.yields = termstructure::model_yields(loadings, tr.pcs);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    Vec eta(j - n);
    for (Eigen::Index i = 0; i < eta.size(); ++i)
      eta(i) = opt.sigma_e * rng.normal();
    tr.yields.row(t) += (tr.w_perp.transpose() * eta).transpose();
  }

  tr.dates.resize(std::size_t(opt.t));
  tr.dates[0] = opt.start_date;
  for (std::size_t i = 1; i < tr.dates.size(); ++i)
    tr.dates[i] = next_month(tr.dates[i - 1]);
  return tr;
}

void write_outputs(const SimTruth& truth, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  data::write_yields_csv(out_dir + "/yields.csv", truth.dates,
                         truth.maturities, truth.yields);
  data::write_macro_csv(out_dir + "/macros.csv", truth.dates, "macro",
                        truth.macro);
  data::write_matrix_csv(out_dir + "/w_true.csv", truth.w_true);

  nlohmann::json doc;
  doc["model"] = truth.spec.id;
  doc["seed"] = truth.seed;
  doc["k_inf_q"] = truth.qp.k_inf_q;
  doc["g"] = to_json(truth.qp.g_q);
  doc["sigma_chol"] = to_json(truth.qp.sigma_p_chol);
  doc["sigma_e2"] = truth.qp.sigma_e2;
  doc["mu_p"] = to_json(truth.mu_p);
  doc["phi_p"] = to_json(truth.phi_p);
  doc["macro"] = to_json(truth.macro);
  doc["v"] = to_json(truth.v);
  doc["pcs"] = to_json(truth.pcs);
  doc["w_true"] = to_json(truth.w_true);
  std::ofstream out(out_dir + "/truth.json");
  if (!out) throw ValidationError("cannot write '" + out_dir + "/truth.json'");
  out << doc.dump(1) << "\n";
}

}  // namespace gpdtsm::simulate
