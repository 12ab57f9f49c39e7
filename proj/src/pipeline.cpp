#include "gpdtsm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gpdtsm/checkpoint.hpp"
#include "gpdtsm/evaluation.hpp"
#include "gpdtsm/forecast.hpp"
#include "gpdtsm/gpou.hpp"
#include "gpdtsm/parallel.hpp"

namespace gpdtsm::pipeline {

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
std::string g12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  return out;
}

template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("stage ") + name + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("stage ") + name + ": " + e.what());
  }
}

Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), Eigen::Index(v.size()));
}

// Orthonormal basis of the null space of w (rows annihilating w's rows).
Mat null_space_rows(const Mat& w) {
  Eigen::JacobiSVD<Mat> svd(w, Eigen::ComputeFullV);
  const auto j = w.cols();
  const auto n = w.rows();
  return svd.matrixV().rightCols(j - n).transpose();
}

}  // namespace

int DataAudit::request(const std::string& stage_name, int requested,
                       int allowed) {
  ++n_checks;
  if (requested > allowed) {
    violations.push_back({stage_name, requested, allowed});
    return allowed;
  }
  return requested;
}

inference::DataWindow PipelineContext::window(int t_end, int allowed,
                                              const std::string& stage_name) {
  inference::DataWindow d;
  d.pcs = &pcs;
  d.yields = &panel.yields;
  d.macro_kernel = &panel.macro_kernel;
  d.macro_linear = &panel.macro_raw;
  d.t_end = audit.request(stage_name, t_end, allowed);
  return d;
}

inference::IbisOptions ibis_options(const config::RunConfig& cfg) {
  inference::IbisOptions opt;
  opt.n_particles = cfg.n_particles;
  opt.ess_alpha = cfg.ess_alpha;
  opt.mcmc_sweeps = cfg.mcmc_sweeps;
  opt.bisect_tol = cfg.bisect_tol;
  if (cfg.resampler == "multinomial")
    opt.resampler = inference::Resampler::multinomial;
  else if (cfg.resampler == "systematic")
    opt.resampler = inference::Resampler::systematic;
  else
    throw ValidationError("resampler must be 'multinomial' or 'systematic', got '" +
                          cfg.resampler + "'");
  opt.proposal_dof = cfg.proposal_dof;
  opt.proposal_inflate = cfg.proposal_inflate;
  return opt;
}

std::string checkpoint_dir(const config::RunConfig& cfg) {
  return cfg.out_dir + "/checkpoints";
}

PipelineContext prepare(const config::RunConfig& cfg) {
  PipelineContext ctx;
  ctx.cfg = cfg;

  auto spec = inference::ModelSpec::parse(cfg.model);
  spec.free_lambda0 = cfg.free_lambda0;

  const bool standardize =
      spec.form == inference::ModelForm::gp && spec.has_macro();
  if (cfg.yields_csv.empty() || cfg.macros_csv.empty())
    throw ValidationError("config must set yields_csv and macros_csv");
  ctx.panel = data::load_panel(cfg.yields_csv, cfg.macros_csv, cfg.train_end,
                               standardize, cfg.maturities);

  const int n = spec.n_factors;
  const int j = ctx.panel.n_maturities();
  if (j < n + 1)
    throw ValidationError("need at least " + std::to_string(n + 1) +
                          " maturities for " + std::to_string(n) +
                          " factors plus measurement directions");

  if (!cfg.weights_csv.empty()) {
    const Mat w = data::read_matrix_csv(cfg.weights_csv);
    if (w.rows() != n || w.cols() != j)
      throw ValidationError("weights file must be " + std::to_string(n) + "x" +
                            std::to_string(j) + ", got " +
                            std::to_string(w.rows()) + "x" +
                            std::to_string(w.cols()));
    ctx.pcs.w = w;
    ctx.pcs.w_perp = null_space_rows(w);
  } else {
    const auto train_pcs = termstructure::extract_pcs(
        ctx.panel.yields.topRows(ctx.panel.t_train_end + 1), n);
    ctx.pcs.w = train_pcs.w;
    ctx.pcs.w_perp = train_pcs.w_perp;
  }
  ctx.pcs.dates = ctx.panel.dates;
  ctx.pcs.p = ctx.panel.yields * ctx.pcs.w.transpose();

  ctx.model.spec = spec;
  ctx.model.priors = cfg.priors;
  ctx.model.maturities = ctx.panel.maturities;
  ctx.model.w = ctx.pcs.w;
  ctx.model.w_perp = ctx.pcs.w_perp;
  ctx.model.sigma_k = Vec::Zero(3);
  ctx.model.gibbs_resid_dof_jr = cfg.gibbs_resid_dof_jr;

  ctx.fingerprint = data::fingerprint(ctx.panel);
  return ctx;
}

void run_tune(PipelineContext& ctx) {
  if (ctx.model.spec.form != inference::ModelForm::gp ||
      !ctx.model.spec.has_macro())
    throw ValidationError("kernel-scale tuning requires a GP model id");
  mle::MleOptions opt;
  opt.max_iter = ctx.cfg.tune_max_iter;
  const auto train =
      ctx.window(ctx.panel.t_train_end, ctx.panel.t_train_end, "tune");
  ctx.tune = tuning::tune_sigma_k(ctx.model, train, opt, ctx.cfg.tune_nm_iter);
  ctx.tuned = true;
  ctx.model.sigma_k = ctx.tune.sigma_k;

  auto out = open_out(ctx.cfg.out_dir + "/tune.csv");
  out << "block,active,sigma_k,ell_hat,resid_sd,c_hat\n";
  for (int b = 0; b < 3; ++b)
    out << (b + 1) << ','
        << (ctx.model.spec.mask[std::size_t(b)] ? 1 : 0) << ','
        << g17(ctx.tune.sigma_k(b)) << ',' << g17(ctx.tune.ell_hat(b)) << ','
        << g17(ctx.tune.resid_sd(b)) << ',' << g17(ctx.tune.c_hat) << "\n";
}

namespace {

// --- realized excess returns with the optional model fill ----------------

Eigen::Index grid_index(const Vec& grid, double months) {
  for (Eigen::Index k = 0; k < grid.size(); ++k)
    if (grid(k) == months) return k;
  return -1;
}

double leg_yield(PipelineContext& ctx, const inference::ParticleSystem* ps,
                 int row, double months) {
  const auto k = grid_index(ctx.panel.maturities, months);
  if (k >= 0) return ctx.panel.yields(row, k);
  if (ctx.cfg.fill_missing_legs && ps != nullptr)
    return forecast::particle_mean_yield(*ps, ctx.model,
                                         ctx.pcs.p.row(row).transpose(),
                                         months);
  throw ValidationError(
      "observed excess return needs the " +
      std::to_string(static_cast<long>(months)) + "-month yield at " +
      ctx.panel.dates[std::size_t(row)] +
      "; supply an interpolated panel or set fill_missing_legs=true");
}

// rx resolving at origin+1 for an n-month bond held one month.
double observed_rx(PipelineContext& ctx, const inference::ParticleSystem* ps,
                   int origin, double n_months, int allowed,
                   const std::string& stage_name) {
  ctx.audit.request(stage_name, origin + 1, allowed);
  if (n_months == 1.0) return 0.0;
  const double y1 = leg_yield(ctx, ps, origin, 1.0);
  const double yn = leg_yield(ctx, ps, origin, n_months);
  const double yn1 = leg_yield(ctx, ps, origin + 1, n_months - 1.0);
  return -(n_months - 1.0) * yn1 + n_months * yn - y1;
}

std::string eh_history_path(const config::RunConfig& cfg) {
  return checkpoint_dir(cfg) + "/eh_train_history.csv";
}

// Benchmark-history prefill over training resolutions 1..t_train_end.  Uses
// the end-of-training posterior for any model-filled leg, so it is computed
// once, persisted, and reused verbatim by resumed runs.
std::vector<std::vector<double>> compute_train_history(
    PipelineContext& ctx, const inference::ParticleSystem& ps) {
  const int t0 = ctx.panel.t_train_end;
  std::vector<std::vector<double>> hist(ctx.cfg.rx_maturities.size());
  for (int res = 1; res <= t0; ++res)
    for (std::size_t k = 0; k < hist.size(); ++k)
      hist[k].push_back(observed_rx(ctx, &ps, res - 1,
                                    ctx.cfg.rx_maturities[k], t0,
                                    "eh-history"));
  return hist;
}

void write_train_history(const config::RunConfig& cfg,
                         const std::vector<std::vector<double>>& hist) {
  auto out = open_out(eh_history_path(cfg));
  out << "maturity,seq,rx\n";
  for (std::size_t k = 0; k < hist.size(); ++k)
    for (std::size_t i = 0; i < hist[k].size(); ++i)
      out << static_cast<long>(cfg.rx_maturities[k]) << ',' << i << ','
          << g17(hist[k][i]) << "\n";
}

std::vector<std::vector<double>> read_train_history(
    const config::RunConfig& cfg) {
  const std::string path = eh_history_path(cfg);
  std::ifstream in(path);
  if (!in)
    throw ValidationError("missing '" + path +
                          "'; run the training stage first");
  std::vector<std::vector<double>> hist(cfg.rx_maturities.size());
  std::string line;
  std::getline(in, line);  // header
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string m, seq, rx;
    if (!std::getline(ss, m, ',') || !std::getline(ss, seq, ',') ||
        !std::getline(ss, rx, ','))
      throw ValidationError(path + ": malformed row " + std::to_string(row));
    const double months = std::strtod(m.c_str(), nullptr);
    bool found = false;
    for (std::size_t k = 0; k < hist.size(); ++k) {
      if (cfg.rx_maturities[k] == months) {
        hist[k].push_back(std::strtod(rx.c_str(), nullptr));
        found = true;
        break;
      }
    }
    if (!found)
      throw ValidationError(path + ": row " + std::to_string(row) +
                            " has maturity " + m +
                            " not in rx_maturities (config changed?)");
  }
  return hist;
}

void save_step(PipelineContext& ctx, const inference::ParticleSystem& ps,
               const Ledger& ledger, const std::string& name) {
  const std::string dir = checkpoint_dir(ctx.cfg);
  io::save_checkpoint(dir + "/" + name + ".ckpt", ps, ctx.model,
                      ctx.fingerprint);
  write_ledger_csv(dir + "/" + name + ".ledger.csv", ledger);
  auto latest = open_out(dir + "/latest.txt");
  latest << name << ".ckpt\n";
}

}  // namespace

inference::ParticleSystem run_train(PipelineContext& ctx) {
  std::filesystem::create_directories(checkpoint_dir(ctx.cfg));
  auto ps = inference::init_particles(ctx.model, ctx.cfg.n_particles,
                                      ctx.cfg.seed);
  continue_train(ctx, ps);
  return ps;
}

void continue_train(PipelineContext& ctx, inference::ParticleSystem& ps) {
  const int t0 = ctx.panel.t_train_end;
  const auto opt = ibis_options(ctx.cfg);
  for (int t = ps.t_current + 1; t <= t0; ++t) {
    const auto d = ctx.window(t, t0, "train");
    inference::ibis_step(ps, ctx.model, d, opt);
  }
  save_step(ctx, ps, Ledger{}, "train");
  write_train_history(ctx.cfg, compute_train_history(ctx, ps));
}

Ledger run_oos(PipelineContext& ctx, inference::ParticleSystem& ps,
               Ledger ledger) {
  const int t0 = ctx.panel.t_train_end;
  const int t_max = ctx.panel.n_obs() - 1;
  const auto& rxm = ctx.cfg.rx_maturities;
  if (rxm.empty()) throw ValidationError("rx_maturities must not be empty");
  for (double m : rxm)
    if (m < 1)
      throw ValidationError("rx maturities must be at least 1 month");
  if (grid_index(ctx.panel.maturities, 1.0) < 0)
    throw ValidationError(
        "panel must include the 1-month column m1 (riskless leg)");
  if (ps.t_current < t0)
    throw ValidationError("posterior has only absorbed data through index " +
                          std::to_string(ps.t_current) +
                          "; train through the split first");
  const auto done = std::size_t(ps.t_current - t0) * rxm.size();
  if (ledger.rows.size() != done)
    throw ValidationError("ledger has " + std::to_string(ledger.rows.size()) +
                          " rows but the checkpoint implies " +
                          std::to_string(done));

  auto hist = read_train_history(ctx.cfg);
  for (const auto& row : ledger.rows) {
    for (std::size_t k = 0; k < rxm.size(); ++k)
      if (rxm[k] == row.maturity) hist[k].push_back(row.rx_obs);
  }

  const auto opt = ibis_options(ctx.cfg);
  const Eigen::Index rf_idx = grid_index(ctx.panel.maturities, 1.0);
  const Vec rx_vec = to_vec(rxm);

  for (int t = ps.t_current; t < t_max; ++t) {
    const std::string& origin = ctx.panel.dates[std::size_t(t)];
    const std::string& target = ctx.panel.dates[std::size_t(t) + 1];

    auto dwin = ctx.window(t, t, "forecast " + origin);
    const auto draws =
        forecast::predict_excess_returns(ps, ctx.model, dwin, rx_vec);
    const double rf = ctx.panel.yields(t, rf_idx);

    for (std::size_t k = 0; k < rxm.size(); ++k) {
      LedgerRow row;
      row.origin_date = origin;
      row.target_date = target;
      row.maturity = rxm[k];
      row.rf = rf;
      row.f_model = draws.point_rx(Eigen::Index(k));
      if (hist[k].empty())
        throw ValidationError(
            "no realized-return history for the expanding-mean benchmark at " +
            origin);
      const Vec hv = to_vec(hist[k]);
      row.f_bench = hv.mean();
      row.w_model = evaluation::optimal_weight(
          draws.weights, draws.rx_draws.col(Eigen::Index(k)), ctx.cfg.gamma,
          rf);
      row.w_bench = evaluation::optimal_weight(Vec::Ones(hv.size()), hv,
                                               ctx.cfg.gamma, rf);
      row.rx_obs = observed_rx(ctx, &ps, t, rxm[k], t + 1, "resolve " + target);
      row.r_model =
          evaluation::realized_portfolio_return(row.w_model, rf, row.rx_obs);
      row.r_bench =
          evaluation::realized_portfolio_return(row.w_bench, rf, row.rx_obs);
      ledger.rows.push_back(row);
      hist[k].push_back(row.rx_obs);
    }

    const auto up = ctx.window(t + 1, t + 1, "update " + target);
    inference::ibis_step(ps, ctx.model, up, opt);

    const int step = t + 1 - t0;
    const int every = std::max(1, ctx.cfg.checkpoint_every);
    if (step % every == 0 || t + 1 == t_max) {
      char name[32];
      std::snprintf(name, sizeof(name), "step_%04d", t + 1);
      save_step(ctx, ps, ledger, name);
    }
  }

  write_ledger_csv(ctx.cfg.out_dir + "/forecast_ledger.csv", ledger);
  return ledger;
}

void write_ledger_csv(const std::string& path, const Ledger& ledger) {
  auto out = open_out(path);
  out << "origin_date,target_date,maturity,rf,rx_obs,f_model,f_bench,"
         "w_model,w_bench,r_model,r_bench\n";
  for (const auto& r : ledger.rows)
    out << r.origin_date << ',' << r.target_date << ','
        << static_cast<long>(r.maturity) << ',' << g17(r.rf) << ','
        << g17(r.rx_obs) << ',' << g17(r.f_model) << ',' << g17(r.f_bench)
        << ',' << g17(r.w_model) << ',' << g17(r.w_bench) << ','
        << g17(r.r_model) << ',' << g17(r.r_bench) << "\n";
}

Ledger read_ledger_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open ledger '" + path + "'");
  Ledger ledger;
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError(path + ": empty ledger file");
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> cells;
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 11)
      throw ValidationError(path + ": row " + std::to_string(row) +
                            " has " + std::to_string(cells.size()) +
                            " cells, expected 11");
    LedgerRow r;
    r.origin_date = cells[0];
    r.target_date = cells[1];
    const char* c[9];
    for (int i = 0; i < 9; ++i) c[i] = cells[std::size_t(i) + 2].c_str();
    r.maturity = std::strtod(c[0], nullptr);
    r.rf = std::strtod(c[1], nullptr);
    r.rx_obs = std::strtod(c[2], nullptr);
    r.f_model = std::strtod(c[3], nullptr);
    r.f_bench = std::strtod(c[4], nullptr);
    r.w_model = std::strtod(c[5], nullptr);
    r.w_bench = std::strtod(c[6], nullptr);
    r.r_model = std::strtod(c[7], nullptr);
    r.r_bench = std::strtod(c[8], nullptr);
    ledger.rows.push_back(std::move(r));
  }
  return ledger;
}

void run_evaluate(const config::RunConfig& cfg, const Ledger& ledger_in) {
  Ledger ledger = ledger_in;
  if (!cfg.eval_bench_ledger.empty()) {
    const Ledger bench = read_ledger_csv(cfg.eval_bench_ledger);
    std::map<std::pair<std::string, double>, const LedgerRow*> by_key;
    for (const auto& r : bench.rows) by_key[{r.origin_date, r.maturity}] = &r;
    for (auto& r : ledger.rows) {
      const auto it = by_key.find({r.origin_date, r.maturity});
      if (it == by_key.end())
        throw ValidationError("benchmark ledger lacks origin " +
                              r.origin_date + " maturity " +
                              std::to_string(static_cast<long>(r.maturity)));
      r.f_bench = it->second->f_model;
      r.w_bench = it->second->w_model;
      r.r_bench = it->second->r_model;
    }
  }

  auto out = open_out(cfg.out_dir + "/eval_summary.csv");
  out << "maturity,n_obs,r2_os,dm_stat,dm_p,stars,cer_pct,"
         "mean_w_model,mean_w_bench\n";
  for (double m : cfg.rx_maturities) {
    std::vector<double> rx, fm, fb, rm, rb, wm, wb;
    std::vector<std::string> dates;
    for (const auto& r : ledger.rows) {
      if (r.maturity != m) continue;
      rx.push_back(r.rx_obs);
      fm.push_back(r.f_model);
      fb.push_back(r.f_bench);
      rm.push_back(r.r_model);
      rb.push_back(r.r_bench);
      wm.push_back(r.w_model);
      wb.push_back(r.w_bench);
      dates.push_back(r.target_date);
    }
    if (rx.empty())
      throw ValidationError("ledger has no rows for maturity " +
                            std::to_string(static_cast<long>(m)));
    const Vec rxv = to_vec(rx), fmv = to_vec(fm), fbv = to_vec(fb);
    const auto r2 = evaluation::r2_os(rxv - fmv, rxv - fbv);

    double dm_stat = std::numeric_limits<double>::quiet_NaN();
    double dm_p = std::numeric_limits<double>::quiet_NaN();
    std::string stars;
    if (rxv.size() >= 10) {
      const Vec d = evaluation::cw_loss_diff(rxv, fmv, fbv);
      const int lags = cfg.nw_lags >= 0
                           ? cfg.nw_lags
                           : evaluation::nw_auto_lag(int(d.size()));
      const auto dm = evaluation::dm_cw_test(d, lags);
      dm_stat = dm.stat;
      dm_p = dm.p_one_sided;
      stars = evaluation::significance_stars(dm_p);
    }
    const double cer =
        evaluation::cer_relative(to_vec(rm), to_vec(rb), cfg.gamma, &dates);

    out << static_cast<long>(m) << ',' << rx.size() << ',' << g12(r2.value)
        << ',' << g12(dm_stat) << ',' << g12(dm_p) << ',' << stars << ','
        << g12(cer) << ',' << g12(to_vec(wm).mean()) << ','
        << g12(to_vec(wb).mean()) << "\n";
  }
}

void run_decompose(PipelineContext& ctx,
                   const inference::ParticleSystem& ps) {
  if (ctx.model.spec.form != inference::ModelForm::gp ||
      !ctx.model.spec.has_macro())
    throw ValidationError("decomposition requires a GP model id");
  if (ctx.model.sigma_k.maxCoeff() <= 0.0)
    throw ValidationError("kernel scales are zero; run the tuning stage first");
  const int t = ps.t_current;
  if (t < 3) throw ValidationError("too little absorbed data to decompose");
  ctx.audit.request("decompose", t, t);

  const int n = ps.n_particles();
  const Eigen::Index dim3t = Eigen::Index(3) * t;
  Mat means(n, dim3t), vars(n, dim3t);
  const Mat p_window = ctx.pcs.p.topRows(t + 1);
  const Vec inputs = ctx.panel.macro_kernel.head(t);
  parallel_for(n, [&](std::ptrdiff_t i) {
    const auto u = inference::unpack(ctx.model, ps.thetas.row(i).transpose());
    const auto loadings =
        termstructure::model_loadings(u.qp, ctx.model.w, ctx.model.maturities);
    const auto pd = gpou::build_p_dynamics(
        loadings.mu_p_q, loadings.phi_p_q, u.qp.sigma_p_chol, u.lambda12,
        &u.lambda0, u.dense_lambda1 ? &u.lambda1_full : nullptr);
    const auto resid = gpou::residuals(p_window, pd);
    const auto cov = gpkernel::build_block_K(inputs, u.kh);
    Vec mean;
    Mat vcov;
    gpou::posterior_v(resid, cov, u.qp.sigma_p_chol, mean, vcov);
    means.row(i) = mean.transpose();
    vars.row(i) = vcov.diagonal().transpose();
  });

  const Vec w = ps.normalized_weights();
  const Vec vbar = means.transpose() * w;
  const Vec m2 =
      (vars + means.array().square().matrix()).transpose() * w;
  const Vec vsd = (m2 - vbar.array().square().matrix())
                      .cwiseMax(0.0)
                      .cwiseSqrt();

  // Equation-major stacking: entry (eq b, transition tau) sits at b*t + tau.
  Mat v_hat(t, 3), v_sd(t, 3);
  for (int b = 0; b < 3; ++b)
    for (int tau = 0; tau < t; ++tau) {
      v_hat(tau, b) = vbar(Eigen::Index(b) * t + tau);
      v_sd(tau, b) = vsd(Eigen::Index(b) * t + tau);
    }

  const Mat pcs_t = ctx.pcs.p.middleRows(1, t);
  const Mat macro_lag = ctx.panel.macro_raw.head(t);
  const auto rp = evaluation::rp_decompose(v_hat, pcs_t, macro_lag);

  {
    auto out = open_out(ctx.cfg.out_dir + "/decomposition.csv");
    out << "equation,active,coef_a,coef_b1,coef_b2,coef_b3,"
           "adj_r2_vhat_on_macro,adj_r2_spanned_on_macro,"
           "adj_r2_hidden_on_macro,hidden_zero,rank_deficient\n";
    for (int b = 0; b < 3; ++b)
      out << (b + 1) << ','
          << (ctx.model.spec.mask[std::size_t(b)] ? 1 : 0) << ','
          << g12(rp.coef_a(b)) << ',' << g12(rp.coef_b(b, 0)) << ','
          << g12(rp.coef_b(b, 1)) << ',' << g12(rp.coef_b(b, 2)) << ','
          << g12(rp.r2_vhat_on_macro(b)) << ','
          << g12(rp.r2_spanned_on_macro(b)) << ','
          << g12(rp.r2_hidden_on_macro(b)) << ','
          << (rp.hidden_zero[std::size_t(b)] ? 1 : 0) << ','
          << (rp.rank_deficient ? 1 : 0) << "\n";
  }
  {
    auto out = open_out(ctx.cfg.out_dir + "/vhat_scatter.csv");
    out << "date,macro_lag";
    for (int b = 1; b <= 3; ++b)
      out << ",vhat" << b << ",lo" << b << ",hi" << b;
    out << "\n";
    for (int tau = 0; tau < t; ++tau) {
      out << ctx.panel.dates[std::size_t(tau) + 1] << ','
          << g12(ctx.panel.macro_raw(tau));
      for (int b = 0; b < 3; ++b) {
        const double lo = v_hat(tau, b) - 1.96 * v_sd(tau, b);
        const double hi = v_hat(tau, b) + 1.96 * v_sd(tau, b);
        out << ',' << g12(v_hat(tau, b)) << ',' << g12(lo) << ',' << g12(hi);
      }
      out << "\n";
    }
  }
}

inference::ParticleSystem load_resume(PipelineContext& ctx,
                                      const std::string& path,
                                      Ledger& ledger) {
  auto ps = io::load_checkpoint(path, ctx.model, ctx.fingerprint);
  std::string sidecar = path;
  const std::string suffix = ".ckpt";
  if (sidecar.size() > suffix.size() &&
      sidecar.compare(sidecar.size() - suffix.size(), suffix.size(), suffix) ==
          0)
    sidecar.replace(sidecar.size() - suffix.size(), suffix.size(),
                    ".ledger.csv");
  else
    sidecar += ".ledger.csv";
  if (std::filesystem::exists(sidecar)) ledger = read_ledger_csv(sidecar);
  return ps;
}

void run_all(const config::RunConfig& cfg, const std::string& resume_path) {
  auto ctx = stage("prepare", [&] { return prepare(cfg); });
  std::filesystem::create_directories(cfg.out_dir);
  std::filesystem::create_directories(checkpoint_dir(cfg));
  open_out(cfg.out_dir + "/config_echo.txt") << config::echo(cfg);

  const bool gp_form = ctx.model.spec.form == inference::ModelForm::gp &&
                       ctx.model.spec.has_macro();
  if (gp_form) stage("tune", [&] { run_tune(ctx); });

  Ledger ledger;
  inference::ParticleSystem ps;
  if (resume_path.empty()) {
    ps = stage("train", [&] { return run_train(ctx); });
  } else {
    ps = stage("resume", [&] { return load_resume(ctx, resume_path, ledger); });
    if (ps.t_current < ctx.panel.t_train_end)
      stage("train", [&] { continue_train(ctx, ps); });
  }
  ledger = stage("out-of-sample",
                 [&] { return run_oos(ctx, ps, std::move(ledger)); });
  stage("evaluate", [&] { run_evaluate(cfg, ledger); });
  if (gp_form) stage("decompose", [&] { run_decompose(ctx, ps); });

  {
    auto out = open_out(cfg.out_dir + "/inference_history.csv");
    out << "t,phi,ess_before,acc_rate,resampled\n";
    for (const auto& r : ps.history)
      out << r.t << ',' << g12(r.phi) << ',' << g12(r.ess_before) << ','
          << g12(r.acc_rate) << ',' << (r.resampled ? 1 : 0) << "\n";
  }
  {
    auto out = open_out(cfg.out_dir + "/audit.log");
    for (const auto& v : ctx.audit.violations)
      out << v.stage << ": requested index " << v.requested
          << " > allowed " << v.allowed << "\n";
  }
  {
    auto out = open_out(cfg.out_dir + "/run_summary.txt");
    out << "model=" << ctx.model.spec.id << "\n"
        << "data_fingerprint=" << ctx.fingerprint << "\n"
        << "t_train_end=" << ctx.panel.t_train_end << "\n"
        << "n_oos_origins="
        << (ctx.panel.n_obs() - 1 - ctx.panel.t_train_end) << "\n"
        << "log_evidence=" << g17(ps.log_evidence) << "\n"
        << "n_resample_moves=" << ps.n_resample_moves << "\n"
        << "n_bisect_fallbacks=" << ps.n_bisect_fallbacks << "\n"
        << "audit_checks=" << ctx.audit.n_checks << "\n"
        << "audit_violations=" << ctx.audit.violations.size() << "\n";
    if (ctx.tuned) out << "tuned_c_hat=" << g17(ctx.tune.c_hat) << "\n";
  }
}

}  // namespace gpdtsm::pipeline
