// Command-line driver.  Verbs: simulate, tune, train, forecast, evaluate,
// decompose, run.  Exit codes: 0 success, 1 invalid input, 2 numerical
// failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gpdtsm/checkpoint.hpp"
#include "gpdtsm/evaluation.hpp"
#include "gpdtsm/forecast.hpp"
#include "gpdtsm/pipeline.hpp"
#include "gpdtsm/simulate.hpp"

namespace {

using namespace gpdtsm;

std::string resolve_checkpoint(const config::RunConfig& cfg,
                               const std::string& resume) {
  if (!resume.empty()) return resume;
  const std::string dir = pipeline::checkpoint_dir(cfg);
  std::ifstream latest(dir + "/latest.txt");
  std::string name;
  if (!latest || !std::getline(latest, name) || name.empty())
    throw ValidationError("no checkpoint given and no '" + dir +
                          "/latest.txt'; pass --resume PATH");
  return dir + "/" + name;
}

void verb_simulate(const config::RunConfig& cfg) {
  const auto opts = simulate::SimOptions::from_config(cfg);
  const auto truth = simulate::generate(opts, cfg.seed);
  simulate::write_outputs(truth, cfg.out_dir);
  std::cout << "wrote " << truth.dates.size() << " months, "
            << truth.maturities.size() << " maturities to " << cfg.out_dir
            << "\n";
}

void verb_tune(const config::RunConfig& cfg) {
  auto ctx = pipeline::prepare(cfg);
  std::filesystem::create_directories(cfg.out_dir);
  pipeline::run_tune(ctx);
  std::cout << "sigma_k = [" << ctx.tune.sigma_k.transpose()
            << "], c_hat = " << ctx.tune.c_hat << "\n";
}

void verb_train(const config::RunConfig& cfg, const std::string& resume) {
  auto ctx = pipeline::prepare(cfg);
  std::filesystem::create_directories(cfg.out_dir);
  std::filesystem::create_directories(pipeline::checkpoint_dir(cfg));
  if (ctx.model.spec.form == inference::ModelForm::gp &&
      ctx.model.spec.has_macro())
    pipeline::run_tune(ctx);
  inference::ParticleSystem ps;
  if (resume.empty()) {
    ps = pipeline::run_train(ctx);
  } else {
    pipeline::Ledger ledger;
    ps = pipeline::load_resume(ctx, resume, ledger);
    pipeline::continue_train(ctx, ps);
  }
  std::cout << "trained through " << ctx.panel.dates[std::size_t(ps.t_current)]
            << ", log evidence " << ps.log_evidence << "\n";
}

void verb_forecast(const config::RunConfig& cfg, const std::string& resume) {
  auto ctx = pipeline::prepare(cfg);
  if (ctx.model.spec.form == inference::ModelForm::gp &&
      ctx.model.spec.has_macro())
    pipeline::run_tune(ctx);
  pipeline::Ledger ledger;
  auto ps = pipeline::load_resume(ctx, resolve_checkpoint(cfg, resume), ledger);

  const int t = ps.t_current;
  Vec rxm(Eigen::Index(cfg.rx_maturities.size()));
  for (std::size_t k = 0; k < cfg.rx_maturities.size(); ++k)
    rxm(Eigen::Index(k)) = cfg.rx_maturities[k];
  auto d = ctx.window(t, t, "forecast");
  const auto draws = forecast::predict_excess_returns(ps, ctx.model, d, rxm);

  Eigen::Index rf_idx = -1;
  for (Eigen::Index k = 0; k < ctx.panel.maturities.size(); ++k)
    if (ctx.panel.maturities(k) == 1.0) rf_idx = k;

  std::ofstream out(cfg.out_dir + "/forecast_next.csv");
  if (!out)
    throw ValidationError("cannot write '" + cfg.out_dir +
                          "/forecast_next.csv'");
  out << "origin_date,maturity,point_rx,sd_rx,w_opt\n";
  char buf[40];
  for (Eigen::Index k = 0; k < rxm.size(); ++k) {
    const Vec col = draws.rx_draws.col(k);
    const double mean = draws.point_rx(k);
    const double var =
        (col.array() - mean).square().matrix().dot(draws.weights);
    double w_opt = std::numeric_limits<double>::quiet_NaN();
    if (rf_idx >= 0)
      w_opt = evaluation::optimal_weight(draws.weights, col, cfg.gamma,
                                         ctx.panel.yields(t, rf_idx));
    out << ctx.panel.dates[std::size_t(t)] << ','
        << static_cast<long>(rxm(k));
    std::snprintf(buf, sizeof(buf), ",%.17g", mean);
    out << buf;
    std::snprintf(buf, sizeof(buf), ",%.17g", std::sqrt(std::max(0.0, var)));
    out << buf;
    std::snprintf(buf, sizeof(buf), ",%.17g\n", w_opt);
    out << buf;
  }
  std::cout << "forecasts from " << ctx.panel.dates[std::size_t(t)]
            << " written to " << cfg.out_dir << "/forecast_next.csv\n";
}

void verb_evaluate(const config::RunConfig& cfg) {
  const auto ledger =
      pipeline::read_ledger_csv(cfg.out_dir + "/forecast_ledger.csv");
  pipeline::run_evaluate(cfg, ledger);
  std::cout << "wrote " << cfg.out_dir << "/eval_summary.csv\n";
}

void verb_decompose(const config::RunConfig& cfg, const std::string& resume) {
  auto ctx = pipeline::prepare(cfg);
  std::filesystem::create_directories(cfg.out_dir);
  if (ctx.model.spec.form == inference::ModelForm::gp &&
      ctx.model.spec.has_macro())
    pipeline::run_tune(ctx);
  pipeline::Ledger ledger;
  auto ps = pipeline::load_resume(ctx, resolve_checkpoint(cfg, resume), ledger);
  pipeline::run_decompose(ctx, ps);
  std::cout << "wrote " << cfg.out_dir << "/decomposition.csv\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Arbitrage-free yield-curve model with a nonparametric macro-driven "
      "shift in the factor dynamics: sequential Bayesian estimation, "
      "forecasting, portfolio evaluation"};
  app.require_subcommand(1);

  std::string config_path, model_override, out_override, resume;
  std::uint64_t seed = 0;
  bool have_seed = false;
  app.add_option("--config", config_path, "key=value configuration file")
      ->required();
  app.add_option("--seed", seed, "override the config seed")
      ->each([&](const std::string&) { have_seed = true; });
  app.add_option("--model", model_override,
                 "override the model id (M0, M1, GP_ijk, LM_ijk)");
  app.add_option("--out", out_override, "override the output directory");
  app.add_option("--resume", resume, "checkpoint file to restart from");

  for (const char* name :
       {"simulate", "tune", "train", "forecast", "evaluate", "decompose",
        "run"})
    app.add_subcommand(name)->fallthrough();

  CLI11_PARSE(app, argc, argv);
  const std::string verb = app.get_subcommands().front()->get_name();

  try {
    auto cfg = gpdtsm::config::parse_file(config_path);
    if (have_seed) cfg.seed = seed;
    if (!model_override.empty()) cfg.model = model_override;
    if (!out_override.empty()) cfg.out_dir = out_override;

    if (verb == "simulate")
      verb_simulate(cfg);
    else if (verb == "tune")
      verb_tune(cfg);
    else if (verb == "train")
      verb_train(cfg, resume);
    else if (verb == "forecast")
      verb_forecast(cfg, resume);
    else if (verb == "evaluate")
      verb_evaluate(cfg);
    else if (verb == "decompose")
      verb_decompose(cfg, resume);
    else
      gpdtsm::pipeline::run_all(cfg, resume);
  } catch (const gpdtsm::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const gpdtsm::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
