#pragma once

// Orchestration: data loading and PC construction, kernel-scale tuning,
// sequential training, the out-of-sample forecast/update loop with
// checkpoints, evaluation tables and the risk-premium decomposition.
// Every emitted file is a deterministic function of (config, data, seed).

#include <string>
#include <vector>

#include "gpdtsm/config.hpp"
#include "gpdtsm/data.hpp"
#include "gpdtsm/ibis.hpp"
#include "gpdtsm/tuning.hpp"

namespace gpdtsm::pipeline {

// Look-ahead guard.  Every stage passes the newest data index it is allowed
// to see; a request beyond that bound is clamped and recorded.  A clean run
// ends with an empty audit log.
struct DataAudit {
  struct Entry {
    std::string stage;
    int requested = 0;
    int allowed = 0;
  };
  std::vector<Entry> violations;
  long n_checks = 0;

  int request(const std::string& stage, int requested, int allowed);
  bool clean() const { return violations.empty(); }
};

// One forecast-origin / maturity cell of the backtest.
struct LedgerRow {
  std::string origin_date;  // forecast made with data up to this date
  std::string target_date;  // date the return materializes
  double maturity = 0;      // months
  double rf = 0;            // 1-month yield at the origin, monthly decimal
  double rx_obs = 0;
  double f_model = 0;
  double f_bench = 0;  // expanding-window historical mean
  double w_model = 0;
  double w_bench = 0;
  double r_model = 0;  // realized net portfolio returns
  double r_bench = 0;
};

struct Ledger {
  std::vector<LedgerRow> rows;
};

void write_ledger_csv(const std::string& path, const Ledger& ledger);
Ledger read_ledger_csv(const std::string& path);

struct PipelineContext {
  config::RunConfig cfg;
  data::PanelData panel;
  termstructure::PcPanel pcs;  // full sample, weights fixed in-sample
  inference::Model model;
  tuning::TuneResult tune;
  bool tuned = false;
  std::string fingerprint;
  DataAudit audit;

  inference::DataWindow window(int t_end, int allowed,
                               const std::string& stage);
};

PipelineContext prepare(const config::RunConfig& cfg);

inference::IbisOptions ibis_options(const config::RunConfig& cfg);
std::string checkpoint_dir(const config::RunConfig& cfg);

// Kernel-scale calibration on the training window (GP model ids only).
void run_tune(PipelineContext& ctx);

// Sequential pass over the training window from scratch.
inference::ParticleSystem run_train(PipelineContext& ctx);

// Feed any training-window observations a loaded checkpoint is still missing.
void continue_train(PipelineContext& ctx, inference::ParticleSystem& ps);

// Out-of-sample loop: forecast at each origin, resolve the realized excess
// returns, update the posterior, checkpoint.  `ledger` carries rows already
// resolved when resuming.
Ledger run_oos(PipelineContext& ctx, inference::ParticleSystem& ps,
               Ledger ledger = {});

// Per-maturity evaluation tables from a ledger (standalone: needs no panel).
void run_evaluate(const config::RunConfig& cfg, const Ledger& ledger);

// Posterior-mean latent shift, spanned/hidden split and macro batteries.
void run_decompose(PipelineContext& ctx,
                   const inference::ParticleSystem& ps);

// Full pipeline; every stage failure is rethrown with the stage name.
// resume_path restarts from a checkpoint written by an earlier identical run.
void run_all(const config::RunConfig& cfg,
             const std::string& resume_path = "");

// Reload a checkpoint together with its resolved-rows sidecar.
inference::ParticleSystem load_resume(PipelineContext& ctx,
                                      const std::string& path,
                                      Ledger& ledger);

}  // namespace gpdtsm::pipeline
