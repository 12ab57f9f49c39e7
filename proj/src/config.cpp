#include "gpdtsm/config.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace gpdtsm::config {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(const std::string& v) { return v; }
std::string fmt(const std::vector<double>& v) {
  std::string out;
  for (double x : v) {
    if (!out.empty()) out += ',';
    const double r = std::floor(x);
    out += (r == x && std::abs(x) < 1e15) ? std::to_string(long(x)) : fmt(x);
  }
  return out;
}

void assign(double& slot, const std::string& v, const std::string& key) {
  char* end = nullptr;
  slot = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size())
    throw ValidationError("config key '" + key + "': '" + v +
                          "' is not a number");
}
void assign(int& slot, const std::string& v, const std::string& key) {
  double d = 0;
  assign(d, v, key);
  slot = static_cast<int>(d);
  if (double(slot) != d)
    throw ValidationError("config key '" + key + "': '" + v +
                          "' is not an integer");
}
void assign(std::uint64_t& slot, const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    slot = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
  } catch (const std::exception&) {
    throw ValidationError("config key '" + key + "': '" + v +
                          "' is not an unsigned integer");
  }
}
void assign(bool& slot, const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") slot = true;
  else if (v == "false" || v == "0" || v == "no") slot = false;
  else
    throw ValidationError("config key '" + key + "': '" + v +
                          "' is not a boolean (true/false)");
}
void assign(std::string& slot, const std::string& v, const std::string&) {
  slot = v;
}
void assign(std::vector<double>& slot, const std::string& v,
            const std::string& key) {
  slot.clear();
  if (trim(v).empty()) return;
  std::stringstream ss(v);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    double d = 0;
    assign(d, trim(cell), key);
    slot.push_back(d);
  }
}

struct Entry {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define CFG(field)                                                     \
  Entry{#field,                                                        \
        [](RunConfig& c, const std::string& v) { assign(c.field, v, #field); }, \
        [](const RunConfig& c) { return fmt(c.field); }}
#define CFGP(name, field)                                              \
  Entry{name,                                                          \
        [](RunConfig& c, const std::string& v) { assign(c.field, v, name); }, \
        [](const RunConfig& c) { return fmt(c.field); }}

const std::vector<Entry>& table() {
  static const std::vector<Entry> entries = {
      CFG(yields_csv), CFG(macros_csv), CFG(weights_csv), CFG(out_dir),
      CFG(model), CFG(train_end), CFG(maturities),
      CFG(n_particles), CFG(ess_alpha), CFG(mcmc_sweeps), CFG(bisect_tol),
      CFG(resampler), CFG(proposal_dof), CFG(proposal_inflate), CFG(seed),
      CFG(checkpoint_every),
      CFGP("prior_sigma_e2_alpha", priors.sigma_e2_alpha),
      CFGP("prior_sigma_e2_beta", priors.sigma_e2_beta),
      CFGP("prior_kinf_mean", priors.kinf_mean),
      CFGP("prior_kinf_sd", priors.kinf_sd),
      CFGP("prior_g1_mean", priors.g1_mean),
      CFGP("prior_g1_sd", priors.g1_sd),
      CFGP("prior_gap_mean", priors.gap_mean),
      CFGP("prior_gap_sd", priors.gap_sd),
      CFGP("prior_chol_diag_mean", priors.chol_diag_mean),
      CFGP("prior_chol_diag_sd", priors.chol_diag_sd),
      CFGP("prior_chol_off_mean", priors.chol_off_mean),
      CFGP("prior_chol_off_sd", priors.chol_off_sd),
      CFGP("prior_log_ell_mean", priors.log_ell_mean),
      CFGP("prior_log_ell_sd", priors.log_ell_sd),
      CFGP("prior_risk_mean", priors.risk_mean),
      CFGP("prior_risk_sd", priors.risk_sd),
      CFGP("prior_lambda0_mean", priors.lambda0_mean),
      CFGP("prior_lambda0_sd", priors.lambda0_sd),
      CFGP("prior_phipm_mean", priors.phipm_mean),
      CFGP("prior_phipm_sd", priors.phipm_sd),
      CFG(rx_maturities), CFG(gamma), CFG(nw_lags), CFG(eval_bench_ledger),
      CFG(fill_missing_legs), CFG(gibbs_resid_dof_jr), CFG(free_lambda0),
      CFG(tune_max_iter), CFG(tune_nm_iter),
      CFG(sim_t), CFG(sim_k_inf_q), CFG(sim_g), CFG(sim_sigma_diag),
      CFG(sim_sigma_e), CFG(sim_macro_rho), CFG(sim_macro_sd), CFG(sim_gp_c),
      CFG(sim_gp_ell), CFG(sim_lambda12), CFG(sim_phi_pm), CFG(sim_maturities),
      CFG(sim_start_date),
  };
  return entries;
}

#undef CFG
#undef CFGP

}  // namespace

RunConfig parse_string(const std::string& text) {
  RunConfig cfg;
  std::stringstream in(text);
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(row) +
                            ": expected key=value, got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    bool found = false;
    for (const auto& e : table()) {
      if (e.key == key) {
        e.set(cfg, val);
        found = true;
        break;
      }
    }
    if (!found)
      throw ValidationError("config line " + std::to_string(row) +
                            ": unknown key '" + key + "'");
  }
  return cfg;
}

RunConfig parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

std::string echo(const RunConfig& cfg) {
  std::string out;
  for (const auto& e : table()) out += e.key + "=" + e.get(cfg) + "\n";
  return out;
}

}  // namespace gpdtsm::config
