#pragma once

// CSV data layer.  File contract:
//   yields CSV: header `date,m1,m3,...` (maturities in months, ascending; any
//     subset), ISO dates, one row per month, values are ANNUALIZED decimal
//     yields.  Internally everything is monthly decimal (value / 12).
//   macro CSV: header `date,<name>`, same date column as the yields file.
// Dates must advance by exactly one calendar month per row.

#include <cstdint>
#include <string>
#include <vector>

#include "gpdtsm/types.hpp"

namespace gpdtsm::data {

struct StandardizationMeta {
  double mean = 0.0;
  double sd = 1.0;
  bool applied = false;  // training-window moments only, to avoid look-ahead
};

struct PanelData {
  std::vector<std::string> dates;
  Vec maturities;   // months, ascending
  Mat yields;       // T x J, monthly decimal
  std::string macro_name;
  Vec macro_raw;    // T
  Vec macro_kernel; // standardized copy when meta.applied, else == macro_raw
  StandardizationMeta meta;
  int t_train_end = -1;  // index of the last training date

  int n_obs() const { return static_cast<int>(dates.size()); }
  int n_maturities() const { return static_cast<int>(maturities.size()); }
};

// Raw parsed CSV: header tokens, first-column dates, numeric body.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::string> dates;
  Mat values;
};
CsvTable read_csv_table(const std::string& path);

// Loads, validates and aligns the two files.  train_end_date picks the last
// in-sample row (last date <= train_end_date); standardize_macro applies
// training-window standardization to macro_kernel (nonlinear models only).
// maturity_subset (months) restricts the yield columns; empty keeps all.
PanelData load_panel(const std::string& yields_csv,
                     const std::string& macros_csv,
                     const std::string& train_end_date, bool standardize_macro,
                     const std::vector<double>& maturity_subset = {});

// True when b is exactly one calendar month after a (days may differ).
bool is_next_month(const std::string& a, const std::string& b);

// Writers used by the synthetic generator (yields re-annualized on write).
void write_yields_csv(const std::string& path,
                      const std::vector<std::string>& dates,
                      const Vec& maturities, const Mat& yields_monthly);
void write_macro_csv(const std::string& path,
                     const std::vector<std::string>& dates,
                     const std::string& name, const Vec& macro);

// Headerless numeric CSV (e.g. fixed PC weight rows).
Mat read_matrix_csv(const std::string& path);
void write_matrix_csv(const std::string& path, const Mat& m);

// Stable content hash (hex) used to pair checkpoints with their dataset.
std::string fingerprint(const PanelData& panel);

}  // namespace gpdtsm::data
