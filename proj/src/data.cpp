#include "gpdtsm/data.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace gpdtsm::data {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& cell, const std::string& path, int row,
                  int col) {
  const std::string t = trim(cell);
  if (!t.empty()) {
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end == t.c_str() + t.size() && end != t.c_str()) return v;
  }
  throw ValidationError(path + ": row " + std::to_string(row) + ", column " +
                        std::to_string(col + 1) + ": '" + cell +
                        "' is not numeric");
}

bool parse_iso_ym(const std::string& s, int& y, int& m) {
  // YYYY-MM-DD
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  y = std::stoi(s.substr(0, 4));
  m = std::stoi(s.substr(5, 2));
  const int d = std::stoi(s.substr(8, 2));
  return m >= 1 && m <= 12 && d >= 1 && d <= 31;
}

void check_monthly_dates(const std::vector<std::string>& dates,
                         const std::string& path) {
  for (std::size_t i = 0; i < dates.size(); ++i) {
    int y = 0, m = 0;
    if (!parse_iso_ym(dates[i], y, m))
      throw ValidationError(path + ": row " + std::to_string(i + 2) +
                            ": '" + dates[i] + "' is not an ISO date");
    if (i > 0 && !is_next_month(dates[i - 1], dates[i]))
      throw ValidationError(path + ": row " + std::to_string(i + 2) +
                            ": date " + dates[i] +
                            " does not follow " + dates[i - 1] +
                            " by one month (gap or out of order)");
  }
}

}  // namespace

bool is_next_month(const std::string& a, const std::string& b) {
  int ya = 0, ma = 0, yb = 0, mb = 0;
  if (!parse_iso_ym(a, ya, ma) || !parse_iso_ym(b, yb, mb)) return false;
  return yb * 12 + mb == ya * 12 + ma + 1;
}

CsvTable read_csv_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  int row = 0;
  std::vector<std::vector<double>> body;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_row(line);
    if (row == 1) {
      t.header = cells;
      if (t.header.size() < 2 || t.header[0] != "date")
        throw ValidationError(path + ": header must start with 'date' and "
                              "have at least one value column");
      continue;
    }
    if (cells.size() != t.header.size())
      throw ValidationError(path + ": row " + std::to_string(row) + " has " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(t.header.size()));
    t.dates.push_back(cells[0]);
    std::vector<double> vals(cells.size() - 1);
    for (std::size_t c = 1; c < cells.size(); ++c)
      vals[c - 1] = parse_cell(cells[c], path, row, static_cast<int>(c));
    body.push_back(std::move(vals));
  }
  if (body.empty()) throw ValidationError(path + ": no data rows");
  t.values.resize(Eigen::Index(body.size()), Eigen::Index(t.header.size() - 1));
  for (std::size_t r = 0; r < body.size(); ++r)
    for (std::size_t c = 0; c < body[r].size(); ++c)
      t.values(Eigen::Index(r), Eigen::Index(c)) = body[r][c];
  return t;
}

PanelData load_panel(const std::string& yields_csv,
                     const std::string& macros_csv,
                     const std::string& train_end_date, bool standardize_macro,
                     const std::vector<double>& maturity_subset) {
  CsvTable yt = read_csv_table(yields_csv);
  CsvTable mt = read_csv_table(macros_csv);

  // Yield maturities from the header: m<months>.
  std::vector<double> months;
  for (std::size_t c = 1; c < yt.header.size(); ++c) {
    const std::string& h = yt.header[c];
    if (h.size() < 2 || h[0] != 'm')
      throw ValidationError(yields_csv + ": column '" + h +
                            "' must be named m<months>");
    char* end = nullptr;
    const double v = std::strtod(h.c_str() + 1, &end);
    if (end != h.c_str() + h.size() || v < 1)
      throw ValidationError(yields_csv + ": column '" + h +
                            "' must be named m<months>");
    months.push_back(v);
  }
  if (!std::is_sorted(months.begin(), months.end()))
    throw ValidationError(yields_csv + ": maturity columns must be ascending");

  if (mt.header.size() != 2)
    throw ValidationError(macros_csv + ": expected exactly 'date,<name>'");

  check_monthly_dates(yt.dates, yields_csv);
  check_monthly_dates(mt.dates, macros_csv);
  if (yt.dates.size() != mt.dates.size())
    throw ValidationError("date ranges differ: " + yields_csv + " has " +
                          std::to_string(yt.dates.size()) + " rows, " +
                          macros_csv + " has " +
                          std::to_string(mt.dates.size()));
  for (std::size_t i = 0; i < yt.dates.size(); ++i)
    if (yt.dates[i] != mt.dates[i])
      throw ValidationError("misaligned dates at row " + std::to_string(i + 2) +
                            ": " + yt.dates[i] + " vs " + mt.dates[i]);

  // Optional maturity subset.
  std::vector<Eigen::Index> keep;
  if (maturity_subset.empty()) {
    for (std::size_t j = 0; j < months.size(); ++j)
      keep.push_back(Eigen::Index(j));
  } else {
    for (double want : maturity_subset) {
      auto it = std::find(months.begin(), months.end(), want);
      if (it == months.end()) {
        std::string have;
        for (double m : months) have += (have.empty() ? "" : ",") +
                                        std::to_string(int(m));
        throw ValidationError("requested maturity " + std::to_string(int(want)) +
                              " not in panel (available: " + have + ")");
      }
      keep.push_back(Eigen::Index(it - months.begin()));
    }
    if (!std::is_sorted(keep.begin(), keep.end()))
      throw ValidationError("maturity subset must be ascending");
  }

  PanelData p;
  p.dates = yt.dates;
  p.maturities.resize(Eigen::Index(keep.size()));
  p.yields.resize(yt.values.rows(), Eigen::Index(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    p.maturities(Eigen::Index(j)) = months[std::size_t(keep[j])];
    p.yields.col(Eigen::Index(j)) = yt.values.col(keep[j]) / 12.0;  // monthly
  }
  p.macro_name = mt.header[1];
  p.macro_raw = mt.values.col(0);
  p.macro_kernel = p.macro_raw;

  // Training split: last date <= train_end_date (ISO strings sort correctly).
  if (!train_end_date.empty()) {
    int idx = -1;
    for (std::size_t i = 0; i < p.dates.size(); ++i)
      if (p.dates[i] <= train_end_date) idx = static_cast<int>(i);
    if (idx < 1 || idx >= p.n_obs() - 1)
      throw ValidationError("train_end " + train_end_date +
                            " must leave at least 2 in-sample dates and 1 "
                            "out-of-sample date within " +
                            p.dates.front() + ".." + p.dates.back());
    p.t_train_end = idx;
  } else {
    p.t_train_end = p.n_obs() - 1;
  }

  if (standardize_macro) {
    const auto n_train = Eigen::Index(p.t_train_end + 1);
    const double mean = p.macro_raw.head(n_train).mean();
    const double sd = std::sqrt(
        (p.macro_raw.head(n_train).array() - mean).square().sum() /
        double(n_train));
    if (!(sd > 0))
      throw ValidationError("macro '" + p.macro_name +
                            "' is constant on the training window; cannot "
                            "standardize");
    p.meta = {mean, sd, true};
    p.macro_kernel = (p.macro_raw.array() - mean) / sd;
  }
  return p;
}

void write_yields_csv(const std::string& path,
                      const std::vector<std::string>& dates,
                      const Vec& maturities, const Mat& yields_monthly) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << "date";
  for (Eigen::Index j = 0; j < maturities.size(); ++j)
    out << ",m" << static_cast<long>(maturities(j));
  out << "\n";
  char buf[40];
  for (std::size_t i = 0; i < dates.size(); ++i) {
    out << dates[i];
    for (Eigen::Index j = 0; j < yields_monthly.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g",
                    12.0 * yields_monthly(Eigen::Index(i), j));
      out << ',' << buf;
    }
    out << "\n";
  }
}

void write_macro_csv(const std::string& path,
                     const std::vector<std::string>& dates,
                     const std::string& name, const Vec& macro) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << "date," << name << "\n";
  char buf[40];
  for (std::size_t i = 0; i < dates.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", macro(Eigen::Index(i)));
    out << dates[i] << ',' << buf << "\n";
  }
}

Mat read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_row(line);
    std::vector<double> vals(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c)
      vals[c] = parse_cell(cells[c], path, row, static_cast<int>(c));
    if (!rows.empty() && vals.size() != rows.front().size())
      throw ValidationError(path + ": row " + std::to_string(row) +
                            " has a different number of cells");
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ValidationError(path + ": no data rows");
  Mat m(Eigen::Index(rows.size()), Eigen::Index(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(Eigen::Index(r), Eigen::Index(c)) = rows[r][c];
  return m;
}

void write_matrix_csv(const std::string& path, const Mat& m) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  char buf[40];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out << (j ? "," : "") << buf;
    }
    out << "\n";
  }
}

std::string fingerprint(const PanelData& panel) {
  // FNV-1a over a canonical text rendering.
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  char buf[40];
  for (const auto& d : panel.dates) mix(d);
  mix(panel.macro_name);
  auto mixd = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g|", v);
    mix(buf);
  };
  for (Eigen::Index j = 0; j < panel.maturities.size(); ++j)
    mixd(panel.maturities(j));
  for (Eigen::Index i = 0; i < panel.yields.rows(); ++i)
    for (Eigen::Index j = 0; j < panel.yields.cols(); ++j)
      mixd(panel.yields(i, j));
  for (Eigen::Index i = 0; i < panel.macro_raw.size(); ++i)
    mixd(panel.macro_raw(i));
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace gpdtsm::data
