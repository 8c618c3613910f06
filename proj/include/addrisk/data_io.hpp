#pragma once

#include "addrisk/types.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace addrisk {

// One raw record in file column order: left, right, L, I, R, covariates...
struct RawRow {
  double left = 0.0;
  double right = 0.0;
  int delta_l = 0;
  int delta_i = 0;
  int delta_r = 0;
  std::vector<double> covariates;
};

namespace detail {

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline bool parse_double(const std::string& tok, bool allow_inf, double* out) {
  const std::string t = lower(tok);
  if (allow_inf && (t == "inf" || t == "+inf" || t == "infinity")) {
    *out = kInf;
    return true;
  }
  try {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    while (pos < tok.size() && std::isspace(static_cast<unsigned char>(tok[pos]))) ++pos;
    if (pos != tok.size()) return false;
    *out = v;
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    std::size_t b = field.find_first_not_of(" \t\r");
    std::size_t e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  return out;
}

[[noreturn]] inline void row_error(std::size_t row, const std::string& what) {
  throw std::invalid_argument("row " + std::to_string(row) + ": " + what);
}

}  // namespace detail

/**
 * Validate raw records and resolve canonical endpoints. Row indices in error
 * messages are 1-based over the data rows.
 */
inline Dataset canonicalize(const std::vector<RawRow>& rows) {
  Dataset data;
  data.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const RawRow& r = rows[i];
    const std::size_t row = i + 1;
    const int ind_sum = r.delta_l + r.delta_i + r.delta_r;
    if ((r.delta_l != 0 && r.delta_l != 1) || (r.delta_i != 0 && r.delta_i != 1) ||
        (r.delta_r != 0 && r.delta_r != 1) || ind_sum != 1)
      detail::row_error(row, "censoring indicators must be 0/1 and sum to 1");
    if (r.left < 0.0 || (std::isfinite(r.right) && r.right < 0.0))
      detail::row_error(row, "negative time");

    Observation o;
    o.x = Eigen::Map<const Eigen::VectorXd>(r.covariates.data(), static_cast<int>(r.covariates.size()));
    if (r.delta_l == 1) {
      if (!std::isfinite(r.right) || r.right <= 0.0)
        detail::row_error(row, "left-censored row needs a finite positive inspection point in the right column");
      o.kind = Censoring::left;
      o.left = 0.0;
      o.right = r.right;
    } else if (r.delta_r == 1) {
      if (!std::isfinite(r.left) || r.left <= 0.0)
        detail::row_error(row, "right-censored row needs a finite positive inspection point in the left column");
      o.kind = Censoring::right;
      o.left = r.left;
      o.right = kInf;
    } else {
      if (!(r.left > 0.0) || !std::isfinite(r.right) || !(r.left < r.right))
        detail::row_error(row, "interval-censored row requires 0 < left < right < inf");
      o.kind = Censoring::interval;
      o.left = r.left;
      o.right = r.right;
    }
    data.push_back(std::move(o));
  }
  return data;
}

/**
 * Read a dataset in the canonical CSV layout left,right,L,I,R,cov1,...,covp.
 * The header row is optional; `Inf` (case-insensitive) is accepted in the
 * right column.
 */
inline Dataset read_dataset_csv(std::istream& in) {
  std::vector<RawRow> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t rowno = 0;
  int p = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    const std::vector<std::string> f = detail::split_csv_line(line);
    if (lineno == 1) {
      double tmp;
      if (!f.empty() && !detail::parse_double(f[0], true, &tmp)) continue;  // header row
    }
    ++rowno;
    if (f.size() < 6) detail::row_error(rowno, "expected at least 6 columns (left,right,L,I,R,covariates)");
    RawRow r;
    double dl, di, dr;
    if (!detail::parse_double(f[0], false, &r.left)) detail::row_error(rowno, "non-numeric left endpoint '" + f[0] + "'");
    if (!detail::parse_double(f[1], true, &r.right)) detail::row_error(rowno, "non-numeric right endpoint '" + f[1] + "'");
    if (!detail::parse_double(f[2], false, &dl) || !detail::parse_double(f[3], false, &di) ||
        !detail::parse_double(f[4], false, &dr))
      detail::row_error(rowno, "non-numeric censoring indicator");
    r.delta_l = static_cast<int>(dl);
    r.delta_i = static_cast<int>(di);
    r.delta_r = static_cast<int>(dr);
    if (dl != r.delta_l || di != r.delta_i || dr != r.delta_r)
      detail::row_error(rowno, "censoring indicators must be integers");
    for (std::size_t j = 5; j < f.size(); ++j) {
      double v;
      if (!detail::parse_double(f[j], false, &v))
        detail::row_error(rowno, "non-numeric covariate '" + f[j] + "' in column " + std::to_string(j + 1));
      r.covariates.push_back(v);
    }
    if (p < 0) p = static_cast<int>(r.covariates.size());
    if (p != static_cast<int>(r.covariates.size()))
      detail::row_error(rowno, "inconsistent covariate count");
    rows.push_back(std::move(r));
  }
  return canonicalize(rows);
}

inline Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  return read_dataset_csv(in);
}

inline void write_dataset_csv(std::ostream& out, const Dataset& data) {
  const int p = covariate_dim(data);
  out << "left,right,L,I,R";
  for (int j = 1; j <= p; ++j) out << ",cov" << j;
  out << "\n";
  out.precision(17);
  for (const Observation& o : data) {
    out << o.left << ",";
    if (std::isfinite(o.right))
      out << o.right;
    else
      out << "Inf";
    out << "," << (o.is_left() ? 1 : 0) << "," << (o.is_interval() ? 1 : 0) << "," << (o.is_right() ? 1 : 0);
    for (int j = 0; j < p; ++j) out << "," << o.x[j];
    out << "\n";
  }
}

inline void write_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open '" + path + "' for writing");
  write_dataset_csv(out, data);
}

}  // namespace addrisk
