#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gmrl/errors.hpp"

namespace gmrl::harness {

/// One CSV row: an episode for a2c runs, an update for ppo runs.
struct MetricsRow {
  std::string run;
  std::uint64_t seed = 0;
  std::uint64_t step_index = 0;
  double reward = 0.0;
  double steps = 0.0;
  double outputs = 0.0;
  double abs_grad_sum = 0.0;
  double active_pct = 100.0;
  double lambda = 0.0;
};

inline constexpr const char* kCsvHeader =
    "run,seed,step_index,reward,steps,outputs,abs_grad_sum,active_pct,lambda";

// %.10g keeps files readable; formatting goes through snprintf so output does
// not depend on stream locale state.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string format_row(const MetricsRow& r) {
  std::string line = r.run;
  line += ',' + std::to_string(r.seed);
  line += ',' + std::to_string(r.step_index);
  for (double v : {r.reward, r.steps, r.outputs, r.abs_grad_sum, r.active_pct, r.lambda}) {
    line += ',';
    line += format_number(v);
  }
  line += '\n';
  return line;
}

inline std::string format_csv(const std::vector<MetricsRow>& rows) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : rows) out += format_row(r);
  return out;
}

/// Appends rows to one run file. Not shared between threads.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot write '" + path + "'");
    out_ << kCsvHeader << '\n';
  }
  void write(const MetricsRow& r) { out_ << format_row(r); }
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

inline double parse_number(const std::string& s, const std::string& where) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ValidationError(where + ": bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw ValidationError(where + ": bad number '" + s + "'");
  }
}

inline std::vector<MetricsRow> parse_csv(std::istream& in, const std::string& name = "metrics.csv") {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw ValidationError(name + ": unexpected header");
  }
  std::vector<MetricsRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    const std::string where = name + ":" + std::to_string(lineno);
    if (cells.size() != 9) throw ValidationError(where + ": expected 9 columns");
    MetricsRow r;
    r.run = cells[0];
    r.seed = static_cast<std::uint64_t>(parse_number(cells[1], where));
    r.step_index = static_cast<std::uint64_t>(parse_number(cells[2], where));
    r.reward = parse_number(cells[3], where);
    r.steps = parse_number(cells[4], where);
    r.outputs = parse_number(cells[5], where);
    r.abs_grad_sum = parse_number(cells[6], where);
    r.active_pct = parse_number(cells[7], where);
    r.lambda = parse_number(cells[8], where);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<MetricsRow> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return parse_csv(in, path);
}

/// Mean of the last ceil(fraction * n) values.
inline double final_window_mean(const std::vector<double>& values, double fraction) {
  if (values.empty()) throw StateError("final_window_mean: no values");
  auto n = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(values.size())));
  n = std::clamp<std::size_t>(n, 1, values.size());
  double s = 0.0;
  for (std::size_t i = values.size() - n; i < values.size(); ++i) s += values[i];
  return s / static_cast<double>(n);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
  std::size_t n = 0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  out.n = v.size();
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return out;
}

/// "3600±1447" style, rounded to integers.
inline std::string format_mean_std(const MeanStd& m) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.0f±%.0f", m.mean, m.std);
  return buf;
}

inline double variance(const std::vector<double>& v) {
  if (v.empty()) throw StateError("variance: no values");
  double mu = 0.0;
  for (double x : v) mu += x;
  mu /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return ss / static_cast<double>(v.size());
}

}  // namespace gmrl::harness
