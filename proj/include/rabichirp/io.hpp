#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rabichirp/designer.hpp"
#include "rabichirp/dynamics.hpp"
#include "rabichirp/errors.hpp"

namespace rabichirp::io {

inline constexpr const char* kTraceHeader = "t,tau,re_1,im_1,re_2,im_2,pop_1,pop_2,field,chirp";

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ValidationError("not a number: '" + text + "'");
  return v;
}

inline Frame parse_frame(const std::string& name) {
  if (name == "lab-c") return Frame::lab_c;
  if (name == "tau-a") return Frame::tau_a;
  if (name == "rabi-b") return Frame::rabi_b;
  throw ValidationError("unknown frame '" + name + "'");
}

/// CSV with a `# frame=<name>` comment line followed by the header row.
inline void write_trace_csv(std::ostream& out, const Trace& trace) {
  out << "# frame=" << to_string(trace.frame) << '\n' << kTraceHeader << '\n';
  for (const auto& s : trace.samples) {
    out << format_double(s.t) << ',' << format_double(s.tau) << ','
        << format_double(s.first.real()) << ',' << format_double(s.first.imag()) << ','
        << format_double(s.second.real()) << ',' << format_double(s.second.imag()) << ','
        << format_double(s.pop_first) << ',' << format_double(s.pop_second) << ','
        << format_double(s.field) << ',' << format_double(s.chirp) << '\n';
  }
}

inline void write_trace_csv(const std::filesystem::path& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  write_trace_csv(out, trace);
}

inline Trace read_trace_csv(std::istream& in, const std::string& name = "trace") {
  Trace trace;
  std::string line;
  bool header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line.rfind("# frame=", 0) == 0) trace.frame = parse_frame(line.substr(8));
      continue;
    }
    if (!header) {
      if (line != kTraceHeader) throw ValidationError(name + ": unexpected header '" + line + "'");
      header = true;
      continue;
    }
    std::vector<double> v;
    std::istringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, ',')) v.push_back(parse_double(cell));
    if (v.size() != 10)
      throw ValidationError(name + " line " + std::to_string(lineno) + ": expected 10 columns");
    trace.samples.push_back({v[0], v[1], {v[2], v[3]}, {v[4], v[5]}, v[6], v[7], v[8], v[9]});
  }
  if (!header) throw ValidationError(name + ": missing header row");
  return trace;
}

inline Trace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  return read_trace_csv(in, path.string());
}

/// Two-column sample table, readable by `load_tabulated`.
inline void write_chirp_table(const std::filesystem::path& path, const std::vector<double>& t,
                              const std::vector<double>& omega) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "# t omega\n";
  for (std::size_t k = 0; k < t.size(); ++k)
    out << format_double(t[k]) << ' ' << format_double(omega[k]) << '\n';
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline KeyValues report_fields(const DesignReport& r) {
  KeyValues kv{
      {"converged", r.converged ? "true" : "false"},
      {"iterations", std::to_string(r.history.size())},
      {"final_change", format_double(r.history.empty() ? 0.0 : r.history.back().change)},
      {"residual_sup", format_double(r.residual_sup)},
      {"rwa_metric", format_double(r.rwa_metric)},
      {"grid_points", std::to_string(r.grid.size())},
      {"phase_convention", r.convention == PhaseConvention::product ? "product" : "integral"},
  };
  for (const auto& it : r.history) {
    const std::string p = "iter." + std::to_string(it.index) + ".";
    kv.emplace_back(p + "change", format_double(it.change));
    kv.emplace_back(p + "residual_sup", format_double(it.residual_sup));
    kv.emplace_back(p + "relaxation", format_double(it.relaxation));
  }
  return kv;
}

inline void write_key_values(std::ostream& out, const KeyValues& kv) {
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

inline void write_key_values(const std::filesystem::path& path, const KeyValues& kv) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  write_key_values(out, kv);
}

inline std::map<std::string, std::string> read_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("report line without '=': " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace rabichirp::io
