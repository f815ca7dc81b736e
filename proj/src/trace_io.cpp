#include "redspace/trace_io.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <sstream>

namespace redspace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trace_to_csv(const Trace& trace) {
  std::ostringstream out;
  if (trace.rows.empty()) throw std::invalid_argument("trace_to_csv: empty trace");
  const Index ds = trace.rows.front().s.size();
  const Index dy = trace.rows.front().y.size();
  out << "k,seed,method";
  for (Index i = 0; i < ds; ++i) out << ",s_" << (i + 1);
  for (Index i = 0; i < dy; ++i) out << ",y_" << (i + 1);
  out << ",feasible,incumbent\n";
  for (const TraceRow& row : trace.rows) {
    out << row.k << ',' << trace.seed << ',' << trace.method;
    for (Index i = 0; i < ds; ++i) out << ',' << format_double(row.s[i]);
    for (Index i = 0; i < dy; ++i) out << ',' << format_double(row.y[i]);
    out << ',' << (row.feasible ? 1 : 0) << ',' << format_double(row.incumbent) << '\n';
  }
  return out.str();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

Trace trace_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("trace_from_csv: empty input");
  std::vector<std::string> header = split_csv_line(line);
  Index ds = 0, dy = 0;
  for (const std::string& h : header) {
    if (h.rfind("s_", 0) == 0) ++ds;
    if (h.rfind("y_", 0) == 0) ++dy;
  }
  if (ds == 0 || dy == 0 || header.size() != static_cast<size_t>(5 + ds + dy))
    throw std::invalid_argument("trace_from_csv: unrecognised header");

  Trace trace;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() != header.size())
      throw std::invalid_argument("trace_from_csv: column count mismatch");
    TraceRow row;
    size_t col = 0;
    row.k = std::stoll(f[col++]);
    uint64_t seed = std::stoull(f[col++]);
    std::string method = f[col++];
    if (first) {
      trace.seed = seed;
      trace.method = method;
      first = false;
    }
    row.s.resize(ds);
    for (Index i = 0; i < ds; ++i) row.s[i] = std::strtod(f[col++].c_str(), nullptr);
    row.y.resize(dy);
    for (Index i = 0; i < dy; ++i) row.y[i] = std::strtod(f[col++].c_str(), nullptr);
    row.feasible = f[col++] == "1";
    row.incumbent = std::strtod(f[col++].c_str(), nullptr);
    trace.rows.push_back(std::move(row));
  }
  if (trace.rows.empty()) throw std::invalid_argument("trace_from_csv: no data rows");
  return trace;
}

std::string trace_to_json(const Trace& trace) {
  nlohmann::json j;
  j["method"] = trace.method;
  j["seed"] = trace.seed;
  if (trace.error.has_value()) j["error"] = *trace.error;
  j["rows"] = nlohmann::json::array();
  for (const TraceRow& row : trace.rows) {
    nlohmann::json r;
    r["k"] = row.k;
    r["s"] = std::vector<double>(row.s.begin(), row.s.end());
    r["y"] = std::vector<double>(row.y.begin(), row.y.end());
    r["feasible"] = row.feasible;
    r["incumbent"] = row.incumbent;
    j["rows"].push_back(std::move(r));
  }
  j["digests"] = nlohmann::json::array();
  for (const IterationDigest& d : trace.digests) {
    nlohmann::json r;
    r["k"] = d.k;
    if (d.elbo.has_value()) r["elbo"] = *d.elbo;
    r["gp_log_params"] = nlohmann::json::array();
    for (const Vector& p : d.gp_log_params)
      r["gp_log_params"].push_back(std::vector<double>(p.begin(), p.end()));
    if (d.basis.size() > 0) {
      r["basis_rows"] = d.basis.rows();
      r["basis_cols"] = d.basis.cols();
      std::vector<double> flat;
      flat.reserve(static_cast<size_t>(d.basis.size()));
      for (Index i = 0; i < d.basis.rows(); ++i)
        for (Index c = 0; c < d.basis.cols(); ++c) flat.push_back(d.basis(i, c));
      r["basis"] = std::move(flat);
    }
    j["digests"].push_back(std::move(r));
  }
  return j.dump();
}

}  // namespace redspace
