#include "todsim/trace_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace todsim {

namespace {

std::string manip_prefix(std::size_t k) { return k == 0 ? std::string("m") : "s" + std::to_string(k); }

void put(std::string& line, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  line.push_back(',');
  line.append(buf, static_cast<std::size_t>(n));
}

void put_int(std::string& line, long v) {
  line.push_back(',');
  line += std::to_string(v);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, std::size_t row) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw std::runtime_error("trace row " + std::to_string(row) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

void write_trace_csv(std::ostream& out, const Trace& trace) {
  const std::size_t manips = static_cast<std::size_t>(trace.slaves) + 1;
  std::vector<std::size_t> params(manips, static_cast<std::size_t>(trace.parameters));
  if (!trace.rows.empty()) {
    for (std::size_t k = 0; k < manips; ++k) params[k] = static_cast<std::size_t>(trace.rows.front().m[k].theta_hat.size());
  }

  std::string header = "t,instant,granted,forward_send,forward_age";
  for (int i = 1; i <= trace.slaves; ++i) header += ",eta" + std::to_string(i) + "_0,eta" + std::to_string(i) + "_1";
  for (std::size_t k = 0; k < manips; ++k) {
    const std::string z = manip_prefix(k);
    for (const char* name : {"q0", "q1", "qd0", "qd1", "x0", "x1", "xd0", "xd1", "tau0", "tau1"}) header += "," + z + "_" + name;
    for (std::size_t p = 0; p < params[k]; ++p) header += "," + z + "_th" + std::to_string(p);
    header += "," + z + "_ctrl," + z + "_sample";
  }
  out << header << '\n';

  std::string line;
  for (const auto& row : trace.rows) {
    line.clear();
    char buf[32];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", row.t);
    line.append(buf, static_cast<std::size_t>(n));
    put_int(line, row.instant ? 1 : 0);
    put_int(line, row.granted);
    put_int(line, row.forward_send ? 1 : 0);
    put(line, row.forward_age);
    for (int i = 0; i < trace.slaves; ++i) {
      if (row.instant) {
        put(line, row.eta[static_cast<std::size_t>(i)][0]);
        put(line, row.eta[static_cast<std::size_t>(i)][1]);
      } else {
        line += ",,";
      }
    }
    for (const auto& m : row.m) {
      for (const JointVector* v : {&m.q, &m.qd, &m.x, &m.xd, &m.tau}) {
        put(line, (*v)[0]);
        put(line, (*v)[1]);
      }
      for (Eigen::Index p = 0; p < m.theta_hat.size(); ++p) put(line, m.theta_hat[p]);
      put_int(line, m.control_event ? 1 : 0);
      put_int(line, m.sample_event ? 1 : 0);
    }
    out << line << '\n';
  }
}

void write_trace_csv(const std::filesystem::path& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_trace_csv(out, trace);
}

Trace read_trace_csv(std::istream& in, Scheme scheme) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trace: missing header");
  const auto header = split(line);
  if (header.size() < 5 || header[0] != "t") throw std::runtime_error("trace: unexpected header");

  Trace trace;
  trace.scheme = scheme;
  std::size_t col = 5;
  while (col < header.size() && header[col].rfind("eta", 0) == 0) col += 2;
  trace.slaves = static_cast<int>((col - 5) / 2);
  std::vector<std::size_t> params;
  for (std::size_t k = 0; k <= static_cast<std::size_t>(trace.slaves); ++k) {
    const std::string th = manip_prefix(k) + "_th";
    std::size_t c = col + 10;
    std::size_t p = 0;
    while (c + p < header.size() && header[c + p].rfind(th, 0) == 0) ++p;
    if (c + p + 2 > header.size()) throw std::runtime_error("trace: truncated header");
    params.push_back(p);
    col = c + p + 2;
  }
  if (col != header.size()) throw std::runtime_error("trace: unexpected trailing columns");
  trace.parameters = params.empty() ? 0 : static_cast<int>(params[0]);

  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw std::runtime_error("trace row " + std::to_string(row_no) + ": wrong column count");
    TraceRow row;
    row.t = to_double(cells[0], row_no);
    row.instant = cells[1] == "1";
    row.granted = static_cast<int>(to_double(cells[2], row_no));
    row.forward_send = cells[3] == "1";
    row.forward_age = to_double(cells[4], row_no);
    std::size_t c = 5;
    for (int i = 0; i < trace.slaves; ++i, c += 2) {
      if (row.instant) row.eta.emplace_back(to_double(cells[c], row_no), to_double(cells[c + 1], row_no));
    }
    for (std::size_t k = 0; k <= static_cast<std::size_t>(trace.slaves); ++k) {
      ManipulatorRow m;
      for (JointVector* v : {&m.q, &m.qd, &m.x, &m.xd, &m.tau}) {
        (*v)[0] = to_double(cells[c++], row_no);
        (*v)[1] = to_double(cells[c++], row_no);
      }
      m.theta_hat.resize(static_cast<Eigen::Index>(params[k]));
      for (std::size_t p = 0; p < params[k]; ++p) m.theta_hat[static_cast<Eigen::Index>(p)] = to_double(cells[c++], row_no);
      m.control_event = cells[c++] == "1";
      m.sample_event = cells[c++] == "1";
      row.m.push_back(std::move(m));
    }
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

Trace read_trace_csv(const std::filesystem::path& path, Scheme scheme) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_trace_csv(in, scheme);
}

void write_metrics(std::ostream& out, const Metrics& metrics) {
  for (const auto& [k, v] : metrics.entries()) out << k << '=' << v << '\n';
}

void write_metrics(const std::filesystem::path& path, const Metrics& metrics) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_metrics(out, metrics);
}

std::map<std::string, std::string> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

}  // namespace todsim
