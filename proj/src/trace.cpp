#include "polybandit/trace.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "polybandit/common.hpp"

namespace polybandit {

void RegretTrace::set_meta(const std::string& key, const std::string& value) {
  for (auto& kv : meta) {
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  }
  meta.emplace_back(key, value);
}

std::string RegretTrace::get_meta(const std::string& key) const {
  for (const auto& kv : meta)
    if (kv.first == key) return kv.second;
  return {};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void write_trace_csv(std::ostream& os, const RegretTrace& trace) {
  for (const auto& kv : trace.meta) {
    std::string v = kv.second;
    for (char& c : v)
      if (c == '\n' || c == '\r') c = ' ';
    os << "# " << kv.first << '=' << v << "\r\n";
  }
  if (trace.flagged) os << "# flag=" << trace.flag_reason << "\r\n";
  os << "t,cumulative_regret,instantaneous_regret,phase,diagnostics\r\n";
  for (const auto& r : trace.rows) {
    os << r.t << ',' << format_double(r.cumulative_regret) << ','
       << format_double(r.instantaneous_regret) << ',' << csv_field(r.phase) << ','
       << csv_field(r.diagnostics) << "\r\n";
  }
}

RegretTrace read_trace_csv(std::istream& is) {
  RegretTrace trace;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string value = line.substr(eq + 1);
      if (key == "flag") {
        trace.flagged = true;
        trace.flag_reason = value;
      } else {
        trace.meta.emplace_back(key, value);
      }
      continue;
    }
    if (!header) {
      header = true;
      continue;
    }
    const auto f = parse_csv_line(line);
    if (f.size() < 3) throw ConfigError("malformed trace row: " + line);
    TraceRow r;
    r.t = std::stoll(f[0]);
    r.cumulative_regret = std::stod(f[1]);
    r.instantaneous_regret = std::stod(f[2]);
    if (f.size() > 3) r.phase = f[3];
    if (f.size() > 4) r.diagnostics = f[4];
    trace.rows.push_back(std::move(r));
  }
  if (!header) throw ConfigError("trace has no header row");
  return trace;
}

}  // namespace polybandit
