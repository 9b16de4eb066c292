#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace polybandit {

struct TraceRow {
  long long t = 0;
  double cumulative_regret = 0.0;
  double instantaneous_regret = 0.0;
  std::string phase;
  std::string diagnostics;
};

struct RegretTrace {
  // Ordered so that the CSV header is stable.
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<TraceRow> rows;
  bool flagged = false;
  std::string flag_reason;

  void set_meta(const std::string& key, const std::string& value);
  std::string get_meta(const std::string& key) const;
  double final_regret() const { return rows.empty() ? 0.0 : rows.back().cumulative_regret; }
  long long final_t() const { return rows.empty() ? 0 : rows.back().t; }
};

// RFC-4180 field quoting.
std::string csv_field(const std::string& s);
std::vector<std::string> parse_csv_line(const std::string& line);

// Metadata lines start with "# key=value", then a header row, then data rows.
void write_trace_csv(std::ostream& os, const RegretTrace& trace);
RegretTrace read_trace_csv(std::istream& is);

std::string format_double(double x);

}  // namespace polybandit
