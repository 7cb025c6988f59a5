#include "vpem/trace_io.hpp"

#include <charconv>
#include <sstream>

#include "vpem/dataset.hpp"
#include "vpem/errors.hpp"

namespace vpem {

std::string trace_to_string(const std::vector<TraceRecord>& records) {
  std::string out;
  for (const auto& rec : records) {
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::vector<TraceRecord> trace_from_string(const std::string& text) {
  std::vector<TraceRecord> records;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      records.push_back(TraceRecord::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("trace: bad record: ") + e.what());
    }
  }
  return records;
}

void save_trace(const std::vector<TraceRecord>& records,
                const std::string& path) {
  write_file_atomic(path, trace_to_string(records));
}

std::vector<TraceRecord> load_trace(const std::string& path) {
  return trace_from_string(read_file(path));
}

std::vector<double> trace_ll_column(const std::vector<TraceRecord>& records) {
  std::vector<double> ll;
  for (const auto& rec : records) {
    if (rec.contains("ll"))
      ll.push_back(rec["ll"].get<double>());
    else if (rec.contains("ll_mean"))
      ll.push_back(rec["ll_mean"].get<double>());
    else
      throw ParseError("trace: record has neither 'll' nor 'll_mean'");
  }
  return ll;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  auto [p, ec] =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  (void)ec;
  return std::string(buf, p);
}

}  // namespace

std::string merge_trajectories(
    const std::vector<std::vector<TraceRecord>>& runs, bool force) {
  if (runs.empty()) throw InvalidParameter("merge_trajectories: no traces");
  std::string mode;
  for (const auto& run : runs) {
    if (run.empty()) throw IncompatibleTraces("merge_trajectories: empty trace");
    const std::string m = run.front().value("mode", "");
    if (mode.empty()) mode = m;
    if (m != mode && !force)
      throw IncompatibleTraces("merge_trajectories: mixed modes '" + mode +
                               "' and '" + m + "' (use force to override)");
  }
  std::vector<std::vector<double>> cols;
  std::size_t rows = 0;
  for (const auto& run : runs) {
    cols.push_back(trace_ll_column(run));
    rows = std::max(rows, cols.back().size());
  }
  std::string out = "iteration";
  for (std::size_t r = 0; r < runs.size(); ++r)
    out += ",run_" + std::to_string(r);
  out += ",mean\n";
  for (std::size_t i = 0; i < rows; ++i) {
    out += std::to_string(i);
    double sum = 0.0;
    for (const auto& col : cols) {
      const double v = i < col.size() ? col[i] : col.back();
      sum += v;
      out += "," + fmt(v);
    }
    out += "," + fmt(sum / static_cast<double>(cols.size()));
    out += '\n';
  }
  return out;
}

}  // namespace vpem
