#include "vpem/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vpem/errors.hpp"

namespace vpem {

std::vector<int> FeatureAssignment::agent_dims() const {
  std::vector<int> dims(agents, 0);
  for (int a : agent_of_feature) dims[a]++;
  return dims;
}

bool FeatureAssignment::is_contiguous() const {
  int seen_max = -1;
  for (std::size_t j = 0; j < agent_of_feature.size(); ++j) {
    const int a = agent_of_feature[j];
    if (a < seen_max) return false;
    if (a > seen_max) {
      if (a != seen_max + 1) { /* gap is fine: agent may own nothing */
      }
      seen_max = a;
    }
  }
  return true;
}

FeatureAssignment assign_features(int d, int agents, AssignScheme scheme,
                                  const std::vector<int>& list) {
  if (d < 1 || agents < 1)
    throw InvalidAssignment("assign_features: d and agents must be >= 1");
  FeatureAssignment fa;
  fa.agents = agents;
  if (scheme == AssignScheme::even) {
    if (agents > d)
      throw InvalidAssignment(
          "assign_features: even scheme needs agents <= d (agents=" +
          std::to_string(agents) + ", d=" + std::to_string(d) + ")");
    const int base = d / agents;
    const int extra = d % agents;
    fa.agent_of_feature.reserve(d);
    for (int a = 0; a < agents; ++a) {
      const int width = base + (a < extra ? 1 : 0);
      for (int t = 0; t < width; ++t) fa.agent_of_feature.push_back(a);
    }
  } else {
    if (static_cast<int>(list.size()) != d)
      throw InvalidAssignment("assign_features: list covers " +
                              std::to_string(list.size()) + " features, d=" +
                              std::to_string(d));
    bool any = false;
    for (int a : list) {
      if (a < 0 || a >= agents)
        throw InvalidAssignment("assign_features: agent id " +
                                std::to_string(a) + " out of range");
      any = true;
    }
    if (!any) throw InvalidAssignment("assign_features: empty map");
    fa.agent_of_feature = list;
  }
  return fa;
}

std::pair<Dataset, StandardizeTransform> standardize(const Dataset& ds) {
  StandardizeTransform t;
  t.mean.resize(ds.d);
  t.scale.resize(ds.d);
  for (int j = 0; j < ds.d; ++j) {
    double s = 0.0;
    for (int i = 0; i < ds.m; ++i) s += ds.x(i, j);
    const double mean = s / ds.m;
    double v = 0.0;
    for (int i = 0; i < ds.m; ++i) {
      const double c = ds.x(i, j) - mean;
      v += c * c;
    }
    const double sd = std::sqrt(v / ds.m);
    if (sd < 1e-13 * std::max(1.0, std::abs(mean)))
      throw ZeroVariance("standardize: feature " + std::to_string(j) +
                         " has zero variance");
    t.mean[j] = mean;
    t.scale[j] = sd;
  }
  Dataset out = ds;
  for (int i = 0; i < ds.m; ++i)
    for (int j = 0; j < ds.d; ++j)
      out.x(i, j) = (ds.x(i, j) - t.mean[j]) / t.scale[j];
  return {std::move(out), std::move(t)};
}

namespace {

bool parse_double(std::string_view s, double& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (*(e - 1) == ' ' || *(e - 1) == '\t' || *(e - 1) == '\r'))
    --e;
  if (b == e) return false;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      fields.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return fields;
}

std::string format_double(double v) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v,
                               std::chars_format::general, 17);
  (void)ec;
  return std::string(buf, p);
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r'))
    --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvOptions& opts) {
  std::ifstream in(path);
  if (!in) throw IoError("load_csv: cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw ParseError("load_csv: empty file " + path);

  // Header detection: a first line with any non-numeric field is a header.
  auto first = split_csv_line(lines[0]);
  bool has_header = false;
  for (auto f : first) {
    double tmp;
    if (!parse_double(f, tmp)) {
      has_header = true;
      break;
    }
  }

  const int ncols = static_cast<int>(first.size());
  int label_idx = -1;
  if (opts.label_column) {
    const std::string& lc = *opts.label_column;
    if (has_header) {
      for (int j = 0; j < ncols; ++j)
        if (trim(first[j]) == lc) label_idx = j;
    }
    if (label_idx < 0) {
      int idx;
      auto [p, ec] = std::from_chars(lc.data(), lc.data() + lc.size(), idx);
      if (ec == std::errc() && p == lc.data() + lc.size() && idx >= 0 &&
          idx < ncols) {
        label_idx = idx;
      } else {
        throw ParseError("load_csv: label column '" + lc + "' not found");
      }
    }
  }

  const std::size_t row0 = has_header ? 1 : 0;
  const int d = ncols - (label_idx >= 0 ? 1 : 0);
  if (d < 1) throw ParseError("load_csv: no feature columns");
  Dataset ds;
  ds.m = static_cast<int>(lines.size() - row0);
  ds.d = d;
  ds.x = Matrix(ds.m, d);
  if (label_idx >= 0) ds.labels.resize(ds.m);

  for (std::size_t r = row0; r < lines.size(); ++r) {
    auto fields = split_csv_line(lines[r]);
    if (static_cast<int>(fields.size()) != ncols)
      throw RaggedRows("load_csv: row " + std::to_string(r + 1) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(ncols));
    const int i = static_cast<int>(r - row0);
    int jj = 0;
    for (int j = 0; j < ncols; ++j) {
      double v;
      if (!parse_double(fields[j], v))
        throw ParseError("load_csv: row " + std::to_string(r + 1) + " col " +
                         std::to_string(j + 1) + ": '" +
                         std::string(fields[j]) + "'");
      if (j == label_idx) {
        const double rv = std::round(v);
        if (std::abs(v - rv) > 1e-9 || rv < 0)
          throw ParseError("load_csv: row " + std::to_string(r + 1) +
                           ": label '" + std::string(fields[j]) +
                           "' is not a nonnegative integer");
        ds.labels[i] = static_cast<int>(rv);
      } else {
        ds.x(i, jj++) = v;
      }
    }
  }
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path, bool with_labels) {
  std::string out;
  out.reserve(static_cast<std::size_t>(ds.m) * ds.d * 12);
  for (int i = 0; i < ds.m; ++i) {
    for (int j = 0; j < ds.d; ++j) {
      if (j) out += ',';
      out += format_double(ds.x(i, j));
    }
    if (with_labels && ds.has_labels()) {
      out += ',';
      out += std::to_string(ds.labels[i]);
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

void save_labels(const std::vector<int>& labels, const std::string& path) {
  std::string out;
  for (int v : labels) {
    out += std::to_string(v);
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<int> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_labels: cannot open " + path);
  std::vector<int> labels;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    int v;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size())
      throw ParseError("load_labels: bad line '" + t + "'");
    labels.push_back(v);
  }
  return labels;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp + " for writing");
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError("rename failed: " + tmp + " -> " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace vpem
