#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vpem/linalg.hpp"

namespace vpem {

struct Dataset {
  int m = 0;  // examples
  int d = 0;  // features
  Matrix x;   // m x d
  std::vector<int> labels;  // empty when unlabeled

  bool has_labels() const { return !labels.empty(); }
};

// Which agent observes each feature.
struct FeatureAssignment {
  int agents = 0;
  std::vector<int> agent_of_feature;  // length d, values in [0, agents)

  int d() const { return static_cast<int>(agent_of_feature.size()); }
  std::vector<int> agent_dims() const;
  // True when every agent's features form one contiguous ascending run.
  bool is_contiguous() const;
};

enum class AssignScheme { even, by_list };

// even: contiguous blocks, first d%n agents one feature wider.
// by_list: explicit map, validated.
FeatureAssignment assign_features(int d, int agents, AssignScheme scheme,
                                  const std::vector<int>& list = {});

struct StandardizeTransform {
  std::vector<double> mean;
  std::vector<double> scale;  // population standard deviation
};

// Zero-mean unit-variance per feature. Throws ZeroVariance naming the
// offending feature.
std::pair<Dataset, StandardizeTransform> standardize(const Dataset& ds);

struct CsvOptions {
  // Column name (with header) or 0-based index (as decimal string) holding
  // integer labels; that column is excluded from features.
  std::optional<std::string> label_column;
};

Dataset load_csv(const std::string& path, const CsvOptions& opts = {});

// Canonical 17-significant-digit float formatting; load_csv(save_csv(ds))
// reproduces ds bitwise.
void save_csv(const Dataset& ds, const std::string& path,
              bool with_labels = false);

void save_labels(const std::vector<int>& labels, const std::string& path);
std::vector<int> load_labels(const std::string& path);

// Writes content to path atomically (temp file + rename).
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace vpem
