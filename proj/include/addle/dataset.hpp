#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "addle/tensor.hpp"

namespace addle {

// One image-level sample labelled by exactly one rater.
struct Sample {
  std::int64_t sample_id = 0;
  std::int64_t group_id = 0;
  std::size_t rater = 0;  // index into Dataset::rater_ids
  int label = 0;          // subjective ordinal label
  std::optional<int> true_label;
  std::vector<double> features;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> rater_ids;
  std::size_t num_features = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t num_raters() const { return rater_ids.size(); }
  bool has_gold_labels() const;

  // Checks rater indices, feature widths and label range.
  void validate(std::size_t num_classes) const;

  Tensor feature_matrix() const;
  std::vector<int> labels() const;
  // Throws if any sample lacks a gold label.
  std::vector<int> gold_labels() const;
  std::vector<std::int64_t> group_ids() const;
  // Sample positions for each rater index (the per-rater subsets X_r).
  std::vector<std::vector<std::size_t>> indices_by_rater() const;
  Dataset subset(const std::vector<std::size_t>& positions) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Round-trip text for a double (17 significant digits).
std::string format_double(double v);
double parse_double(const std::string& text);

// CSV header: sample_id,group_id,rater_id,label,true_label,f0,...,f{D-1}.
// An empty true_label cell means no gold label.
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);

// Rater ids listed in `known_rater_ids` keep their order; ids not listed are
// appended in first-appearance order.
Dataset read_dataset_csv(const std::filesystem::path& path, const std::vector<std::string>& known_rater_ids = {});

// Plain "key=value" lines, sorted by key.
void write_metadata(const std::map<std::string, std::string>& meta, const std::filesystem::path& path);
std::map<std::string, std::string> read_metadata(const std::filesystem::path& path);

std::vector<std::string> split_list(const std::string& text, char sep = ',');
std::string join_list(const std::vector<std::string>& items, char sep = ',');

}  // namespace addle
