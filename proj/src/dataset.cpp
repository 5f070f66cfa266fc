#include "addle/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace addle {

namespace {

std::int64_t parse_int(const std::string& text, const std::string& what) {
  std::int64_t v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("expected integer " + what + ", got '" + text + "'");
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

bool Dataset::has_gold_labels() const {
  for (const auto& s : samples)
    if (!s.true_label) return false;
  return true;
}

void Dataset::validate(std::size_t num_classes) const {
  for (const auto& s : samples) {
    const std::string where = "dataset: sample " + std::to_string(s.sample_id) + ": ";
    if (s.rater >= rater_ids.size()) throw std::invalid_argument(where + "rater index out of range");
    if (s.features.size() != num_features) throw std::invalid_argument(where + "feature count mismatch");
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= num_classes) {
      throw std::invalid_argument(where + "label " + std::to_string(s.label) + " outside [0, " +
                                  std::to_string(num_classes) + ")");
    }
    if (s.true_label && (*s.true_label < 0 || static_cast<std::size_t>(*s.true_label) >= num_classes)) {
      throw std::invalid_argument(where + "true label out of range");
    }
  }
}

Tensor Dataset::feature_matrix() const {
  Tensor x({samples.size(), num_features});
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t d = 0; d < num_features; ++d) x.at(i, d) = samples[i].features[d];
  return x;
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

std::vector<int> Dataset::gold_labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.true_label) throw std::invalid_argument("dataset: sample " + std::to_string(s.sample_id) + " has no gold label");
    out.push_back(*s.true_label);
  }
  return out;
}

std::vector<std::int64_t> Dataset::group_ids() const {
  std::vector<std::int64_t> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.group_id);
  return out;
}

std::vector<std::vector<std::size_t>> Dataset::indices_by_rater() const {
  std::vector<std::vector<std::size_t>> out(rater_ids.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out.at(samples[i].rater).push_back(i);
  return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& positions) const {
  Dataset d;
  d.rater_ids = rater_ids;
  d.num_features = num_features;
  d.samples.reserve(positions.size());
  for (auto p : positions) d.samples.push_back(samples.at(p));
  return d;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("expected number, got '" + text + "'");
  return v;
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset to " + path.string());
  out << "sample_id,group_id,rater_id,label,true_label";
  for (std::size_t d = 0; d < data.num_features; ++d) out << ",f" << d;
  out << '\n';
  for (const auto& s : data.samples) {
    out << s.sample_id << ',' << s.group_id << ',' << data.rater_ids.at(s.rater) << ',' << s.label << ',';
    if (s.true_label) out << *s.true_label;
    for (double f : s.features) out << ',' << format_double(f);
    out << '\n';
  }
  if (!out) throw std::runtime_error("I/O error while writing " + path.string());
}

Dataset read_dataset_csv(const std::filesystem::path& path, const std::vector<std::string>& known_rater_ids) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read dataset " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing header");
  const auto header = split_list(trim(line));
  const std::vector<std::string> fixed = {"sample_id", "group_id", "rater_id", "label", "true_label"};
  if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin())) {
    throw std::runtime_error(path.string() + ": unexpected header '" + line + "'");
  }
  Dataset data;
  data.num_features = header.size() - fixed.size();
  for (std::size_t d = 0; d < data.num_features; ++d) {
    if (header[fixed.size() + d] != "f" + std::to_string(d)) {
      throw std::runtime_error(path.string() + ": feature column " + std::to_string(d) + " must be named f" +
                               std::to_string(d));
    }
  }
  data.rater_ids = known_rater_ids;
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < data.rater_ids.size(); ++r) index[data.rater_ids[r]] = r;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split_list(line);
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    if (cells.size() != header.size()) {
      throw std::runtime_error(where + "expected " + std::to_string(header.size()) + " cells, got " +
                               std::to_string(cells.size()));
    }
    try {
      Sample s;
      s.sample_id = parse_int(cells[0], "sample_id");
      s.group_id = parse_int(cells[1], "group_id");
      auto [it, inserted] = index.emplace(cells[2], data.rater_ids.size());
      if (inserted) data.rater_ids.push_back(cells[2]);
      s.rater = it->second;
      s.label = static_cast<int>(parse_int(cells[3], "label"));
      if (!cells[4].empty()) s.true_label = static_cast<int>(parse_int(cells[4], "true_label"));
      s.features.reserve(data.num_features);
      for (std::size_t d = 0; d < data.num_features; ++d) s.features.push_back(parse_double(cells[5 + d]));
      data.samples.push_back(std::move(s));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(where + e.what());
    }
  }
  return data;
}

void write_metadata(const std::map<std::string, std::string>& meta, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write metadata to " + path.string());
  for (const auto& [k, v] : meta) out << k << '=' << v << '\n';
  if (!out) throw std::runtime_error("I/O error while writing " + path.string());
}

std::map<std::string, std::string> read_metadata(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read metadata " + path.string());
  std::map<std::string, std::string> meta;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error(path.string() + ": malformed line '" + line + "'");
    meta[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return meta;
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(text);
  while (std::getline(ss, cur, sep)) out.push_back(trim(cur));
  if (!text.empty() && text.back() == sep) out.emplace_back();
  return out;
}

std::string join_list(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace addle
