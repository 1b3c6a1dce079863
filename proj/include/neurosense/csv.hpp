#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "neurosense/domain.hpp"
#include "neurosense/error.hpp"

namespace neurosense::csv {

// Splits one line on commas, honoring double-quoted fields ("" escapes a quote).
inline std::vector<std::string> split_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

// Empty (or "nan") fields parse to NaN, the missing-value sentinel.
inline std::optional<double> parse_number(std::string_view field) {
  const std::string t = trim(field);
  if (t.empty() || t == "nan" || t == "NaN" || t == "NAN") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const char* first = t.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
  return v;
}

// Shortest representation that round-trips.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

struct ReadOptions {
  std::string label_col = "what";
  std::string id_col = "sample_id";  // used when present in the header
  std::vector<std::string> drop_cols;
};

inline Dataset read_dataset(std::istream& in, const ReadOptions& opt) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::parse_error, "empty input, expected a header row");
  const auto header = split_line(line);
  std::optional<std::size_t> label_idx, id_idx;
  std::vector<std::size_t> feature_cols;
  Dataset ds;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name = trim(header[i]);
    if (name == opt.label_col) {
      label_idx = i;
    } else if (name == opt.id_col) {
      id_idx = i;
    } else if (std::find(opt.drop_cols.begin(), opt.drop_cols.end(), name) == opt.drop_cols.end()) {
      feature_cols.push_back(i);
      ds.feature_names.push_back(name);
    }
  }
  if (!label_idx) throw Error(Errc::parse_error, "label column '" + opt.label_col + "' not in header");
  ds.n_features = feature_cols.size();

  std::vector<std::string> raw_labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_line(line);
    if (fields.size() != header.size()) {
      throw Error(Errc::parse_error, "line " + std::to_string(line_no) + ": expected " +
                                         std::to_string(header.size()) + " fields, got " +
                                         std::to_string(fields.size()));
    }
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      auto v = parse_number(fields[feature_cols[k]]);
      if (!v) {
        throw Error(Errc::parse_error, "line " + std::to_string(line_no) + ": non-numeric value '" +
                                           fields[feature_cols[k]] + "' in column '" +
                                           ds.feature_names[k] + "'");
      }
      ds.features.push_back(*v);
    }
    raw_labels.push_back(trim(fields[*label_idx]));
    ds.sample_ids.push_back(id_idx ? trim(fields[*id_idx]) : "row-" + std::to_string(raw_labels.size() - 1));
  }
  ds.encoding = LabelEncoding::from_names(raw_labels);
  ds.labels.reserve(raw_labels.size());
  for (const auto& name : raw_labels) ds.labels.push_back(ds.encoding.encode(name));
  return ds;
}

inline Dataset read_dataset(const std::string& path, const ReadOptions& opt) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  return read_dataset(in, opt);
}

// Re-reads a dataset written against a known encoding so class indices stay
// aligned even when a split lacks some classes.
inline Dataset read_dataset(const std::string& path, const ReadOptions& opt, const LabelEncoding& encoding) {
  Dataset ds = read_dataset(path, opt);
  std::vector<ClassIndex> remapped;
  remapped.reserve(ds.labels.size());
  for (ClassIndex l : ds.labels) remapped.push_back(encoding.encode(ds.encoding.decode(l)));
  ds.labels = std::move(remapped);
  ds.encoding = encoding;
  return ds;
}

inline void write_dataset(std::ostream& out, const Dataset& ds, const std::string& label_col = "what") {
  out << "sample_id";
  for (std::size_t j = 0; j < ds.n_features; ++j) {
    out << ',' << quote(j < ds.feature_names.size() ? ds.feature_names[j] : "f" + std::to_string(j));
  }
  out << ',' << quote(label_col) << '\n';
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    out << quote(ds.sample_ids.empty() ? "row-" + std::to_string(i) : ds.sample_ids[i]);
    for (double v : ds.row(i)) out << ',' << format_number(v);
    out << ',' << quote(ds.encoding.decode(ds.labels[i])) << '\n';
  }
}

inline void write_dataset(const std::string& path, const Dataset& ds, const std::string& label_col = "what") {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path);
  write_dataset(out, ds, label_col);
}

}  // namespace neurosense::csv
