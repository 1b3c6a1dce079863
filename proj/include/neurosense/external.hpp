#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "neurosense/csv.hpp"
#include "neurosense/domain.hpp"
#include "neurosense/error.hpp"

namespace neurosense {

// Precomputed class probabilities from a model trained elsewhere (e.g. a
// gradient-boosted ensemble), keyed by sample id in pipeline class order.
struct ExternalProbabilities {
  std::string model_id;
  LabelEncoding encoding;
  std::unordered_map<std::string, ProbabilityVector> by_sample;

  const ProbabilityVector* find(const std::string& sample_id) const {
    auto it = by_sample.find(sample_id);
    return it == by_sample.end() ? nullptr : &it->second;
  }
};

// Header: sample_id,model_id,p_<class_0>,...,p_<class_{C-1}>. A file may hold
// several models; they are returned in order of first appearance.
inline std::vector<ExternalProbabilities> load_external_probabilities(std::istream& in,
                                                                      const LabelEncoding& encoding) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::parse_error, "empty external probability file");
  const auto header = csv::split_line(line);
  if (header.size() < 2 || csv::trim(header[0]) != "sample_id" || csv::trim(header[1]) != "model_id") {
    throw Error(Errc::parse_error, "header must start with sample_id,model_id");
  }
  if (header.size() - 2 != encoding.size()) {
    throw Error(Errc::class_mismatch, "file has " + std::to_string(header.size() - 2) + " class columns, encoding has " +
                                          std::to_string(encoding.size()));
  }
  for (std::size_t c = 0; c < encoding.size(); ++c) {
    const std::string expected = "p_" + encoding.decode(c);
    if (csv::trim(header[c + 2]) != expected) {
      throw Error(Errc::class_mismatch, "column " + std::to_string(c + 2) + " is '" + header[c + 2] +
                                            "', expected '" + expected + "'");
    }
  }

  std::vector<ExternalProbabilities> models;
  std::map<std::string, std::size_t> slot;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = csv::split_line(line);
    if (fields.size() != header.size()) {
      throw Error(Errc::parse_error, "line " + std::to_string(line_no) + ": wrong field count");
    }
    std::vector<double> values;
    for (std::size_t c = 2; c < fields.size(); ++c) {
      auto v = csv::parse_number(fields[c]);
      if (!v || std::isnan(*v)) {
        throw Error(Errc::parse_error, "line " + std::to_string(line_no) + ": bad probability '" + fields[c] + "'");
      }
      values.push_back(*v);
    }
    const std::string sample_id = csv::trim(fields[0]);
    const std::string model_id = csv::trim(fields[1]);
    auto vec = try_validate(std::move(values));
    if (!vec) throw Error(Errc::invalid_vector, "line " + std::to_string(line_no) + " (sample " + sample_id + ")");

    auto [it, fresh] = slot.try_emplace(model_id, models.size());
    if (fresh) models.push_back({model_id, encoding, {}});
    auto& model = models[it->second];
    if (!model.by_sample.emplace(sample_id, std::move(*vec)).second) {
      throw Error(Errc::duplicate_sample_id, "sample '" + sample_id + "' repeated for model '" + model_id + "'");
    }
  }
  return models;
}

inline std::vector<ExternalProbabilities> load_external_probabilities(const std::string& path,
                                                                      const LabelEncoding& encoding) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  return load_external_probabilities(in, encoding);
}

}  // namespace neurosense
