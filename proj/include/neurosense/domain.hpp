#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "neurosense/error.hpp"

namespace neurosense {

using ClassIndex = std::size_t;

inline constexpr double kProbabilitySumTolerance = 1e-6;

// Per-class probabilities for one sample. Only obtainable through validation,
// so every instance satisfies the simplex invariants.
class ProbabilityVector {
 public:
  static ProbabilityVector validate(std::vector<double> values) {
    if (values.size() < 2) {
      throw Error(Errc::too_few_classes, "probability vector needs at least 2 classes, got " +
                                             std::to_string(values.size()));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i]) || values[i] < 0.0) {
        throw Error(Errc::negative_entry, "entry " + std::to_string(i) + " is " + std::to_string(values[i]));
      }
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double v = values[i];
      if (v > 1.0) {
        throw Error(Errc::sum_out_of_tolerance, "entry " + std::to_string(i) + " exceeds 1");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
      throw Error(Errc::sum_out_of_tolerance, "entries sum to " + std::to_string(sum));
    }
    return ProbabilityVector(std::move(values));
  }

  std::span<const double> values() const noexcept { return values_; }
  std::size_t class_count() const noexcept { return values_.size(); }
  double operator[](std::size_t c) const { return values_[c]; }

  // Lowest index wins ties.
  ClassIndex argmax() const noexcept {
    return static_cast<ClassIndex>(std::max_element(values_.begin(), values_.end()) - values_.begin());
  }

  friend bool operator==(const ProbabilityVector&, const ProbabilityVector&) = default;

 private:
  explicit ProbabilityVector(std::vector<double> v) : values_(std::move(v)) {}
  std::vector<double> values_;
};

// Rescales non-negative scores to sum to 1 before validation. Producers call
// this; validate() itself never renormalizes.
inline ProbabilityVector normalize_scores(std::vector<double> scores) {
  double sum = 0.0;
  for (double s : scores) sum += s;
  if (sum > 0.0) {
    for (double& s : scores) s /= sum;
  }
  return ProbabilityVector::validate(std::move(scores));
}

inline ProbabilityVector validate_probability_vector(std::vector<double> values) {
  return ProbabilityVector::validate(std::move(values));
}

inline std::optional<ProbabilityVector> try_validate(std::vector<double> values) {
  try {
    return ProbabilityVector::validate(std::move(values));
  } catch (const Error&) {
    return std::nullopt;
  }
}

struct NeutrosophicScore {
  double truth = 0.0;
  double indeterminacy = 0.0;
  double falsity = 0.0;

  friend bool operator==(const NeutrosophicScore&, const NeutrosophicScore&) = default;
};

// Class names in lexicographic order; index = position.
class LabelEncoding {
 public:
  LabelEncoding() = default;

  static LabelEncoding from_names(std::vector<std::string> names) {
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    LabelEncoding enc;
    enc.names_ = std::move(names);
    for (std::size_t i = 0; i < enc.names_.size(); ++i) enc.index_.emplace(enc.names_[i], i);
    return enc;
  }

  ClassIndex encode(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error(Errc::unknown_class, "unknown class '" + name + "'");
    return it->second;
  }

  std::optional<ClassIndex> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& decode(ClassIndex c) const {
    if (c >= names_.size()) {
      throw Error(Errc::index_out_of_range, "class index " + std::to_string(c));
    }
    return names_[c];
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  friend bool operator==(const LabelEncoding& a, const LabelEncoding& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, ClassIndex> index_;
};

// Row-major feature matrix with encoded labels. Missing values are NaN until
// impute_zero runs.
struct Dataset {
  std::vector<double> features;
  std::size_t n_features = 0;
  std::vector<ClassIndex> labels;
  LabelEncoding encoding;
  std::vector<std::string> feature_names;
  std::vector<std::string> sample_ids;

  std::size_t rows() const noexcept { return labels.size(); }

  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * n_features, n_features};
  }
  std::span<double> row(std::size_t i) { return {features.data() + i * n_features, n_features}; }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(encoding.size(), 0);
    for (ClassIndex l : labels) ++counts.at(l);
    return counts;
  }

  void check() const {
    if (features.size() != labels.size() * n_features) {
      throw Error(Errc::dimension_mismatch, "feature matrix does not match row count");
    }
    if (!sample_ids.empty() && sample_ids.size() != labels.size()) {
      throw Error(Errc::length_mismatch, "sample id count does not match row count");
    }
    if (!feature_names.empty() && feature_names.size() != n_features) {
      throw Error(Errc::length_mismatch, "feature name count does not match feature count");
    }
    for (ClassIndex l : labels) {
      if (l >= encoding.size()) throw Error(Errc::index_out_of_range, "label index " + std::to_string(l));
    }
  }

  // Copies rows in the given order into a dataset with the same schema.
  Dataset select(std::span<const std::size_t> indices) const {
    Dataset out;
    out.n_features = n_features;
    out.encoding = encoding;
    out.feature_names = feature_names;
    out.features.reserve(indices.size() * n_features);
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
      auto r = row(i);
      out.features.insert(out.features.end(), r.begin(), r.end());
      out.labels.push_back(labels[i]);
      if (!sample_ids.empty()) out.sample_ids.push_back(sample_ids[i]);
    }
    return out;
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    if (a.features.size() != b.features.size()) return false;
    for (std::size_t i = 0; i < a.features.size(); ++i) {
      const double x = a.features[i], y = b.features[i];
      if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
    }
    return a.n_features == b.n_features && a.labels == b.labels && a.encoding == b.encoding &&
           a.feature_names == b.feature_names && a.sample_ids == b.sample_ids;
  }
};

enum class PolicyMode { global, per_class };

struct ThresholdPolicy {
  PolicyMode mode = PolicyMode::global;
  double global_tau = 0.4;
  std::map<ClassIndex, double> per_class_tau;
  std::optional<double> percentile;
  std::uint64_t version = 1;

  static ThresholdPolicy global(double tau, std::uint64_t version = 1) {
    ThresholdPolicy p;
    p.global_tau = tau;
    p.version = version;
    p.validate();
    return p;
  }

  void validate(std::size_t class_count = 0) const {
    auto in_unit = [](double t) { return std::isfinite(t) && t >= 0.0 && t <= 1.0; };
    if (!in_unit(global_tau)) throw Error(Errc::invalid_argument, "global_tau outside [0,1]");
    for (const auto& [c, t] : per_class_tau) {
      if (!in_unit(t)) {
        throw Error(Errc::invalid_argument, "threshold for class " + std::to_string(c) + " outside [0,1]");
      }
    }
    if (percentile && !(*percentile > 0.0 && *percentile <= 100.0)) {
      throw Error(Errc::invalid_argument, "percentile outside (0,100]");
    }
    if (mode == PolicyMode::per_class) {
      for (ClassIndex c = 0; c < class_count; ++c) {
        if (!per_class_tau.contains(c)) {
          throw Error(Errc::missing_class_threshold, "no threshold for class " + std::to_string(c));
        }
      }
    }
  }

  double threshold_for(ClassIndex c) const {
    if (mode == PolicyMode::global) return global_tau;
    auto it = per_class_tau.find(c);
    if (it == per_class_tau.end()) {
      throw Error(Errc::missing_class_threshold, "no threshold for class " + std::to_string(c));
    }
    return it->second;
  }

  friend bool operator==(const ThresholdPolicy&, const ThresholdPolicy&) = default;
};

struct Decision {
  ClassIndex predicted_class = 0;
  NeutrosophicScore score;
  bool abstained = false;
  double applied_threshold = 0.0;
  std::uint64_t policy_version = 0;
  std::string sample_id;

  friend bool operator==(const Decision&, const Decision&) = default;
};

inline bool abstains(double indeterminacy, double threshold) noexcept { return indeterminacy > threshold; }

}  // namespace neurosense
