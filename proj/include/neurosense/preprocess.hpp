#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "neurosense/domain.hpp"
#include "neurosense/error.hpp"
#include "neurosense/rng.hpp"

namespace neurosense {

inline Dataset filter_rare_classes(const Dataset& ds, std::size_t min_count = 2) {
  if (min_count < 1) throw Error(Errc::invalid_argument, "min_count must be >= 1");
  const auto counts = ds.class_counts();
  std::vector<std::string> survivors;
  for (ClassIndex c = 0; c < counts.size(); ++c) {
    if (counts[c] >= min_count) survivors.push_back(ds.encoding.decode(c));
  }
  if (survivors.empty()) throw Error(Errc::empty_result, "no class has at least " + std::to_string(min_count) + " samples");

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    if (counts[ds.labels[i]] >= min_count) keep.push_back(i);
  }
  Dataset out = ds.select(keep);
  out.encoding = LabelEncoding::from_names(survivors);
  for (std::size_t j = 0; j < keep.size(); ++j) {
    out.labels[j] = out.encoding.encode(ds.encoding.decode(ds.labels[keep[j]]));
  }
  return out;
}

inline Dataset impute_zero(Dataset ds) {
  for (double& v : ds.features) {
    if (std::isnan(v)) v = 0.0;
  }
  return ds;
}

struct Split {
  Dataset train;
  Dataset holdout;
};

// Per class: max(1, round(fraction * n_c)) rows go to the holdout, capped so
// the train side keeps at least one. Both sides keep the input row order.
inline Split stratified_split(const Dataset& ds, double holdout_fraction, std::uint64_t seed) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw Error(Errc::invalid_argument, "holdout fraction must be in (0,1)");
  }
  const std::size_t n_classes = ds.encoding.size();
  std::vector<std::vector<std::size_t>> members(n_classes);
  for (std::size_t i = 0; i < ds.rows(); ++i) members[ds.labels[i]].push_back(i);

  Rng rng(seed);
  std::vector<char> in_holdout(ds.rows(), 0);
  for (ClassIndex c = 0; c < n_classes; ++c) {
    auto& idx = members[c];
    if (idx.empty()) continue;
    if (idx.size() < 2) {
      throw Error(Errc::class_too_small, "class '" + ds.encoding.decode(c) + "' has fewer than 2 samples");
    }
    auto take = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(idx.size())));
    take = std::clamp<std::size_t>(take, 1, idx.size() - 1);
    rng.shuffle(idx);
    for (std::size_t j = 0; j < take; ++j) in_holdout[idx[j]] = 1;
  }

  std::vector<std::size_t> train_idx, holdout_idx;
  for (std::size_t i = 0; i < ds.rows(); ++i) (in_holdout[i] ? holdout_idx : train_idx).push_back(i);
  return {ds.select(train_idx), ds.select(holdout_idx)};
}

struct SmoteConfig {
  std::size_t k_neighbors = 5;
  std::uint64_t seed = 42;
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double t = a[j] - b[j];
    d += t * t;
  }
  return d;
}

// k nearest rows (by index into `members`) to members[self], excluding self.
// Distance ties resolve to the lower row index.
inline std::vector<std::size_t> nearest_same_class(const Dataset& ds, const std::vector<std::size_t>& members,
                                                   std::size_t self, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(members.size() - 1);
  const auto base = ds.row(members[self]);
  for (std::size_t m = 0; m < members.size(); ++m) {
    if (m == self) continue;
    dist.emplace_back(squared_distance(base, ds.row(members[m])), members[m]);
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) out.push_back(dist[j].second);
  return out;
}

}  // namespace detail

// Oversamples every class up to the majority count. Synthetic rows are
// appended after the originals, class by class, each one x + delta * (n - x)
// with x cycling round-robin over the class's originals and n drawn uniformly
// from x's k nearest same-class neighbours.
inline Dataset smote_balance(const Dataset& train, const SmoteConfig& config) {
  if (config.k_neighbors < 1) throw Error(Errc::invalid_argument, "k_neighbors must be >= 1");
  if (train.features.end() != std::find_if(train.features.begin(), train.features.end(),
                                           [](double v) { return std::isnan(v); })) {
    throw Error(Errc::invalid_argument, "SMOTE requires imputed (complete) rows");
  }
  const std::size_t n_classes = train.encoding.size();
  std::vector<std::vector<std::size_t>> members(n_classes);
  for (std::size_t i = 0; i < train.rows(); ++i) members[train.labels[i]].push_back(i);

  std::size_t majority = 0;
  for (const auto& m : members) majority = std::max(majority, m.size());
  for (ClassIndex c = 0; c < n_classes; ++c) {
    if (!members[c].empty() && members[c].size() <= config.k_neighbors) {
      throw Error(Errc::class_smaller_than_k, "class '" + train.encoding.decode(c) + "' has " +
                                                  std::to_string(members[c].size()) +
                                                  " samples, need more than k=" +
                                                  std::to_string(config.k_neighbors));
    }
  }

  Dataset out = train;
  if (out.sample_ids.empty()) {
    for (std::size_t i = 0; i < out.rows(); ++i) out.sample_ids.push_back("row-" + std::to_string(i));
  }
  Rng rng(config.seed);
  std::vector<double> synth(train.n_features);
  for (ClassIndex c = 0; c < n_classes; ++c) {
    const auto& idx = members[c];
    if (idx.empty() || idx.size() == majority) continue;
    const std::size_t needed = majority - idx.size();
    std::vector<std::vector<std::size_t>> neighbours(idx.size());
    for (std::size_t s = 0; s < needed; ++s) {
      const std::size_t b = s % idx.size();
      if (neighbours[b].empty()) neighbours[b] = detail::nearest_same_class(train, idx, b, config.k_neighbors);
      const std::size_t nb = neighbours[b][rng.below(config.k_neighbors)];
      const double delta = rng.uniform();
      const auto x = train.row(idx[b]);
      const auto n = train.row(nb);
      for (std::size_t j = 0; j < synth.size(); ++j) synth[j] = x[j] + delta * (n[j] - x[j]);
      out.features.insert(out.features.end(), synth.begin(), synth.end());
      out.labels.push_back(c);
      out.sample_ids.push_back("smote-" + std::to_string(c) + "-" + std::to_string(s));
    }
  }
  return out;
}

struct Standardizer {
  std::vector<double> means;
  std::vector<double> stddevs;  // population (ddof = 0)
  std::vector<bool> zero_variance;

  friend bool operator==(const Standardizer&, const Standardizer&) = default;

  void apply_row(std::span<const double> in, std::span<double> out) const {
    for (std::size_t j = 0; j < in.size(); ++j) {
      out[j] = zero_variance[j] ? 0.0 : (in[j] - means[j]) / stddevs[j];
    }
  }

  std::vector<double> apply_row(std::span<const double> in) const {
    if (in.size() != means.size()) {
      throw Error(Errc::dimension_mismatch, "expected " + std::to_string(means.size()) + " features, got " +
                                                std::to_string(in.size()));
    }
    std::vector<double> out(in.size());
    apply_row(in, out);
    return out;
  }
};

inline Standardizer standardize_fit(const Dataset& train) {
  if (train.rows() < 2) throw Error(Errc::invalid_argument, "standardize_fit needs at least 2 rows");
  const std::size_t d = train.n_features;
  const double n = static_cast<double>(train.rows());
  Standardizer s;
  s.means.assign(d, 0.0);
  s.stddevs.assign(d, 0.0);
  s.zero_variance.assign(d, false);
  for (std::size_t i = 0; i < train.rows(); ++i) {
    auto r = train.row(i);
    for (std::size_t j = 0; j < d; ++j) s.means[j] += r[j];
  }
  for (double& m : s.means) m /= n;
  // Two-pass variance.
  for (std::size_t i = 0; i < train.rows(); ++i) {
    auto r = train.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double t = r[j] - s.means[j];
      s.stddevs[j] += t * t;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    s.stddevs[j] = std::sqrt(s.stddevs[j] / n);
    s.zero_variance[j] = s.stddevs[j] == 0.0;
  }
  return s;
}

inline Dataset standardize_apply(const Standardizer& s, Dataset data) {
  if (data.n_features != s.means.size()) {
    throw Error(Errc::dimension_mismatch, "dataset has " + std::to_string(data.n_features) +
                                              " features, standardizer was fitted on " +
                                              std::to_string(s.means.size()));
  }
  for (std::size_t i = 0; i < data.rows(); ++i) {
    auto r = data.row(i);
    s.apply_row(r, r);
  }
  return data;
}

struct SyntheticConfig {
  std::size_t class_count = 3;
  std::size_t samples_per_class = 1000;
  std::size_t feature_dim = 8;
  std::vector<std::vector<double>> class_means;
  double overlap_sigma = 1.0;
  std::uint64_t seed = 42;
};

// Means on scaled unit axes, so every pair sits exactly `separation` apart.
inline std::vector<std::vector<double>> axis_means(std::size_t class_count, std::size_t feature_dim,
                                                   double separation) {
  if (feature_dim < class_count) {
    throw Error(Errc::invalid_argument, "axis_means needs feature_dim >= class_count");
  }
  std::vector<std::vector<double>> means(class_count, std::vector<double>(feature_dim, 0.0));
  for (std::size_t c = 0; c < class_count; ++c) means[c][c] = separation / std::sqrt(2.0);
  return means;
}

inline std::string synthetic_class_name(std::size_t c, std::size_t class_count) {
  std::string digits = std::to_string(c);
  const std::size_t width = std::to_string(class_count - 1).size();
  return "class_" + std::string(width - digits.size(), '0') + digits;
}

inline Dataset generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.class_count < 2) throw Error(Errc::invalid_argument, "class_count must be >= 2");
  if (cfg.samples_per_class < 1 || cfg.feature_dim < 1) {
    throw Error(Errc::invalid_argument, "samples_per_class and feature_dim must be positive");
  }
  if (!(cfg.overlap_sigma > 0.0)) throw Error(Errc::invalid_argument, "overlap_sigma must be > 0");
  if (cfg.class_means.size() != cfg.class_count) {
    throw Error(Errc::invalid_argument, "need one mean vector per class");
  }
  for (std::size_t a = 0; a < cfg.class_count; ++a) {
    if (cfg.class_means[a].size() != cfg.feature_dim) {
      throw Error(Errc::dimension_mismatch, "class mean " + std::to_string(a) + " has wrong dimension");
    }
    for (std::size_t b = 0; b < a; ++b) {
      if (cfg.class_means[a] == cfg.class_means[b]) {
        throw Error(Errc::invalid_argument, "class means must be pairwise distinct");
      }
    }
  }

  std::vector<std::string> names;
  for (std::size_t c = 0; c < cfg.class_count; ++c) names.push_back(synthetic_class_name(c, cfg.class_count));

  Dataset ds;
  ds.n_features = cfg.feature_dim;
  ds.encoding = LabelEncoding::from_names(names);
  for (std::size_t j = 0; j < cfg.feature_dim; ++j) ds.feature_names.push_back("f" + std::to_string(j));
  ds.features.reserve(cfg.class_count * cfg.samples_per_class * cfg.feature_dim);

  Rng rng(cfg.seed);
  for (std::size_t c = 0; c < cfg.class_count; ++c) {
    for (std::size_t s = 0; s < cfg.samples_per_class; ++s) {
      for (std::size_t j = 0; j < cfg.feature_dim; ++j) {
        ds.features.push_back(cfg.class_means[c][j] + cfg.overlap_sigma * rng.normal());
      }
      ds.labels.push_back(ds.encoding.encode(names[c]));
      ds.sample_ids.push_back("syn-" + std::to_string(ds.labels.size() - 1));
    }
  }
  return ds;
}

}  // namespace neurosense
