#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "neurosense/domain.hpp"
#include "neurosense/error.hpp"
#include "neurosense/logistic.hpp"
#include "neurosense/rng.hpp"

namespace neurosense {

struct TreeNode {
  static constexpr std::int32_t kLeaf = -1;

  std::int32_t feature = kLeaf;
  double threshold = 0.0;  // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  double gain = 0.0;
  std::vector<double> histogram;  // weighted class counts, leaves only

  bool is_leaf() const noexcept { return feature == kLeaf; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i];
  }

  std::size_t depth() const {
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    std::size_t deepest = 0;
    while (!stack.empty()) {
      auto [i, d] = stack.back();
      stack.pop_back();
      deepest = std::max(deepest, d);
      if (!nodes[i].is_leaf()) {
        stack.emplace_back(static_cast<std::size_t>(nodes[i].left), d + 1);
        stack.emplace_back(static_cast<std::size_t>(nodes[i].right), d + 1);
      }
    }
    return deepest;
  }

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct ForestOptions {
  std::size_t n_trees = 100;
  std::size_t max_depth = 20;
  std::uint64_t seed = 42;
};

inline std::size_t log2_features(std::size_t d) {
  if (d < 2) return 1;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::log2(static_cast<double>(d)))));
}

struct ForestModel {
  std::size_t n_classes = 0;
  std::size_t n_features = 0;
  std::size_t n_trees = 0;
  std::size_t max_depth = 0;
  std::size_t features_per_split = 1;
  std::uint64_t seed = 0;
  std::vector<double> class_weights;
  std::vector<DecisionTree> trees;

  // Mean over trees of each leaf's normalized weighted histogram.
  ProbabilityVector predict_proba(std::span<const double> x) const {
    if (x.size() != n_features) {
      throw Error(Errc::dimension_mismatch, "forest expects " + std::to_string(n_features) + " features, got " +
                                                std::to_string(x.size()));
    }
    std::vector<double> acc(n_classes, 0.0);
    for (const auto& t : trees) {
      const auto& h = t.leaf_for(x).histogram;
      const double total = std::accumulate(h.begin(), h.end(), 0.0);
      for (std::size_t c = 0; c < n_classes; ++c) acc[c] += h[c] / total;
    }
    for (double& v : acc) v /= static_cast<double>(trees.size());
    return normalize_scores(std::move(acc));
  }

  friend bool operator==(const ForestModel&, const ForestModel&) = default;
};

namespace forest_detail {

struct Builder {
  const Dataset& data;
  std::span<const double> class_weights;
  std::size_t max_depth;
  std::size_t mtry;
  Rng rng;
  DecisionTree tree;

  std::vector<double> histogram(std::span<const std::size_t> idx) const {
    std::vector<double> h(data.encoding.size(), 0.0);
    for (std::size_t i : idx) h[data.labels[i]] += class_weights[data.labels[i]];
    return h;
  }

  struct Candidate {
    bool found = false;
    double gain = 0.0;
    std::size_t feature = 0;
    double threshold = 0.0;
  };

  static bool better(const Candidate& a, const Candidate& b) {
    if (!b.found) return true;
    if (a.gain != b.gain) return a.gain > b.gain;
    if (a.feature != b.feature) return a.feature < b.feature;
    return a.threshold < b.threshold;
  }

  // Best midpoint split on one feature by weighted Gini decrease, expressed as
  // sum(h_L^2)/W_L + sum(h_R^2)/W_R - sum(h^2)/W. Returns found=false when the
  // feature is constant over idx.
  Candidate best_split_on(std::span<std::size_t> idx, std::size_t f, const std::vector<double>& parent) {
    Candidate best;
    best.feature = f;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const double va = data.row(a)[f], vb = data.row(b)[f];
      return va < vb || (va == vb && a < b);
    });
    const double first = data.row(idx.front())[f];
    const double last = data.row(idx.back())[f];
    if (first == last) return best;

    double w_total = 0.0, sq_total = 0.0;
    for (double h : parent) {
      w_total += h;
      sq_total += h * h;
    }
    const double parent_term = sq_total / w_total;
    std::vector<double> left(parent.size(), 0.0);
    double w_left = 0.0, sq_left = 0.0;
    for (std::size_t p = 0; p + 1 < idx.size(); ++p) {
      const ClassIndex c = data.labels[idx[p]];
      const double w = class_weights[c];
      sq_left += (left[c] + w) * (left[c] + w) - left[c] * left[c];
      left[c] += w;
      w_left += w;
      const double v = data.row(idx[p])[f];
      const double v_next = data.row(idx[p + 1])[f];
      if (v == v_next) continue;
      double sq_right = 0.0;
      for (std::size_t k = 0; k < parent.size(); ++k) {
        const double r = parent[k] - left[k];
        sq_right += r * r;
      }
      const double w_right = w_total - w_left;
      const double gain = sq_left / w_left + sq_right / w_right - parent_term;
      double thr = v + (v_next - v) / 2.0;
      if (!(thr < v_next)) thr = v;
      Candidate cand{true, gain, f, thr};
      if (better(cand, best)) best = cand;
    }
    return best;
  }

  std::int32_t build(std::span<std::size_t> idx, std::size_t depth) {
    const auto node_id = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    auto hist = histogram(idx);
    const auto nonzero = std::count_if(hist.begin(), hist.end(), [](double h) { return h > 0.0; });
    if (depth >= max_depth || nonzero <= 1 || idx.size() < 2) {
      tree.nodes[static_cast<std::size_t>(node_id)].histogram = std::move(hist);
      return node_id;
    }

    // Visit features in random order until mtry non-constant ones have been scored.
    std::vector<std::size_t> features(data.n_features);
    std::iota(features.begin(), features.end(), std::size_t{0});
    rng.shuffle(features);
    Candidate best;
    std::size_t scored = 0;
    for (std::size_t f : features) {
      if (scored >= mtry) break;
      Candidate cand = best_split_on(idx, f, hist);
      if (!cand.found) continue;
      ++scored;
      if (better(cand, best)) best = cand;
    }
    if (!best.found || best.gain < -1e-9) {
      tree.nodes[static_cast<std::size_t>(node_id)].histogram = std::move(hist);
      return node_id;
    }

    auto mid = std::partition(idx.begin(), idx.end(),
                              [&](std::size_t i) { return data.row(i)[best.feature] <= best.threshold; });
    const auto n_left = static_cast<std::size_t>(mid - idx.begin());
    // Partition is not stable; restore index order so the result does not
    // depend on the standard library's partition algorithm.
    std::sort(idx.begin(), mid);
    std::sort(mid, idx.end());
    const auto l = build(idx.subspan(0, n_left), depth + 1);
    const auto r = build(idx.subspan(n_left), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(node_id)];
    node.feature = static_cast<std::int32_t>(best.feature);
    node.threshold = best.threshold;
    node.gain = std::max(0.0, best.gain);
    node.left = l;
    node.right = r;
    return node_id;
  }
};

}  // namespace forest_detail

// Bootstrap-aggregated Gini trees. Tree t draws its bootstrap and feature
// subsets from seed + t, so the result is independent of training order.
inline ForestModel train_forest(const Dataset& train, const ForestOptions& opt = {}) {
  if (opt.n_trees < 1) throw Error(Errc::invalid_argument, "n_trees must be >= 1");
  if (opt.max_depth < 1) throw Error(Errc::invalid_argument, "max_depth must be >= 1");
  if (train.rows() == 0) throw Error(Errc::empty_input, "no training rows");
  train.check();

  ForestModel model;
  model.n_classes = train.encoding.size();
  model.n_features = train.n_features;
  model.n_trees = opt.n_trees;
  model.max_depth = opt.max_depth;
  model.features_per_split = log2_features(train.n_features);
  model.seed = opt.seed;
  model.class_weights = balanced_class_weights(train);

  const std::size_t n = train.rows();
  for (std::size_t t = 0; t < opt.n_trees; ++t) {
    forest_detail::Builder b{train, model.class_weights, opt.max_depth, model.features_per_split,
                             Rng(opt.seed + t), {}};
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = static_cast<std::size_t>(b.rng.below(n));
    std::sort(sample.begin(), sample.end());
    b.build(sample, 0);
    model.trees.push_back(std::move(b.tree));
  }
  return model;
}

}  // namespace neurosense
