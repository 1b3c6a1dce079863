#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "neurosense/domain.hpp"
#include "neurosense/error.hpp"
#include "neurosense/forest.hpp"
#include "neurosense/logistic.hpp"
#include "neurosense/preprocess.hpp"

namespace neurosense {

inline constexpr const char* kBundleFormatVersion = "1.0";

struct ExternalModelRef {
  std::string model_id;
  std::string path;
  std::string sha256;

  friend bool operator==(const ExternalModelRef&, const ExternalModelRef&) = default;
};

struct ModelBundle {
  std::string format_version = kBundleFormatVersion;
  LabelEncoding encoding;
  std::vector<std::string> feature_names;
  Standardizer standardizer;
  std::optional<LogisticModel> logistic;
  std::optional<ForestModel> forest;
  std::vector<ExternalModelRef> external_models;
  ThresholdPolicy policy;
  std::string normal_class = "Normal";
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t class_count() const { return encoding.size(); }
  std::size_t feature_count() const { return standardizer.means.size(); }

  // "normal" when the label is the configured benign class, otherwise "malicious".
  std::string binary_view(ClassIndex c) const { return encoding.decode(c) == normal_class ? "normal" : "malicious"; }
};

namespace bundle_json {

using nlohmann::json;

inline json policy_to_json(const ThresholdPolicy& p) {
  json per_class = json::object();
  for (const auto& [c, t] : p.per_class_tau) per_class[std::to_string(c)] = t;
  json j = {{"mode", p.mode == PolicyMode::global ? "global" : "per_class"},
            {"global_tau", p.global_tau},
            {"per_class_tau", per_class},
            {"version", p.version}};
  j["percentile"] = p.percentile ? json(*p.percentile) : json(nullptr);
  return j;
}

inline ThresholdPolicy policy_from_json(const json& j) {
  ThresholdPolicy p;
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "global") {
    p.mode = PolicyMode::global;
  } else if (mode == "per_class") {
    p.mode = PolicyMode::per_class;
  } else {
    throw Error(Errc::parse_error, "unknown policy mode '" + mode + "'");
  }
  p.global_tau = j.at("global_tau").get<double>();
  for (const auto& [k, v] : j.at("per_class_tau").items()) p.per_class_tau[std::stoul(k)] = v.get<double>();
  if (!j.at("percentile").is_null()) p.percentile = j.at("percentile").get<double>();
  p.version = j.at("version").get<std::uint64_t>();
  return p;
}

inline json standardizer_to_json(const Standardizer& s) {
  return {{"means", s.means}, {"stddevs", s.stddevs}, {"zero_variance", s.zero_variance}};
}

inline Standardizer standardizer_from_json(const json& j) {
  Standardizer s;
  s.means = j.at("means").get<std::vector<double>>();
  s.stddevs = j.at("stddevs").get<std::vector<double>>();
  s.zero_variance = j.at("zero_variance").get<std::vector<bool>>();
  if (s.means.size() != s.stddevs.size() || s.means.size() != s.zero_variance.size()) {
    throw Error(Errc::parse_error, "standardizer arrays differ in length");
  }
  return s;
}

inline json logistic_to_json(const LogisticModel& m) {
  return {{"n_classes", m.n_classes},
          {"n_features", m.n_features},
          {"weights", m.weights},
          {"biases", m.biases},
          {"l2_lambda", m.l2_lambda},
          {"class_weights", m.class_weights},
          {"diagnostics",
           {{"iterations", m.diagnostics.iterations},
            {"converged", m.diagnostics.converged},
            {"gradient_max_norm", m.diagnostics.gradient_max_norm},
            {"final_loss", m.diagnostics.loss_history.empty() ? 0.0 : m.diagnostics.loss_history.back()}}}};
}

inline LogisticModel logistic_from_json(const json& j) {
  LogisticModel m;
  m.n_classes = j.at("n_classes").get<std::size_t>();
  m.n_features = j.at("n_features").get<std::size_t>();
  m.weights = j.at("weights").get<std::vector<double>>();
  m.biases = j.at("biases").get<std::vector<double>>();
  m.l2_lambda = j.at("l2_lambda").get<double>();
  m.class_weights = j.at("class_weights").get<std::vector<double>>();
  const auto& d = j.at("diagnostics");
  m.diagnostics.iterations = d.at("iterations").get<std::size_t>();
  m.diagnostics.converged = d.at("converged").get<bool>();
  m.diagnostics.gradient_max_norm = d.at("gradient_max_norm").get<double>();
  m.diagnostics.loss_history = {d.at("final_loss").get<double>()};
  if (m.weights.size() != m.n_classes * m.n_features || m.biases.size() != m.n_classes) {
    throw Error(Errc::parse_error, "logistic parameter shapes do not match");
  }
  return m;
}

// Trees are stored column-wise to keep large forests compact.
inline json forest_to_json(const ForestModel& f) {
  json trees = json::array();
  for (const auto& t : f.trees) {
    json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
         gain = json::array(), hist = json::array();
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      gain.push_back(n.gain);
      hist.push_back(n.histogram);
    }
    trees.push_back({{"feature", feature},
                     {"threshold", threshold},
                     {"left", left},
                     {"right", right},
                     {"gain", gain},
                     {"histogram", hist}});
  }
  return {{"n_classes", f.n_classes},
          {"n_features", f.n_features},
          {"n_trees", f.n_trees},
          {"max_depth", f.max_depth},
          {"features_per_split", f.features_per_split},
          {"seed", f.seed},
          {"class_weights", f.class_weights},
          {"trees", trees}};
}

inline ForestModel forest_from_json(const json& j) {
  ForestModel f;
  f.n_classes = j.at("n_classes").get<std::size_t>();
  f.n_features = j.at("n_features").get<std::size_t>();
  f.n_trees = j.at("n_trees").get<std::size_t>();
  f.max_depth = j.at("max_depth").get<std::size_t>();
  f.features_per_split = j.at("features_per_split").get<std::size_t>();
  f.seed = j.at("seed").get<std::uint64_t>();
  f.class_weights = j.at("class_weights").get<std::vector<double>>();
  for (const auto& jt : j.at("trees")) {
    DecisionTree t;
    const auto& feature = jt.at("feature");
    const std::size_t n = feature.size();
    t.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& node = t.nodes[i];
      node.feature = feature[i].get<std::int32_t>();
      node.threshold = jt.at("threshold")[i].get<double>();
      node.left = jt.at("left")[i].get<std::int32_t>();
      node.right = jt.at("right")[i].get<std::int32_t>();
      node.gain = jt.at("gain")[i].get<double>();
      node.histogram = jt.at("histogram")[i].get<std::vector<double>>();
      const bool leaf_ok = node.is_leaf() && node.histogram.size() == f.n_classes;
      const bool split_ok = !node.is_leaf() && node.feature < static_cast<std::int32_t>(f.n_features) &&
                            node.left > static_cast<std::int32_t>(i) && node.right > static_cast<std::int32_t>(i) &&
                            static_cast<std::size_t>(node.left) < n && static_cast<std::size_t>(node.right) < n;
      if (!leaf_ok && !split_ok) throw Error(Errc::parse_error, "malformed tree node " + std::to_string(i));
    }
    f.trees.push_back(std::move(t));
  }
  if (f.trees.size() != f.n_trees || f.trees.empty()) throw Error(Errc::parse_error, "tree count mismatch");
  return f;
}

}  // namespace bundle_json

inline nlohmann::json bundle_to_json(const ModelBundle& b) {
  using namespace bundle_json;
  json learners = json::object();
  learners["logistic"] = b.logistic ? logistic_to_json(*b.logistic) : json(nullptr);
  learners["forest"] = b.forest ? forest_to_json(*b.forest) : json(nullptr);
  json externals = json::array();
  for (const auto& e : b.external_models) externals.push_back({{"model_id", e.model_id}, {"path", e.path}, {"sha256", e.sha256}});
  learners["external"] = externals;
  return {{"format_version", b.format_version},
          {"classes", b.encoding.names()},
          {"feature_names", b.feature_names},
          {"standardizer", standardizer_to_json(b.standardizer)},
          {"learners", learners},
          {"policy", policy_to_json(b.policy)},
          {"normal_class", b.normal_class},
          {"metadata", b.metadata}};
}

inline ModelBundle bundle_from_json(const nlohmann::json& j) {
  using namespace bundle_json;
  try {
    ModelBundle b;
    b.format_version = j.at("format_version").get<std::string>();
    const auto dot = b.format_version.find('.');
    if (b.format_version.substr(0, dot) != "1") {
      throw Error(Errc::unsupported_version, "bundle format " + b.format_version + " (this build reads 1.x)");
    }
    auto names = j.at("classes").get<std::vector<std::string>>();
    b.encoding = LabelEncoding::from_names(names);
    if (b.encoding.names() != names) throw Error(Errc::parse_error, "bundle classes are not in encoding order");
    b.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    b.standardizer = standardizer_from_json(j.at("standardizer"));
    const auto& learners = j.at("learners");
    if (!learners.at("logistic").is_null()) b.logistic = logistic_from_json(learners.at("logistic"));
    if (!learners.at("forest").is_null()) b.forest = forest_from_json(learners.at("forest"));
    for (const auto& e : learners.at("external")) {
      b.external_models.push_back({e.at("model_id").get<std::string>(), e.at("path").get<std::string>(),
                                   e.at("sha256").get<std::string>()});
    }
    b.policy = policy_from_json(j.at("policy"));
    b.policy.validate(b.encoding.size());
    b.normal_class = j.at("normal_class").get<std::string>();
    b.metadata = j.at("metadata");

    const std::size_t k = b.encoding.size(), d = b.standardizer.means.size();
    if (b.logistic && (b.logistic->n_classes != k || b.logistic->n_features != d)) {
      throw Error(Errc::class_mismatch, "logistic model shape disagrees with bundle encoding/standardizer");
    }
    if (b.forest && (b.forest->n_classes != k || b.forest->n_features != d)) {
      throw Error(Errc::class_mismatch, "forest shape disagrees with bundle encoding/standardizer");
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, std::string("bundle: ") + e.what());
  }
}

inline std::string serialize_bundle(const ModelBundle& b) { return bundle_to_json(b).dump(1) + "\n"; }

inline ModelBundle parse_bundle(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, std::string("bundle: ") + e.what());
  }
  return bundle_from_json(j);
}

inline void save_bundle(const std::string& path, const ModelBundle& b) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path);
  out << serialize_bundle(b);
}

inline ModelBundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open bundle " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_bundle(ss.str());
}

}  // namespace neurosense
