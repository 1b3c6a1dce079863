#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "neurosense/abstention.hpp"
#include "neurosense/bundle.hpp"
#include "neurosense/ensemble.hpp"
#include "neurosense/external.hpp"
#include "neurosense/neutrosophic.hpp"

namespace neurosense {

// standardize -> each learner -> soft vote. External members join when they
// hold a vector for the sample id.
inline EnsemblePrediction ensemble_predict(const ModelBundle& bundle, std::span<const double> raw_features,
                                           const std::string& sample_id = {},
                                           std::span<const ExternalProbabilities> externals = {}) {
  if (raw_features.size() != bundle.feature_count()) {
    throw Error(Errc::dimension_mismatch, "expected " + std::to_string(bundle.feature_count()) +
                                              " features, got " + std::to_string(raw_features.size()));
  }
  const auto z = bundle.standardizer.apply_row(raw_features);
  std::vector<std::pair<std::string, ProbabilityVector>> members;
  if (bundle.logistic) members.emplace_back("logistic", bundle.logistic->predict_proba(z));
  if (bundle.forest) members.emplace_back("forest", bundle.forest->predict_proba(z));
  for (const auto& ext : externals) {
    if (const auto* p = ext.find(sample_id)) members.emplace_back(ext.model_id, *p);
  }
  return soft_vote(std::move(members));
}

// Scores every row of a raw (imputed, unstandardized) dataset with the bundle.
inline std::vector<ScoredPrediction> score_dataset(const ModelBundle& bundle, const Dataset& raw,
                                                   std::span<const ExternalProbabilities> externals = {},
                                                   std::vector<EnsemblePrediction>* ensemble_out = nullptr) {
  std::vector<ScoredPrediction> out;
  out.reserve(raw.rows());
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    const std::string id = raw.sample_ids.empty() ? "row-" + std::to_string(i) : raw.sample_ids[i];
    auto pred = ensemble_predict(bundle, raw.row(i), id, externals);
    out.push_back({id, pred.predicted_class, neutrosophic_score(pred.mean_probs), raw.labels[i]});
    if (ensemble_out) ensemble_out->push_back(std::move(pred));
  }
  return out;
}

}  // namespace neurosense
