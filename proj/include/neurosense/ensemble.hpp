#pragma once

#include <string>
#include <utility>
#include <vector>

#include "neurosense/domain.hpp"
#include "neurosense/error.hpp"

namespace neurosense {

struct EnsemblePrediction {
  ProbabilityVector mean_probs;
  ClassIndex predicted_class = 0;
  std::vector<std::pair<std::string, ProbabilityVector>> member_probs;
};

// Unweighted mean of member distributions; argmax ties go to the lowest class index.
inline EnsemblePrediction soft_vote(std::vector<std::pair<std::string, ProbabilityVector>> members) {
  if (members.empty()) throw Error(Errc::empty_member_set, "soft vote needs at least one member");
  const std::size_t c_count = members.front().second.class_count();
  std::vector<double> mean(c_count, 0.0);
  for (const auto& [id, p] : members) {
    if (p.class_count() != c_count) {
      throw Error(Errc::class_count_mismatch, "member '" + id + "' has " + std::to_string(p.class_count()) +
                                                  " classes, expected " + std::to_string(c_count));
    }
    for (std::size_t c = 0; c < c_count; ++c) mean[c] += p[c];
  }
  const double m = static_cast<double>(members.size());
  for (double& v : mean) v /= m;
  auto probs = ProbabilityVector::validate(std::move(mean));
  const ClassIndex predicted = probs.argmax();
  return {std::move(probs), predicted, std::move(members)};
}

inline EnsemblePrediction soft_vote(const std::vector<ProbabilityVector>& members) {
  std::vector<std::pair<std::string, ProbabilityVector>> named;
  named.reserve(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) named.emplace_back("m" + std::to_string(i), members[i]);
  return soft_vote(std::move(named));
}

}  // namespace neurosense
