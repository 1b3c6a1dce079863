#pragma once

#include <algorithm>
#include <cmath>

#include "neurosense/domain.hpp"

namespace neurosense {

// Entries below this are exact zeros inside the entropy sum.
inline constexpr double kEntropyZeroFloor = 1e-15;

// Shannon entropy divided by log(C), in [0, 1].
inline double normalized_entropy(const ProbabilityVector& p) {
  double h = 0.0;
  std::size_t support = 0;
  for (double v : p.values()) {
    if (v >= kEntropyZeroFloor) {
      h -= v * std::log(v);
      ++support;
    }
  }
  if (support <= 1) return 0.0;
  const double normalized = h / std::log(static_cast<double>(p.class_count()));
  return std::clamp(normalized, 0.0, 1.0);
}

// Truth is the argmax probability, falsity its complement, and indeterminacy
// the normalized entropy of the whole distribution.
inline NeutrosophicScore neutrosophic_score(const ProbabilityVector& p) {
  const double truth = p[p.argmax()];
  return {truth, normalized_entropy(p), 1.0 - truth};
}

}  // namespace neurosense
