#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "neurosense/domain.hpp"
#include "neurosense/ensemble.hpp"
#include "neurosense/error.hpp"
#include "neurosense/neutrosophic.hpp"

namespace neurosense {

struct ScoredPrediction {
  std::string sample_id;
  ClassIndex predicted_class = 0;
  NeutrosophicScore score;
  std::optional<ClassIndex> true_class;

  bool correct() const { return true_class && *true_class == predicted_class; }
};

struct SweepRow {
  double tau = 0.0;
  double accuracy_retained = 0.0;
  double coverage = 0.0;
  double youden = 0.0;
  bool empty_retention = false;
};

// Abstains iff I > applied threshold. The predicted class is kept either way.
inline Decision decide(ClassIndex predicted_class, const NeutrosophicScore& score, const ThresholdPolicy& policy,
                       std::string sample_id = {}) {
  Decision d;
  d.predicted_class = predicted_class;
  d.score = score;
  d.applied_threshold = policy.threshold_for(predicted_class);
  d.abstained = abstains(score.indeterminacy, d.applied_threshold);
  d.policy_version = policy.version;
  d.sample_id = std::move(sample_id);
  return d;
}

inline Decision decide(const EnsemblePrediction& pred, const ThresholdPolicy& policy, std::string sample_id = {}) {
  return decide(pred.predicted_class, neutrosophic_score(pred.mean_probs), policy, std::move(sample_id));
}

// Parses "start:stop:step" into an inclusive grid. Values are rounded to 1e-9
// so 0.1 + 6 * 0.05 prints as 0.4.
inline std::vector<double> parse_grid(const std::string& text) {
  double start = 0, stop = 0, step = 0;
  char c1 = 0, c2 = 0;
  std::istringstream in(text);
  if (!(in >> start >> c1 >> stop >> c2 >> step) || c1 != ':' || c2 != ':' || !in.eof()) {
    throw Error(Errc::invalid_argument, "grid must be start:stop:step, got '" + text + "'");
  }
  if (!(step > 0.0) || stop < start || start < 0.0 || stop > 1.0) {
    throw Error(Errc::invalid_argument, "grid must satisfy 0 <= start <= stop <= 1 and step > 0");
  }
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> grid;
  for (std::size_t i = 0; i < n; ++i) grid.push_back(std::round((start + static_cast<double>(i) * step) * 1e9) / 1e9);
  return grid;
}

inline const std::vector<double>& default_grid() {
  static const std::vector<double> grid = parse_grid("0.1:0.9:0.05");
  return grid;
}

// For each tau, retains predictions with I <= tau and reports accuracy on the
// retained set, coverage and their product. An empty retained set reports
// accuracy 1.0 with empty_retention set, and youden 0.
inline std::vector<SweepRow> sweep_thresholds(const std::vector<ScoredPrediction>& preds,
                                              const std::vector<double>& grid) {
  if (preds.empty()) throw Error(Errc::empty_input, "sweep needs at least one prediction");
  for (const auto& p : preds) {
    if (!p.true_class) throw Error(Errc::invalid_argument, "sweep needs true labels (" + p.sample_id + ")");
  }
  const double n = static_cast<double>(preds.size());
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (double tau : grid) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw Error(Errc::invalid_argument, "grid value outside [0,1]");
    std::size_t retained = 0, correct = 0;
    for (const auto& p : preds) {
      if (p.score.indeterminacy <= tau) {
        ++retained;
        if (p.correct()) ++correct;
      }
    }
    SweepRow row;
    row.tau = tau;
    row.coverage = static_cast<double>(retained) / n;
    row.empty_retention = retained == 0;
    row.accuracy_retained = retained == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(retained);
    row.youden = row.accuracy_retained * row.coverage;
    rows.push_back(row);
  }
  return rows;
}

// Tau with the highest youden; ties prefer the larger tau.
inline double best_youden(const std::vector<SweepRow>& rows) {
  if (rows.empty()) throw Error(Errc::empty_input, "no sweep rows");
  const SweepRow* best = &rows.front();
  for (const auto& r : rows) {
    if (r.youden > best->youden || (r.youden == best->youden && r.tau > best->tau)) best = &r;
  }
  return best->tau;
}

// q-th percentile as the ceil(q/100 * n)-th smallest value (1-based).
inline double nearest_rank_percentile(std::vector<double> values, double percentile) {
  if (values.empty()) throw Error(Errc::empty_input, "percentile of empty set");
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

// Per-predicted-class thresholds at the given percentile of I. Classes with no
// calibration predictions keep the base policy's threshold for them.
inline ThresholdPolicy fit_class_thresholds(const std::vector<ScoredPrediction>& calibration, double percentile,
                                            std::size_t class_count, const ThresholdPolicy& base = {}) {
  if (!(percentile > 0.0 && percentile <= 100.0)) {
    throw Error(Errc::invalid_argument, "percentile must be in (0,100]");
  }
  std::map<ClassIndex, std::vector<double>> by_class;
  for (const auto& p : calibration) {
    if (p.predicted_class >= class_count) {
      throw Error(Errc::index_out_of_range, "predicted class " + std::to_string(p.predicted_class));
    }
    by_class[p.predicted_class].push_back(p.score.indeterminacy);
  }
  ThresholdPolicy policy;
  policy.mode = PolicyMode::per_class;
  policy.global_tau = base.global_tau;
  policy.percentile = percentile;
  policy.version = base.version + 1;
  for (ClassIndex c = 0; c < class_count; ++c) {
    auto it = by_class.find(c);
    if (it != by_class.end()) {
      policy.per_class_tau[c] = nearest_rank_percentile(std::move(it->second), percentile);
    } else if (base.mode == PolicyMode::per_class && base.per_class_tau.contains(c)) {
      policy.per_class_tau[c] = base.per_class_tau.at(c);
    } else {
      policy.per_class_tau[c] = base.global_tau;
    }
  }
  policy.validate(class_count);
  return policy;
}

struct CorrectnessSplit {
  std::optional<double> mean_correct;
  std::optional<double> mean_incorrect;
  std::size_t n_correct = 0;
  std::size_t n_incorrect = 0;
};

inline CorrectnessSplit indeterminacy_by_correctness(const std::vector<ScoredPrediction>& preds) {
  if (preds.empty()) throw Error(Errc::empty_input, "no predictions");
  double sum_ok = 0.0, sum_bad = 0.0;
  CorrectnessSplit out;
  for (const auto& p : preds) {
    if (!p.true_class) throw Error(Errc::invalid_argument, "missing true label for " + p.sample_id);
    if (p.correct()) {
      sum_ok += p.score.indeterminacy;
      ++out.n_correct;
    } else {
      sum_bad += p.score.indeterminacy;
      ++out.n_incorrect;
    }
  }
  if (out.n_correct) out.mean_correct = sum_ok / static_cast<double>(out.n_correct);
  if (out.n_incorrect) out.mean_incorrect = sum_bad / static_cast<double>(out.n_incorrect);
  return out;
}

// Fraction of each predicted class whose I exceeds its threshold under `policy`.
inline std::map<ClassIndex, double> flag_rates(const std::vector<ScoredPrediction>& preds,
                                               const ThresholdPolicy& policy) {
  std::map<ClassIndex, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& p : preds) {
    auto& [flagged, total] = counts[p.predicted_class];
    ++total;
    if (abstains(p.score.indeterminacy, policy.threshold_for(p.predicted_class))) ++flagged;
  }
  std::map<ClassIndex, double> rates;
  for (const auto& [c, ft] : counts) rates[c] = static_cast<double>(ft.first) / static_cast<double>(ft.second);
  return rates;
}

}  // namespace neurosense
