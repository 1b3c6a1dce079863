#pragma once

#include <cstddef>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "neurosense/domain.hpp"
#include "neurosense/error.hpp"

namespace neurosense {

using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

// Entry (i, j) counts samples of true class i predicted as j.
inline ConfusionMatrix confusion_matrix(std::span<const ClassIndex> y_true, std::span<const ClassIndex> y_pred,
                                        std::size_t class_count) {
  if (y_true.size() != y_pred.size()) {
    throw Error(Errc::length_mismatch, std::to_string(y_true.size()) + " labels vs " +
                                           std::to_string(y_pred.size()) + " predictions");
  }
  ConfusionMatrix m(class_count, std::vector<std::size_t>(class_count, 0));
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] >= class_count || y_pred[i] >= class_count) {
      throw Error(Errc::index_out_of_range, "class index at position " + std::to_string(i));
    }
    ++m[y_true[i]][y_pred[i]];
  }
  return m;
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  // Set when the metric's denominator was zero and it was reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
};

struct AverageMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ClassReport {
  std::vector<ClassMetrics> per_class;
  AverageMetrics macro_avg;
  AverageMetrics weighted_avg;
  double accuracy = 0.0;
  std::size_t total = 0;
};

inline ClassReport classification_report(const ConfusionMatrix& m) {
  const std::size_t k = m.size();
  ClassReport r;
  r.per_class.resize(k);
  std::size_t trace = 0;
  std::vector<std::size_t> predicted(k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      r.per_class[i].support += m[i][j];
      predicted[j] += m[i][j];
    }
    trace += m[i][i];
    r.total += r.per_class[i].support;
  }
  for (std::size_t c = 0; c < k; ++c) {
    auto& cm = r.per_class[c];
    const auto tp = static_cast<double>(m[c][c]);
    cm.precision_undefined = predicted[c] == 0;
    cm.recall_undefined = cm.support == 0;
    cm.precision = cm.precision_undefined ? 0.0 : tp / static_cast<double>(predicted[c]);
    cm.recall = cm.recall_undefined ? 0.0 : tp / static_cast<double>(cm.support);
    cm.f1 = cm.precision + cm.recall > 0.0 ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall) : 0.0;
  }
  if (k > 0) {
    for (const auto& cm : r.per_class) {
      r.macro_avg.precision += cm.precision / static_cast<double>(k);
      r.macro_avg.recall += cm.recall / static_cast<double>(k);
      r.macro_avg.f1 += cm.f1 / static_cast<double>(k);
    }
  }
  if (r.total > 0) {
    const double n = static_cast<double>(r.total);
    for (const auto& cm : r.per_class) {
      const double w = static_cast<double>(cm.support) / n;
      r.weighted_avg.precision += w * cm.precision;
      r.weighted_avg.recall += w * cm.recall;
      r.weighted_avg.f1 += w * cm.f1;
    }
    r.accuracy = static_cast<double>(trace) / n;
  }
  return r;
}

inline ClassReport classification_report(std::span<const ClassIndex> y_true, std::span<const ClassIndex> y_pred,
                                         std::size_t class_count) {
  return classification_report(confusion_matrix(y_true, y_pred, class_count));
}

// Plain-text table, two decimals.
inline std::string render_report(const ClassReport& r, const LabelEncoding& enc) {
  std::size_t width = 12;
  for (const auto& n : enc.names()) width = std::max(width, n.size() + 2);
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << std::left << std::setw(static_cast<int>(width)) << "class" << std::right << std::setw(10) << "precision"
      << std::setw(10) << "recall" << std::setw(10) << "f1" << std::setw(10) << "support" << '\n';
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    out << std::left << std::setw(static_cast<int>(width)) << enc.decode(c) << std::right << std::setw(10)
        << m.precision << std::setw(10) << m.recall << std::setw(10) << m.f1 << std::setw(10) << m.support;
    if (m.precision_undefined) out << "  (never predicted)";
    out << '\n';
  }
  auto avg = [&](const char* name, const AverageMetrics& a) {
    out << std::left << std::setw(static_cast<int>(width)) << name << std::right << std::setw(10) << a.precision
        << std::setw(10) << a.recall << std::setw(10) << a.f1 << std::setw(10) << r.total << '\n';
  };
  avg("macro avg", r.macro_avg);
  avg("weighted avg", r.weighted_avg);
  out << std::left << std::setw(static_cast<int>(width)) << "accuracy" << std::right << std::setw(30) << r.accuracy
      << std::setw(10) << r.total << '\n';
  return out.str();
}

}  // namespace neurosense
