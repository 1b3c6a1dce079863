#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "neurosense/abstention.hpp"
#include "neurosense/audit.hpp"
#include "neurosense/bundle.hpp"
#include "neurosense/pipeline.hpp"

namespace neurosense {

enum class ReviewStatus { pending, confirmed, relabeled };

inline std::string to_string(ReviewStatus s) {
  switch (s) {
    case ReviewStatus::pending: return "pending";
    case ReviewStatus::confirmed: return "confirmed";
    case ReviewStatus::relabeled: return "relabeled";
  }
  return "pending";
}

inline std::optional<ReviewStatus> review_status_from_string(const std::string& s) {
  if (s == "pending" || s == "PENDING") return ReviewStatus::pending;
  if (s == "confirmed" || s == "CONFIRMED") return ReviewStatus::confirmed;
  if (s == "relabeled" || s == "RELABELED") return ReviewStatus::relabeled;
  return std::nullopt;
}

struct ReviewItem {
  std::string id;
  std::string sample_id;
  std::vector<double> features;  // raw, pre-standardization
  Decision decision;
  ReviewStatus status = ReviewStatus::pending;
  std::optional<ClassIndex> analyst_label;
  std::int64_t created_at = 0;
  std::optional<std::int64_t> resolved_at;

  friend bool operator==(const ReviewItem&, const ReviewItem&) = default;
};

struct Verdict {
  VerdictKind kind = VerdictKind::confirm;
  std::optional<ClassIndex> label;

  static Verdict confirm() { return {VerdictKind::confirm, std::nullopt}; }
  static Verdict relabel(ClassIndex c) { return {VerdictKind::relabel, c}; }
};

struct ServiceMetrics {
  std::size_t decisions = 0;
  std::size_t abstentions = 0;
  std::size_t pending_reviews = 0;
  std::map<ClassIndex, double> flag_rates;  // abstained / decided, by predicted class
};

// The decision engine: scores samples against an immutable bundle, logs every
// outcome, queues abstentions for review and refits per-class thresholds from
// the accumulated outcomes. All state is rebuilt from the audit log on start.
class DecisionService {
 public:
  DecisionService(ModelBundle bundle, const std::string& audit_path, Clock clock = system_clock_us)
      : bundle_(std::make_shared<const ModelBundle>(std::move(bundle))),
        policy_(std::make_shared<const ThresholdPolicy>(bundle_->policy)) {
    replay(AuditLog::read(audit_path));
    log_ = std::make_unique<AuditLog>(audit_path, std::move(clock));
    log_->resume_after(last_timestamp_);
  }

  const ModelBundle& bundle() const { return *bundle_; }

  std::shared_ptr<const ThresholdPolicy> policy() const {
    std::lock_guard lock(policy_mutex_);
    return policy_;
  }

  Decision score_sample(std::span<const double> raw_features, const std::string& sample_id) {
    if (!bundle_->logistic && !bundle_->forest) {
      throw Error(Errc::bundle_not_loaded, "bundle has no in-process learners");
    }
    const auto policy_snapshot = policy();
    const auto pred = ensemble_predict(*bundle_, raw_features, sample_id);
    Decision d = decide(pred, *policy_snapshot, sample_id);

    std::lock_guard lock(state_mutex_);
    AuditRecord rec;
    rec.sample_id = sample_id;
    rec.origin = AuditOrigin::automatic;
    rec.decision = d;
    if (d.abstained) {
      rec.review_id = make_review_id(next_review_seq_);
      rec.features = std::vector<double>(raw_features.begin(), raw_features.end());
    }
    apply(log_->append(std::move(rec)));
    return d;
  }

  // Newest first. page is 1-based; page_size 0 means everything.
  std::vector<ReviewItem> list_review(std::optional<ReviewStatus> filter = std::nullopt, std::size_t page = 1,
                                      std::size_t page_size = 0) const {
    std::lock_guard lock(state_mutex_);
    std::vector<ReviewItem> matched;
    for (auto it = reviews_.rbegin(); it != reviews_.rend(); ++it) {
      if (!filter || it->status == *filter) matched.push_back(*it);
    }
    if (page_size == 0) return matched;
    const std::size_t begin = (std::max<std::size_t>(page, 1) - 1) * page_size;
    if (begin >= matched.size()) return {};
    const std::size_t end = std::min(matched.size(), begin + page_size);
    return {matched.begin() + static_cast<std::ptrdiff_t>(begin), matched.begin() + static_cast<std::ptrdiff_t>(end)};
  }

  std::size_t review_count(std::optional<ReviewStatus> filter = std::nullopt) const {
    std::lock_guard lock(state_mutex_);
    return static_cast<std::size_t>(std::count_if(reviews_.begin(), reviews_.end(), [&](const ReviewItem& r) {
      return !filter || r.status == *filter;
    }));
  }

  ReviewItem submit_verdict(const std::string& item_id, const Verdict& verdict) {
    std::lock_guard lock(state_mutex_);
    auto it = review_index_.find(item_id);
    if (it == review_index_.end()) throw Error(Errc::not_found, "review item '" + item_id + "'");
    const ReviewItem& item = reviews_[it->second];
    if (item.status != ReviewStatus::pending) {
      throw Error(Errc::already_resolved, "review item '" + item_id + "' is " + to_string(item.status));
    }
    if (verdict.kind == VerdictKind::relabel) {
      if (!verdict.label || *verdict.label >= bundle_->class_count()) {
        throw Error(Errc::unknown_class, "relabel needs a valid class");
      }
    }
    AuditRecord rec;
    rec.sample_id = item.sample_id;
    rec.origin = AuditOrigin::review_verdict;
    rec.decision = item.decision;
    rec.review_id = item_id;
    rec.verdict = verdict.kind;
    if (verdict.kind == VerdictKind::relabel) rec.analyst_label = verdict.label;
    apply(log_->append(std::move(rec)));
    return reviews_[it->second];
  }

  // Refits per-class thresholds over every auto-accepted decision plus every
  // resolved review item, then installs the policy atomically.
  ThresholdPolicy recalibrate(double percentile) {
    if (!(percentile > 0.0 && percentile <= 100.0)) {
      throw Error(Errc::invalid_argument, "percentile must be in (0,100]");
    }
    std::vector<ScoredPrediction> calibration;
    std::shared_ptr<const ThresholdPolicy> base;
    {
      std::lock_guard lock(state_mutex_);
      calibration = calibration_set();
      if (resolved_count_ == 0 || calibration.empty()) {
        throw Error(Errc::insufficient_data, "no resolved review items to recalibrate from");
      }
      base = policy();
    }
    // Fitting happens outside the state lock so decisions keep flowing.
    ThresholdPolicy fitted = fit_class_thresholds(calibration, percentile, bundle_->class_count(), *base);

    std::lock_guard lock(state_mutex_);
    fitted.version = std::max(fitted.version, policy()->version + 1);
    AuditRecord rec;
    rec.origin = AuditOrigin::recalibration;
    rec.policy = fitted;
    apply(log_->append(std::move(rec)));
    return fitted;
  }

  // Flag rates each class would see on the current calibration set if
  // thresholds were refitted at `percentile`. Never installs anything.
  std::map<ClassIndex, double> preview_flag_rates(double percentile) const {
    std::vector<ScoredPrediction> calibration;
    std::shared_ptr<const ThresholdPolicy> base;
    {
      std::lock_guard lock(state_mutex_);
      calibration = calibration_set();
      base = policy();
    }
    if (calibration.empty()) return {};
    const auto candidate = fit_class_thresholds(calibration, percentile, bundle_->class_count(), *base);
    return flag_rates(calibration, candidate);
  }

  ServiceMetrics metrics() const {
    std::lock_guard lock(state_mutex_);
    ServiceMetrics m;
    m.decisions = decisions_.size();
    std::map<ClassIndex, std::pair<std::size_t, std::size_t>> per_class;
    for (const auto& d : decisions_) {
      auto& [flagged, total] = per_class[d.predicted_class];
      ++total;
      if (d.abstained) {
        ++flagged;
        ++m.abstentions;
      }
    }
    for (const auto& [c, ft] : per_class) {
      m.flag_rates[c] = static_cast<double>(ft.first) / static_cast<double>(ft.second);
    }
    m.pending_reviews = static_cast<std::size_t>(std::count_if(
        reviews_.begin(), reviews_.end(), [](const ReviewItem& r) { return r.status == ReviewStatus::pending; }));
    return m;
  }

 private:
  struct DecisionEntry {
    std::string sample_id;
    ClassIndex predicted_class;
    NeutrosophicScore score;
    bool abstained;
    std::optional<std::size_t> review;
  };

  static std::string make_review_id(std::uint64_t seq) {
    std::string digits = std::to_string(seq);
    if (digits.size() < 8) digits.insert(0, 8 - digits.size(), '0');
    return "r-" + digits;
  }

  std::vector<ScoredPrediction> calibration_set() const {
    std::vector<ScoredPrediction> out;
    for (const auto& d : decisions_) {
      ScoredPrediction p{d.sample_id, d.predicted_class, d.score, std::nullopt};
      if (d.review) {
        const auto& item = reviews_[*d.review];
        if (item.status == ReviewStatus::pending) continue;
        p.true_class = item.status == ReviewStatus::confirmed ? item.decision.predicted_class : *item.analyst_label;
      }
      out.push_back(std::move(p));
    }
    return out;
  }

  void install(ThresholdPolicy p) {
    std::lock_guard lock(policy_mutex_);
    policy_ = std::make_shared<const ThresholdPolicy>(std::move(p));
  }

  // Applies one logged record to in-memory state. Shared by live operation and
  // replay, which is what makes replay exact.
  void apply(const AuditRecord& rec) {
    last_timestamp_ = std::max(last_timestamp_, rec.timestamp);
    switch (rec.origin) {
      case AuditOrigin::automatic: {
        if (!rec.decision) throw Error(Errc::parse_error, "AUTO record without decision");
        const auto& d = *rec.decision;
        DecisionEntry entry{rec.sample_id, d.predicted_class, d.score, d.abstained, std::nullopt};
        if (d.abstained) {
          if (!rec.review_id || !rec.features) throw Error(Errc::parse_error, "abstention without review id");
          ReviewItem item;
          item.id = *rec.review_id;
          item.sample_id = rec.sample_id;
          item.features = *rec.features;
          item.decision = d;
          item.decision.sample_id = rec.sample_id;
          item.created_at = rec.timestamp;
          entry.review = reviews_.size();
          review_index_[item.id] = reviews_.size();
          reviews_.push_back(std::move(item));
          ++next_review_seq_;
        }
        decisions_.push_back(std::move(entry));
        break;
      }
      case AuditOrigin::review_verdict: {
        if (!rec.review_id || !rec.verdict) throw Error(Errc::parse_error, "verdict record incomplete");
        auto it = review_index_.find(*rec.review_id);
        if (it == review_index_.end()) throw Error(Errc::parse_error, "verdict for unknown item " + *rec.review_id);
        auto& item = reviews_[it->second];
        if (*rec.verdict == VerdictKind::confirm) {
          item.status = ReviewStatus::confirmed;
        } else {
          if (!rec.analyst_label) throw Error(Errc::parse_error, "relabel without label");
          item.status = ReviewStatus::relabeled;
          item.analyst_label = rec.analyst_label;
        }
        item.resolved_at = rec.timestamp;
        ++resolved_count_;
        break;
      }
      case AuditOrigin::recalibration: {
        if (!rec.policy) throw Error(Errc::parse_error, "recalibration record without policy");
        install(*rec.policy);
        break;
      }
    }
  }

  void replay(const std::vector<AuditRecord>& records) {
    for (const auto& r : records) apply(r);
  }

  std::shared_ptr<const ModelBundle> bundle_;
  mutable std::mutex policy_mutex_;
  std::shared_ptr<const ThresholdPolicy> policy_;

  mutable std::mutex state_mutex_;
  std::unique_ptr<AuditLog> log_;
  std::vector<DecisionEntry> decisions_;
  std::vector<ReviewItem> reviews_;
  std::unordered_map<std::string, std::size_t> review_index_;
  std::uint64_t next_review_seq_ = 1;
  std::size_t resolved_count_ = 0;
  std::int64_t last_timestamp_ = 0;
};

}  // namespace neurosense
