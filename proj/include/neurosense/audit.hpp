#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "neurosense/bundle.hpp"
#include "neurosense/domain.hpp"
#include "neurosense/error.hpp"

namespace neurosense {

enum class AuditOrigin { automatic, review_verdict, recalibration };

inline std::string to_string(AuditOrigin o) {
  switch (o) {
    case AuditOrigin::automatic: return "AUTO";
    case AuditOrigin::review_verdict: return "REVIEW_VERDICT";
    case AuditOrigin::recalibration: return "RECALIBRATION";
  }
  return "AUTO";
}

inline AuditOrigin origin_from_string(const std::string& s) {
  if (s == "AUTO") return AuditOrigin::automatic;
  if (s == "REVIEW_VERDICT") return AuditOrigin::review_verdict;
  if (s == "RECALIBRATION") return AuditOrigin::recalibration;
  throw Error(Errc::parse_error, "unknown audit origin '" + s + "'");
}

enum class VerdictKind { confirm, relabel };

// One line of the audit log. AUTO records carry the decision (and, for
// abstentions, the review id plus raw features); REVIEW_VERDICT records carry
// the verdict; RECALIBRATION records carry the installed policy.
struct AuditRecord {
  std::int64_t timestamp = 0;  // microseconds since the Unix epoch
  std::string sample_id;
  AuditOrigin origin = AuditOrigin::automatic;
  std::optional<Decision> decision;
  std::optional<std::string> review_id;
  std::optional<std::vector<double>> features;
  std::optional<VerdictKind> verdict;
  std::optional<ClassIndex> analyst_label;
  std::optional<ThresholdPolicy> policy;

  friend bool operator==(const AuditRecord&, const AuditRecord&) = default;
};

inline nlohmann::json to_json(const AuditRecord& r) {
  using nlohmann::json;
  json j = {{"timestamp", r.timestamp}, {"sample_id", r.sample_id}, {"origin", to_string(r.origin)}};
  if (r.decision) {
    const auto& d = *r.decision;
    j["decision"] = {{"label", d.predicted_class},
                     {"T", d.score.truth},
                     {"I", d.score.indeterminacy},
                     {"F", d.score.falsity},
                     {"abstained", d.abstained},
                     {"threshold", d.applied_threshold},
                     {"policy_version", d.policy_version}};
  } else {
    j["decision"] = nullptr;
  }
  if (r.review_id) j["review_id"] = *r.review_id;
  if (r.features) j["features"] = *r.features;
  if (r.verdict) j["verdict"] = *r.verdict == VerdictKind::confirm ? "confirm" : "relabel";
  if (r.analyst_label) j["analyst_label"] = *r.analyst_label;
  if (r.policy) j["policy"] = bundle_json::policy_to_json(*r.policy);
  return j;
}

inline AuditRecord audit_record_from_json(const nlohmann::json& j) {
  AuditRecord r;
  r.timestamp = j.at("timestamp").get<std::int64_t>();
  r.sample_id = j.at("sample_id").get<std::string>();
  r.origin = origin_from_string(j.at("origin").get<std::string>());
  if (const auto& d = j.at("decision"); !d.is_null()) {
    Decision dec;
    dec.predicted_class = d.at("label").get<ClassIndex>();
    dec.score = {d.at("T").get<double>(), d.at("I").get<double>(), d.at("F").get<double>()};
    dec.abstained = d.at("abstained").get<bool>();
    dec.applied_threshold = d.at("threshold").get<double>();
    dec.policy_version = d.at("policy_version").get<std::uint64_t>();
    dec.sample_id = r.sample_id;
    r.decision = dec;
  }
  if (j.contains("review_id")) r.review_id = j.at("review_id").get<std::string>();
  if (j.contains("features")) r.features = j.at("features").get<std::vector<double>>();
  if (j.contains("verdict")) {
    const auto v = j.at("verdict").get<std::string>();
    if (v != "confirm" && v != "relabel") throw Error(Errc::parse_error, "unknown verdict '" + v + "'");
    r.verdict = v == "confirm" ? VerdictKind::confirm : VerdictKind::relabel;
  }
  if (j.contains("analyst_label")) r.analyst_label = j.at("analyst_label").get<ClassIndex>();
  if (j.contains("policy")) r.policy = bundle_json::policy_from_json(j.at("policy"));
  return r;
}

using Clock = std::function<std::int64_t()>;

inline std::int64_t system_clock_us() {
  return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// Append-only newline-delimited JSON log with a single serialized writer.
// Every append is flushed before returning.
class AuditLog {
 public:
  explicit AuditLog(std::string path, Clock clock = system_clock_us) : path_(std::move(path)), clock_(std::move(clock)) {
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) throw Error(Errc::io_error, "cannot open audit log " + path_);
  }

  AuditLog(const AuditLog&) = delete;
  AuditLog& operator=(const AuditLog&) = delete;

  // Stamps the record (timestamps never decrease) and appends it.
  AuditRecord append(AuditRecord record) {
    std::lock_guard lock(mutex_);
    record.timestamp = std::max(clock_(), last_timestamp_);
    last_timestamp_ = record.timestamp;
    out_ << to_json(record).dump() << '\n';
    out_.flush();
    if (!out_) throw Error(Errc::io_error, "audit append failed on " + path_);
    return record;
  }

  void resume_after(std::int64_t timestamp) {
    std::lock_guard lock(mutex_);
    last_timestamp_ = std::max(last_timestamp_, timestamp);
  }

  const std::string& path() const noexcept { return path_; }

  // Reads every complete line. A trailing line without a newline (torn write)
  // is ignored.
  static std::vector<AuditRecord> read(const std::string& path) {
    std::vector<AuditRecord> records;
    std::ifstream in(path, std::ios::binary);
    if (!in) return records;
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0, line_no = 0;
    while (true) {
      const auto nl = content.find('\n', pos);
      if (nl == std::string::npos) break;
      ++line_no;
      const std::string_view line(content.data() + pos, nl - pos);
      pos = nl + 1;
      if (line.empty()) continue;
      try {
        records.push_back(audit_record_from_json(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::parse_error, path + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    return records;
  }

 private:
  std::string path_;
  Clock clock_;
  std::ofstream out_;
  std::mutex mutex_;
  std::int64_t last_timestamp_ = 0;
};

}  // namespace neurosense
