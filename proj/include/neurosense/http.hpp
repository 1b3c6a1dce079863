#pragma once

#include <string>

#include <httplib.h>
#include <json.hpp>

#include "neurosense/service.hpp"

namespace neurosense::http {

using nlohmann::json;

inline json decision_json(const DecisionService& svc, const Decision& d) {
  const auto& b = svc.bundle();
  return {{"sample_id", d.sample_id},
          {"label", d.predicted_class},
          {"label_name", b.encoding.decode(d.predicted_class)},
          {"binary_view", b.binary_view(d.predicted_class)},
          {"T", d.score.truth},
          {"I", d.score.indeterminacy},
          {"F", d.score.falsity},
          {"abstained", d.abstained},
          {"applied_threshold", d.applied_threshold},
          {"policy_version", d.policy_version}};
}

inline json review_json(const DecisionService& svc, const ReviewItem& r) {
  const auto& enc = svc.bundle().encoding;
  json j = {{"id", r.id},
            {"sample_id", r.sample_id},
            {"features", r.features},
            {"decision", decision_json(svc, r.decision)},
            {"status", to_string(r.status)},
            {"created_at", r.created_at}};
  j["analyst_label"] = r.analyst_label ? json(enc.decode(*r.analyst_label)) : json(nullptr);
  j["resolved_at"] = r.resolved_at ? json(*r.resolved_at) : json(nullptr);
  return j;
}

inline json policy_json(const DecisionService& svc, const ThresholdPolicy& p) {
  json per_class = json::object();
  for (const auto& [c, t] : p.per_class_tau) per_class[svc.bundle().encoding.decode(c)] = t;
  json j = {{"mode", p.mode == PolicyMode::global ? "global" : "per_class"},
            {"global_tau", p.global_tau},
            {"per_class_tau", per_class},
            {"version", p.version}};
  j["percentile"] = p.percentile ? json(*p.percentile) : json(nullptr);
  return j;
}

inline int status_for(Errc e) {
  switch (e) {
    case Errc::not_found: return 404;
    case Errc::already_resolved: return 409;
    case Errc::insufficient_data: return 422;
    case Errc::bundle_not_loaded: return 503;
    default: return 400;
  }
}

inline void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, const Error& e) {
  send_json(res, status_for(e.code()), {{"error", std::string(to_string(e.code()))}, {"message", e.what()}});
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, e);
  } catch (const json::exception& e) {
    send_json(res, 400, {{"error", "PARSE_ERROR"}, {"message", e.what()}});
  } catch (const std::invalid_argument& e) {
    send_json(res, 400, {{"error", "INVALID_ARGUMENT"}, {"message", e.what()}});
  } catch (const std::exception& e) {
    send_json(res, 500, {{"error", "INTERNAL"}, {"message", e.what()}});
  }
}

inline std::size_t query_size(const httplib::Request& req, const char* key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  const auto v = req.get_param_value(key);
  try {
    std::size_t used = 0;
    const auto n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw Error(Errc::invalid_argument, std::string(key) + " must be a non-negative integer");
  }
}

// Registers the /v1 API on `server`. The service must outlive the server.
inline void register_routes(httplib::Server& server, DecisionService& svc) {
  server.Post("/v1/decide", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = json::parse(req.body);
      const auto sample_id = body.at("sample_id").get<std::string>();
      const auto features = body.at("features").get<std::vector<double>>();
      send_json(res, 200, decision_json(svc, svc.score_sample(features, sample_id)));
    });
  });

  server.Get("/v1/review", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::optional<ReviewStatus> filter;
      if (req.has_param("status") && req.get_param_value("status") != "all") {
        filter = review_status_from_string(req.get_param_value("status"));
        if (!filter) throw Error(Errc::invalid_argument, "unknown status filter");
      }
      const auto page = query_size(req, "page", 1);
      const auto page_size = query_size(req, "page_size", 50);
      json items = json::array();
      for (const auto& r : svc.list_review(filter, page, page_size)) items.push_back(review_json(svc, r));
      send_json(res, 200,
                {{"items", items}, {"page", page}, {"page_size", page_size}, {"total", svc.review_count(filter)}});
    });
  });

  server.Post(R"(/v1/review/([^/]+)/verdict)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = json::parse(req.body);
      const auto kind = body.at("verdict").get<std::string>();
      Verdict v;
      if (kind == "confirm") {
        v = Verdict::confirm();
      } else if (kind == "relabel") {
        v = Verdict::relabel(svc.bundle().encoding.encode(body.at("label").get<std::string>()));
      } else {
        throw Error(Errc::invalid_argument, "verdict must be 'confirm' or 'relabel'");
      }
      send_json(res, 200, review_json(svc, svc.submit_verdict(req.matches[1], v)));
    });
  });

  server.Post("/v1/policy/recalibrate", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      double percentile = 80.0;
      if (!req.body.empty()) {
        const auto body = json::parse(req.body);
        if (body.contains("percentile")) percentile = body.at("percentile").get<double>();
      }
      send_json(res, 200, policy_json(svc, svc.recalibrate(percentile)));
    });
  });

  server.Get("/v1/policy", [&svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, policy_json(svc, *svc.policy())); });
  });

  // Optional ?preview_percentile=q adds projected per-class flag rates for a
  // refit at q without installing it.
  server.Get("/v1/metrics", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto m = svc.metrics();
      const auto& enc = svc.bundle().encoding;
      json rates = json::object();
      for (const auto& [c, r] : m.flag_rates) rates[enc.decode(c)] = r;
      json body = {{"decisions", m.decisions},
                   {"abstentions", m.abstentions},
                   {"pending_reviews", m.pending_reviews},
                   {"flag_rates", rates},
                   {"policy_version", svc.policy()->version}};
      if (req.has_param("preview_percentile")) {
        const double q = std::stod(req.get_param_value("preview_percentile"));
        json preview = json::object();
        for (const auto& [c, r] : svc.preview_flag_rates(q)) preview[enc.decode(c)] = r;
        body["preview"] = {{"percentile", q}, {"flag_rates", preview}};
      }
      send_json(res, 200, body);
    });
  });
}

}  // namespace neurosense::http
