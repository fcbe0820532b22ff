#pragma once

// Authority wire API over HTTP/1.1 with JSON bodies.
//
//   POST /submit-report            Authorization: Bearer <token>
//        {"report_id", "upload_time_s", "records": [{"timestamp_s", "beacon_mac",
//         "ephemeral_id", "rssi_dbm"}, ...]}
//     -> 200 {"version", "added", "duplicate"}   401 bad credential   400 bad body
//
//   GET  /get-published?since=<version>
//     -> 200 {"version", "bucket_s", "entries": [{"ephemeral_id",
//         "time_bucket_start_s", "rssi_dbm", "version_added"}, ...]}

#include <httplib.h>
#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

#include "luxtrace/protocol.hpp"

namespace luxtrace {

using json = nlohmann::json;

inline json to_json(const ScanRecord& r) {
  return {{"timestamp_s", r.timestamp_s},
          {"beacon_mac", r.beacon_mac.to_string()},
          {"ephemeral_id", r.ephemeral_id.to_hex()},
          {"rssi_dbm", r.rssi_dbm}};
}

inline json to_json(const PositiveReport& r) {
  json records = json::array();
  for (const auto& rec : r.records) records.push_back(to_json(rec));
  return {{"report_id", r.report_id}, {"upload_time_s", r.upload_time_s}, {"records", std::move(records)}};
}

inline json to_json(const PublishedList& l) {
  json entries = json::array();
  for (const auto& e : l.entries)
    entries.push_back({{"ephemeral_id", e.id.to_hex()},
                       {"time_bucket_start_s", e.bucket_start_s},
                       {"rssi_dbm", e.rssi_dbm},
                       {"version_added", e.version_added}});
  return {{"version", l.version}, {"bucket_s", l.bucket_s}, {"entries", std::move(entries)}};
}

/// Throws std::invalid_argument on schema violations.
inline PositiveReport report_from_json(const json& j) {
  try {
    PositiveReport r;
    r.report_id = j.at("report_id").get<std::string>();
    r.upload_time_s = j.at("upload_time_s").get<double>();
    for (const auto& rec : j.at("records")) {
      r.records.push_back({rec.at("timestamp_s").get<double>(), MacAddress::parse(rec.at("beacon_mac").get<std::string>()),
                           EphemeralId::from_hex(rec.at("ephemeral_id").get<std::string>()),
                           rec.at("rssi_dbm").get<double>()});
    }
    return r;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed report: ") + e.what());
  }
}

inline PublishedList published_from_json(const json& j) {
  try {
    PublishedList l;
    l.version = j.at("version").get<std::uint64_t>();
    l.bucket_s = j.at("bucket_s").get<std::int64_t>();
    for (const auto& e : j.at("entries"))
      l.entries.push_back({EphemeralId::from_hex(e.at("ephemeral_id").get<std::string>()),
                           e.at("time_bucket_start_s").get<std::int64_t>(), e.at("rssi_dbm").get<double>(),
                           e.value("version_added", std::uint64_t{0})});
    return l;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed published list: ") + e.what());
  }
}

/// HTTP front end for an AuthorityStore. The store outlives the service.
class AuthorityService {
 public:
  AuthorityService(AuthorityStore& store, std::string hospital_token)
      : store_(store), token_(std::move(hospital_token)) {
    server_.Post("/submit-report", [this](const httplib::Request& req, httplib::Response& res) {
      if (req.get_header_value("Authorization") != "Bearer " + token_) {
        reply_error(res, 401, "invalid hospital credential");
        return;
      }
      try {
        auto report = report_from_json(json::parse(req.body));
        auto r = store_.ingest(report);
        res.set_content(json{{"version", r.version}, {"added", r.added}, {"duplicate", r.duplicate}}.dump(),
                        "application/json");
      } catch (const json::exception& e) {
        reply_error(res, 400, e.what());
      } catch (const std::invalid_argument& e) {
        reply_error(res, 400, e.what());
      }
    });
    server_.Get("/get-published", [this](const httplib::Request& req, httplib::Response& res) {
      std::uint64_t since = 0;
      if (req.has_param("since")) {
        try {
          std::size_t pos = 0;
          auto text = req.get_param_value("since");
          since = std::stoull(text, &pos);
          if (pos != text.size()) throw std::invalid_argument(text);
        } catch (const std::exception&) {
          reply_error(res, 400, "since must be a non-negative integer");
          return;
        }
      }
      res.set_content(to_json(store_.published_since(since)).dump(), "application/json");
    });
  }

  /// Binds to an ephemeral port on `host`; returns the port.
  int bind_any_port(const std::string& host = "127.0.0.1") {
    int port = server_.bind_to_any_port(host);
    if (port < 0) throw std::runtime_error("cannot bind authority service");
    return port;
  }
  void bind(const std::string& host, int port) {
    if (!server_.bind_to_port(host, port))
      throw std::runtime_error("cannot bind authority service to " + host + ":" + std::to_string(port));
  }
  /// Blocks until stop().
  void serve() { server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  static void reply_error(httplib::Response& res, int status, const std::string& msg) {
    res.status = status;
    res.set_content(json{{"error", msg}}.dump(), "application/json");
  }

  AuthorityStore& store_;
  std::string token_;
  httplib::Server server_;
};

class AuthorityClient {
 public:
  AuthorityClient(const std::string& host, int port) : client_(host, port) {}
  explicit AuthorityClient(const std::string& base_url) : client_(base_url) {}

  IngestResult submit(const PositiveReport& report, const std::string& token) {
    httplib::Headers headers{{"Authorization", "Bearer " + token}};
    auto res = client_.Post("/submit-report", headers, to_json(report).dump(), "application/json");
    check(res);
    auto j = json::parse(res->body);
    return {j.at("version").get<std::uint64_t>(), j.at("added").get<std::size_t>(), j.at("duplicate").get<bool>()};
  }

  PublishedList fetch(std::uint64_t since = 0) {
    auto res = client_.Get("/get-published?since=" + std::to_string(since));
    check(res);
    return published_from_json(json::parse(res->body));
  }

 private:
  static void check(const httplib::Result& res) {
    if (!res) throw std::runtime_error("authority request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) {
      std::string msg = res->body;
      try {
        msg = json::parse(res->body).at("error").get<std::string>();
      } catch (...) {
      }
      throw std::runtime_error("authority returned " + std::to_string(res->status) + ": " + msg);
    }
  }

  httplib::Client client_;
};

}  // namespace luxtrace
