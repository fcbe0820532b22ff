#pragma once

// Scan logs, contact events and published-list snapshots as CSV.

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "luxtrace/detection.hpp"
#include "luxtrace/io.hpp"
#include "luxtrace/protocol.hpp"

namespace luxtrace {

inline constexpr std::string_view kScanLogHeader = "timestamp_s,beacon_mac,ephemeral_id_hex,rssi_dbm";
inline constexpr std::string_view kContactHeader = "start_s,end_s,min_distance_m,n_matched_ids";
inline constexpr std::string_view kPublishedHeader = "ephemeral_id_hex,time_bucket_start_s,rssi_dbm";

inline void write_scan_log(std::ostream& out, const std::vector<ScanRecord>& log) {
  out << kScanLogHeader << '\n';
  for (const auto& r : log)
    out << csv::num(r.timestamp_s) << ',' << r.beacon_mac.to_string() << ',' << r.ephemeral_id.to_hex() << ','
        << csv::num(r.rssi_dbm) << '\n';
}

inline std::vector<ScanRecord> read_scan_log(std::istream& in) {
  std::vector<ScanRecord> out;
  csv::for_each_row(in, kScanLogHeader, 4, [&](const auto& f, std::size_t line) {
    ScanRecord r;
    r.timestamp_s = csv::to_double(f[0], line);
    try {
      r.beacon_mac = MacAddress::parse(f[1]);
      r.ephemeral_id = EphemeralId::from_hex(f[2]);
    } catch (const std::invalid_argument& e) {
      throw FormatError("line " + std::to_string(line) + ": " + e.what());
    }
    r.rssi_dbm = csv::to_double(f[3], line);
    if (!std::isfinite(r.rssi_dbm)) throw FormatError("line " + std::to_string(line) + ": rssi must be finite");
    out.push_back(r);
  });
  return out;
}

inline void write_contact_events(std::ostream& out, const std::vector<ContactEvent>& events) {
  out << kContactHeader << '\n';
  for (const auto& e : events)
    out << csv::num(e.window_start_s) << ',' << csv::num(e.window_end_s) << ','
        << csv::fixed(e.min_estimated_distance_m, 3) << ',' << e.matched_ids.size() << '\n';
}

inline void write_published(std::ostream& out, const PublishedList& list) {
  out << kPublishedHeader << '\n';
  for (const auto& e : list.entries)
    out << e.id.to_hex() << ',' << e.bucket_start_s << ',' << csv::num(e.rssi_dbm) << '\n';
}

/// Snapshot files carry no version; the caller supplies the bucket width.
inline PublishedList read_published(std::istream& in, std::int64_t bucket_s = kDefaultBucketS) {
  PublishedList list;
  list.bucket_s = bucket_s;
  csv::for_each_row(in, kPublishedHeader, 3, [&](const auto& f, std::size_t line) {
    PublishedEntry e;
    try {
      e.id = EphemeralId::from_hex(f[0]);
    } catch (const std::invalid_argument& ex) {
      throw FormatError("line " + std::to_string(line) + ": " + ex.what());
    }
    e.bucket_start_s = static_cast<std::int64_t>(csv::to_double(f[1], line));
    e.rssi_dbm = csv::to_double(f[2], line);
    list.entries.push_back(e);
  });
  return list;
}

}  // namespace luxtrace
