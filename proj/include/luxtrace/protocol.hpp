#pragma once

// Entities of the exposure-notification flow. Users only ever receive:
// UserDevice has no transmit path at all.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "luxtrace/detection.hpp"
#include "luxtrace/identity.hpp"
#include "luxtrace/radio.hpp"

namespace luxtrace {

inline constexpr double kDefaultRetentionS = 14.0 * 86400.0;
inline constexpr std::int64_t kDefaultBucketS = 3600;
inline constexpr double kDefaultSensitivityDbm = -100.0;

struct ScanDutyCycle {
  double period_s = 1.0;
  double window_s = 1.0;  // window_s >= period_s means always scanning

  bool is_open(double clock_s) const {
    if (window_s >= period_s) return true;
    double phase = std::fmod(clock_s, period_s);
    if (phase < 0) phase += period_s;
    return phase < window_s;
  }
};

struct UserDevice {
  std::string label;
  std::vector<ScanRecord> log;
  ScanDutyCycle duty_cycle;
};

struct InRangeBroadcast {
  BeaconPayload payload;
  double true_distance_m = 0.0;
};

/// Logs every broadcast whose sampled RSS clears the sensitivity floor.
/// Returns the number of records appended (0 when the scan window is closed).
template <class Rng>
std::size_t user_scan_tick(UserDevice& device, std::span<const InRangeBroadcast> broadcasts,
                           const RadioModel& model, double clock_s, Rng& rng,
                           double sensitivity_floor_dbm = kDefaultSensitivityDbm) {
  if (!device.duty_cycle.is_open(clock_s)) return 0;
  std::size_t appended = 0;
  for (const auto& b : broadcasts) {
    double rss = model.sample_rss(b.payload.tx, b.true_distance_m, rng);
    if (rss < sensitivity_floor_dbm) continue;
    device.log.push_back({clock_s, b.payload.mac, b.payload.id, rss});
    ++appended;
  }
  return appended;
}

struct PositiveReport {
  std::string report_id;
  double upload_time_s = 0.0;
  std::vector<ScanRecord> records;
};

/// Packages the records inside the retention window ending at `clock_s`;
/// nullopt (refusal) when nothing is retained.
inline std::optional<PositiveReport> hospital_report(const UserDevice& device, double clock_s,
                                                     std::string report_id,
                                                     double retention_s = kDefaultRetentionS) {
  PositiveReport report{std::move(report_id), clock_s, {}};
  for (const auto& r : device.log)
    if (r.timestamp_s >= clock_s - retention_s && r.timestamp_s <= clock_s) report.records.push_back(r);
  if (report.records.empty()) return std::nullopt;
  return report;
}

struct PublishedEntry {
  EphemeralId id;
  std::int64_t bucket_start_s = 0;
  double rssi_dbm = 0.0;
  std::uint64_t version_added = 0;

  friend bool operator==(const PublishedEntry&, const PublishedEntry&) = default;
};

struct PublishedList {
  std::uint64_t version = 0;
  std::int64_t bucket_s = kDefaultBucketS;
  std::vector<PublishedEntry> entries;
};

inline std::int64_t time_bucket(double timestamp_s, std::int64_t bucket_s) {
  return static_cast<std::int64_t>(std::floor(timestamp_s / static_cast<double>(bucket_s))) * bucket_s;
}

struct IngestResult {
  std::uint64_t version = 0;
  std::size_t added = 0;
  bool duplicate = false;
};

/// The Authority's published-list store. Readers run concurrently; ingests
/// are serialized.
class AuthorityStore {
 public:
  explicit AuthorityStore(std::int64_t bucket_s = kDefaultBucketS) : bucket_s_(bucket_s) {
    if (bucket_s_ <= 0) throw std::invalid_argument("bucket_s must be > 0");
  }

  /// Merges a report. A report id seen before is a no-op that returns the
  /// current version with duplicate = true.
  IngestResult ingest(const PositiveReport& report) {
    if (report.report_id.empty()) throw std::invalid_argument("report id is empty");
    if (report.records.empty()) throw std::invalid_argument("report has no records");

    // Per (id, bucket): mean RSSI over the report's records.
    std::map<std::pair<EphemeralId, std::int64_t>, std::pair<double, std::size_t>> grouped;
    for (const auto& r : report.records) {
      if (!std::isfinite(r.rssi_dbm)) throw std::invalid_argument("report contains non-finite rssi");
      auto& g = grouped[{r.ephemeral_id, time_bucket(r.timestamp_s, bucket_s_)}];
      g.first += r.rssi_dbm;
      ++g.second;
    }

    std::unique_lock lock(mu_);
    if (!report_ids_.insert(report.report_id).second) return {version_, 0, true};
    ++version_;
    std::size_t added = 0;
    for (const auto& [key, sum] : grouped) {
      if (!index_.insert(key).second) continue;
      entries_.push_back({key.first, key.second, sum.first / static_cast<double>(sum.second), version_});
      ++added;
    }
    return {version_, added, false};
  }

  std::uint64_t version() const {
    std::shared_lock lock(mu_);
    return version_;
  }

  std::int64_t bucket_s() const { return bucket_s_; }

  /// Entries added after `since_version`, stamped with the current version.
  PublishedList published_since(std::uint64_t since_version) const {
    std::shared_lock lock(mu_);
    PublishedList out{version_, bucket_s_, {}};
    for (const auto& e : entries_)
      if (e.version_added > since_version) out.entries.push_back(e);
    return out;
  }

  PublishedList snapshot() const { return published_since(0); }

  /// Drops entries whose bucket ended before `horizon_s`. Does not bump the version.
  std::size_t expire_before(double horizon_s) {
    std::unique_lock lock(mu_);
    auto old = entries_.size();
    std::erase_if(entries_, [&](const PublishedEntry& e) {
      bool drop = static_cast<double>(e.bucket_start_s + bucket_s_) <= horizon_s;
      if (drop) index_.erase({e.id, e.bucket_start_s});
      return drop;
    });
    return old - entries_.size();
  }

 private:
  std::int64_t bucket_s_;
  mutable std::shared_mutex mu_;
  std::uint64_t version_ = 0;
  std::set<std::string> report_ids_;
  std::set<std::pair<EphemeralId, std::int64_t>> index_;
  std::vector<PublishedEntry> entries_;
};

/// Applies a delta on top of a locally held list (entries are append-only).
inline void apply_delta(PublishedList& local, const PublishedList& delta) {
  if (delta.version < local.version) throw std::invalid_argument("published list went backwards");
  std::set<std::pair<EphemeralId, std::int64_t>> have;
  for (const auto& e : local.entries) have.insert({e.id, e.bucket_start_s});
  for (const auto& e : delta.entries)
    if (have.insert({e.id, e.bucket_start_s}).second) local.entries.push_back(e);
  local.version = delta.version;
  local.bucket_s = delta.bucket_s;
}

/// Local exposure check. Every device record whose (ID, time bucket) appears
/// in the published list is paired with a positive-side record carrying the
/// published RSSI at the same timestamp; the pairs go through detect_contacts.
inline std::vector<ContactEvent> user_reconcile(std::span<const ScanRecord> device_log,
                                                const PublishedList& list, const RadioModel& model,
                                                TxPower tx, const ContactThresholds& th) {
  std::map<std::pair<EphemeralId, std::int64_t>, double> published;
  for (const auto& e : list.entries) published.emplace(std::pair{e.id, e.bucket_start_s}, e.rssi_dbm);

  std::vector<ScanRecord> mine, theirs;
  for (const auto& r : device_log) {
    auto it = published.find({r.ephemeral_id, time_bucket(r.timestamp_s, list.bucket_s)});
    if (it == published.end()) continue;
    mine.push_back(r);
    theirs.push_back({r.timestamp_s, r.beacon_mac, r.ephemeral_id, it->second});
  }
  if (mine.empty()) return {};
  return detect_contacts(mine, theirs, model, tx, th);
}

}  // namespace luxtrace
