#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "luxtrace/bytes.hpp"
#include "luxtrace/identity.hpp"
#include "luxtrace/radio.hpp"

namespace luxtrace {

/// One received advertisement as stored on a user device.
struct ScanRecord {
  double timestamp_s = 0.0;
  MacAddress beacon_mac;
  EphemeralId ephemeral_id;
  double rssi_dbm = 0.0;

  friend bool operator==(const ScanRecord&, const ScanRecord&) = default;
};

/// Beacons are matched by ephemeral ID, never by MAC.
using BeaconKey = EphemeralId;

/// Half-open time interval [start, end).
struct TimeWindow {
  double start_s = 0.0;
  double end_s = 0.0;
  bool contains(double t) const { return t >= start_s && t < end_s; }
};

/// Per-beacon distance estimates for one receiver in one window, sorted by key.
class DistanceVector {
 public:
  using Entry = std::pair<BeaconKey, double>;

  DistanceVector() = default;
  explicit DistanceVector(std::vector<Entry> entries) : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(),
              [](const Entry& a, const Entry& b) { return a.first < b.first; });
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (!(entries_[i].second >= 0.0)) throw std::invalid_argument("distances must be >= 0");
      if (i && entries_[i].first == entries_[i - 1].first)
        throw std::invalid_argument("duplicate beacon key in distance vector");
    }
  }

  const std::vector<Entry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  std::optional<double> find(const BeaconKey& key) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), key,
                               [](const Entry& e, const BeaconKey& k) { return e.first < k; });
    if (it == entries_.end() || it->first != key) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<Entry> entries_;
};

/// Window aggregation of one beacon's RSSI: arithmetic mean in dBm.
inline double aggregate_rssi(std::span<const double> rssi_dbm) {
  double sum = 0.0;
  for (double r : rssi_dbm) sum += r;
  return sum / static_cast<double>(rssi_dbm.size());
}

inline DistanceVector distance_vector(std::span<const ScanRecord> log, const RadioModel& model,
                                      TxPower tx, TimeWindow window) {
  if (!(window.end_s > window.start_s)) throw std::invalid_argument("window must be non-empty");
  std::map<BeaconKey, std::vector<double>> per_beacon;
  for (const auto& r : log)
    if (window.contains(r.timestamp_s)) per_beacon[r.ephemeral_id].push_back(r.rssi_dbm);
  std::vector<DistanceVector::Entry> entries;
  entries.reserve(per_beacon.size());
  for (const auto& [key, rssi] : per_beacon)
    entries.emplace_back(key, model.distance_from_rss(tx, aggregate_rssi(rssi)));
  return DistanceVector(std::move(entries));
}

/// Maximum absolute difference over the beacons both receivers heard;
/// nullopt when they share none.
inline std::optional<double> mad_distance(const DistanceVector& v1, const DistanceVector& v2) {
  const auto& a = v1.entries();
  const auto& b = v2.entries();
  std::optional<double> best;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first < b[j].first) {
      ++i;
    } else if (b[j].first < a[i].first) {
      ++j;
    } else {
      double diff = std::abs(a[i].second - b[j].second);
      best = best ? std::max(*best, diff) : diff;
      ++i, ++j;
    }
  }
  return best;
}

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Sum of squared range residuals at `p`.
inline double trilateration_cost(Point p, std::span<const std::pair<Point, double>> anchors) {
  double s = 0.0;
  for (const auto& [q, d] : anchors) {
    double r = distance(p, q) - d;
    s += r * r;
  }
  return s;
}

/// Least-squares position from ranges to beacons with known positions.
/// Linearized solve for the starting point, then Gauss-Newton on the range
/// residuals. nullopt with fewer than 3 usable beacons or collinear geometry.
inline std::optional<Point> trilaterate(const DistanceVector& v, const std::map<BeaconKey, Point>& positions) {
  std::vector<std::pair<Point, double>> anchors;
  for (const auto& [key, d] : v.entries()) {
    auto it = positions.find(key);
    if (it != positions.end()) anchors.emplace_back(it->second, d);
  }
  if (anchors.size() < 3) return std::nullopt;

  // Centered anchor scatter; a near-zero smaller eigenvalue means collinear.
  double cx = 0, cy = 0;
  for (const auto& [q, d] : anchors) cx += q.x, cy += q.y;
  cx /= static_cast<double>(anchors.size());
  cy /= static_cast<double>(anchors.size());
  double sxx = 0, syy = 0, sxy = 0;
  for (const auto& [q, d] : anchors) {
    sxx += (q.x - cx) * (q.x - cx);
    syy += (q.y - cy) * (q.y - cy);
    sxy += (q.x - cx) * (q.y - cy);
  }
  double tr = sxx + syy;
  double det = sxx * syy - sxy * sxy;
  if (tr <= 0.0 || det <= 1e-9 * tr * tr) return std::nullopt;

  // ‖p‖² - 2 p·q_i + ‖q_i‖² = d_i²; subtracting the mean equation removes ‖p‖².
  double mean_rhs = 0;
  for (const auto& [q, d] : anchors) mean_rhs += d * d - q.x * q.x - q.y * q.y;
  mean_rhs /= static_cast<double>(anchors.size());
  double ata00 = 0, ata01 = 0, ata11 = 0, atb0 = 0, atb1 = 0;
  for (const auto& [q, d] : anchors) {
    double ax = -2.0 * (q.x - cx), ay = -2.0 * (q.y - cy);
    double rhs = (d * d - q.x * q.x - q.y * q.y) - mean_rhs;
    ata00 += ax * ax, ata01 += ax * ay, ata11 += ay * ay;
    atb0 += ax * rhs, atb1 += ay * rhs;
  }
  double ldet = ata00 * ata11 - ata01 * ata01;
  Point p{(ata11 * atb0 - ata01 * atb1) / ldet, (ata00 * atb1 - ata01 * atb0) / ldet};

  double cost = trilateration_cost(p, anchors);
  for (int iter = 0; iter < 100; ++iter) {
    double h00 = 0, h01 = 0, h11 = 0, g0 = 0, g1 = 0;
    for (const auto& [q, d] : anchors) {
      double dist = distance(p, q);
      if (dist < 1e-12) continue;  // gradient undefined exactly on an anchor
      double jx = (p.x - q.x) / dist, jy = (p.y - q.y) / dist;
      double r = dist - d;
      h00 += jx * jx, h01 += jx * jy, h11 += jy * jy;
      g0 += jx * r, g1 += jy * r;
    }
    double hdet = h00 * h11 - h01 * h01;
    if (std::abs(hdet) < 1e-15) break;
    Point step{-(h11 * g0 - h01 * g1) / hdet, -(h00 * g1 - h01 * g0) / hdet};
    // Backtracking keeps every accepted step a strict improvement.
    double scale = 1.0;
    bool improved = false;
    for (int k = 0; k < 30; ++k, scale *= 0.5) {
      Point cand{p.x + scale * step.x, p.y + scale * step.y};
      double c = trilateration_cost(cand, anchors);
      if (c < cost) {
        p = cand, cost = c, improved = true;
        break;
      }
    }
    if (!improved || std::hypot(step.x, step.y) * scale < 1e-12) break;
  }
  return p;
}

struct ContactEvent {
  double window_start_s = 0.0;
  double window_end_s = 0.0;
  double min_estimated_distance_m = 0.0;
  std::set<EphemeralId> matched_ids;

  double duration_s() const { return window_end_s - window_start_s; }
};

struct ContactThresholds {
  double distance_m = 2.0;
  double duration_s = 600.0;
  double window_s = 60.0;

  void validate() const {
    if (!(distance_m > 0.0) || !(duration_s > 0.0) || !(window_s > 0.0))
      throw std::invalid_argument("contact thresholds and window must be > 0");
  }
};

/// Splits time into windows aligned to multiples of window_s, estimates the
/// separation per window with mad_distance, merges maximal runs of windows at
/// or below the distance threshold, and keeps runs lasting at least the
/// duration threshold.
inline std::vector<ContactEvent> detect_contacts(std::span<const ScanRecord> log1,
                                                 std::span<const ScanRecord> log2,
                                                 const RadioModel& model, TxPower tx,
                                                 const ContactThresholds& th) {
  th.validate();
  std::vector<ContactEvent> events;
  if (log1.empty() || log2.empty()) return events;

  // Only windows where both logs have records can yield an estimate.
  auto window_index = [&](double t) { return static_cast<long long>(std::floor(t / th.window_s)); };
  std::map<long long, std::pair<std::vector<ScanRecord>, std::vector<ScanRecord>>> windows;
  for (const auto& r : log1) windows[window_index(r.timestamp_s)].first.push_back(r);
  for (const auto& r : log2) windows[window_index(r.timestamp_s)].second.push_back(r);

  std::optional<ContactEvent> open;
  long long last_index = 0;
  auto close = [&] {
    if (open && open->duration_s() >= th.duration_s) events.push_back(std::move(*open));
    open.reset();
  };

  for (const auto& [idx, recs] : windows) {
    if (recs.first.empty() || recs.second.empty()) continue;
    TimeWindow w{static_cast<double>(idx) * th.window_s, static_cast<double>(idx + 1) * th.window_s};
    auto v1 = distance_vector(recs.first, model, tx, w);
    auto v2 = distance_vector(recs.second, model, tx, w);
    auto est = mad_distance(v1, v2);
    if (!est || *est > th.distance_m) {
      close();
      continue;
    }
    if (open && idx != last_index + 1) close();
    if (!open) open = ContactEvent{w.start_s, w.end_s, *est, {}};
    open->window_end_s = w.end_s;
    open->min_estimated_distance_m = std::min(open->min_estimated_distance_m, *est);
    for (const auto& [key, d] : v1.entries())
      if (v2.find(key)) open->matched_ids.insert(key);
    last_index = idx;
  }
  close();
  return events;
}

}  // namespace luxtrace
