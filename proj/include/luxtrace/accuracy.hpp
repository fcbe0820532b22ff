#pragma once

// Monte Carlo experiment for receiver-to-receiver distance estimation: beacons
// and two receivers are dropped uniformly in a rectangle, each receiver
// averages a few packets per beacon, and the separation is estimated with
// mad_distance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

#include "luxtrace/detection.hpp"
#include "luxtrace/radio.hpp"

namespace luxtrace {

struct DeploymentScenario {
  double width_m = 10.0;
  double height_m = 10.0;
  std::size_t n_beacons = 1;
  std::size_t n_receivers = 2;
  std::vector<Point> beacon_positions;    // explicit placement; empty = uniform random
  std::vector<Point> receiver_positions;  // explicit placement; empty = uniform random
  TxPower tx = kDefaultTx;
  std::uint64_t seed = 1;
  std::size_t packets_per_beacon = 10;
  double sensitivity_floor_dbm = -100.0;

  void validate() const {
    if (!(width_m > 0.0) || !(height_m > 0.0)) throw std::invalid_argument("area must be positive");
    if (n_beacons == 0) throw std::invalid_argument("need at least one beacon");
    if (n_receivers != 2) throw std::invalid_argument("the accuracy experiment uses exactly 2 receivers");
    if (packets_per_beacon == 0) throw std::invalid_argument("packets_per_beacon must be >= 1");
    auto inside = [&](Point p) { return p.x >= 0 && p.x <= width_m && p.y >= 0 && p.y <= height_m; };
    if (!beacon_positions.empty() && beacon_positions.size() != n_beacons)
      throw std::invalid_argument("explicit beacon placement count differs from n_beacons");
    if (!receiver_positions.empty() && receiver_positions.size() != n_receivers)
      throw std::invalid_argument("explicit receiver placement count differs from n_receivers");
    for (auto p : beacon_positions)
      if (!inside(p)) throw std::invalid_argument("beacon placed outside the area");
    for (auto p : receiver_positions)
      if (!inside(p)) throw std::invalid_argument("receiver placed outside the area");
  }
};

struct TrialResult {
  double true_distance_m = 0.0;
  std::optional<double> estimated_distance_m;  // nullopt: no beacon heard by both
  double abs_error_m = 0.0;
};

template <class Rng>
TrialResult run_trial(const DeploymentScenario& sc, const RadioModel& model, Rng& rng) {
  sc.validate();
  std::uniform_real_distribution<double> ux(0.0, sc.width_m), uy(0.0, sc.height_m);
  auto place = [&](const std::vector<Point>& explicit_pts, std::size_t n) {
    if (!explicit_pts.empty()) return explicit_pts;
    std::vector<Point> pts(n);
    for (auto& p : pts) {
      p.x = ux(rng);
      p.y = uy(rng);
    }
    return pts;
  };
  const auto beacons = place(sc.beacon_positions, sc.n_beacons);
  const auto receivers = place(sc.receiver_positions, sc.n_receivers);

  std::vector<DistanceVector> vectors;
  for (const auto& rx : receivers) {
    std::vector<DistanceVector::Entry> entries;
    for (std::size_t b = 0; b < beacons.size(); ++b) {
      double d = distance(rx, beacons[b]);
      double sum = 0.0;
      std::size_t heard = 0;
      for (std::size_t k = 0; k < sc.packets_per_beacon; ++k) {
        double rss = model.sample_rss(sc.tx, d, rng);
        if (rss >= sc.sensitivity_floor_dbm) sum += rss, ++heard;
      }
      if (heard)
        entries.emplace_back(EphemeralId::from_value(static_cast<std::uint32_t>(b)),
                             model.distance_from_rss(sc.tx, sum / static_cast<double>(heard)));
    }
    vectors.emplace_back(std::move(entries));
  }

  TrialResult out;
  out.true_distance_m = distance(receivers[0], receivers[1]);
  out.estimated_distance_m = mad_distance(vectors[0], vectors[1]);
  if (out.estimated_distance_m) out.abs_error_m = std::abs(out.true_distance_m - *out.estimated_distance_m);
  return out;
}

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Per-trial seed; independent of which other beacon counts are swept.
inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t beacon_count, std::uint64_t trial) {
  return mix64(mix64(mix64(master) ^ beacon_count) ^ trial);
}

struct AccuracyRow {
  std::size_t n_beacons = 0;
  double mean_error_m = 0.0;
  double ci95_m = 0.0;  // 1.96 * sample stddev / sqrt(included trials)
  std::size_t trials = 0;
  std::size_t excluded = 0;
};

struct AccuracyReport {
  std::vector<AccuracyRow> rows;
};

inline AccuracyRow summarize_errors(std::size_t n_beacons, const std::vector<TrialResult>& results) {
  AccuracyRow row;
  row.n_beacons = n_beacons;
  row.trials = results.size();
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : results) {
    if (!r.estimated_distance_m) {
      ++row.excluded;
      continue;
    }
    sum += r.abs_error_m;
    ++n;
  }
  if (n == 0) {
    row.mean_error_m = std::nan("");
    row.ci95_m = std::nan("");
    return row;
  }
  row.mean_error_m = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& r : results)
    if (r.estimated_distance_m) ss += (r.abs_error_m - row.mean_error_m) * (r.abs_error_m - row.mean_error_m);
  double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  row.ci95_m = 1.96 * sd / std::sqrt(static_cast<double>(n));
  return row;
}

/// Runs `trials` seeded trials per beacon count. Results are gathered by
/// trial index before reduction, so the report is bit-identical for any
/// thread count.
inline AccuracyReport accuracy_sweep(const DeploymentScenario& base, const std::vector<std::size_t>& beacon_counts,
                                     std::size_t trials, const RadioModel& model, unsigned threads = 1) {
  if (trials < 100) throw std::invalid_argument("accuracy sweep needs at least 100 trials");
  AccuracyReport report;
  for (std::size_t count : beacon_counts) {
    DeploymentScenario sc = base;
    sc.n_beacons = count;
    sc.beacon_positions.clear();
    sc.receiver_positions.clear();
    sc.validate();
    std::vector<TrialResult> results(trials);
    auto work = [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        std::mt19937_64 rng(trial_seed(base.seed, count, i));
        results[i] = run_trial(sc, model, rng);
      }
    };
    unsigned nt = std::max(1u, threads);
    if (nt == 1) {
      work(0, trials);
    } else {
      std::vector<std::jthread> pool;
      std::size_t chunk = (trials + nt - 1) / nt;
      for (unsigned t = 0; t < nt; ++t)
        pool.emplace_back(work, std::min(trials, t * chunk), std::min(trials, (t + 1) * chunk));
    }
    report.rows.push_back(summarize_errors(count, results));
  }
  return report;
}

/// Spearman rank correlation (average ranks for ties).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman needs paired samples");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  auto rx = ranks(x), ry = ranks(y);
  double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(rx.size());
  double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(ry.size());
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline double error_trend(const AccuracyReport& report) {
  std::vector<double> counts, errors;
  for (const auto& r : report.rows) {
    counts.push_back(static_cast<double>(r.n_beacons));
    errors.push_back(r.mean_error_m);
  }
  return spearman(counts, errors);
}

}  // namespace luxtrace
