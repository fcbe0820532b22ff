#pragma once

// Power chain of a light-harvesting beacon: linear harvester feeding a
// supercapacitor, with a backup battery that takes over the load whenever the
// supercapacitor sits below the operating voltage.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "luxtrace/radio.hpp"

namespace luxtrace {

inline constexpr double kSecondsPerDay = 86400.0;
inline constexpr double kDaysPerYear = 365.25;
inline constexpr double kReferenceAdvIntervalMs = 100.0;
inline constexpr double kMinAdvIntervalMs = 20.0;

struct PowerChainConfig {
  double operating_voltage_v = 1.8;
  double supercap_capacitance_f = 1.0;
  double supercap_max_v = 5.5;
  double backup_battery_mah = 235.0;
  double harvest_w_per_lux = 9.0e-8;
  double min_harvest_lux = 100.0;
  double firmware_current_a = 12.2e-6;  // at 100 ms / -8 dBm
  double sleep_floor_a = 2.0e-6;
  // Per-advertisement energy relative to the -8 dBm event.
  std::map<int, double> tx_event_scale{
      {-20, 0.80}, {-14, 0.87}, {-8, 1.00}, {-2, 1.15}, {4, 1.35}};

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0)) throw std::invalid_argument(std::string(name) + " must be > 0");
    };
    positive(operating_voltage_v, "operating_voltage_v");
    positive(supercap_capacitance_f, "supercap_capacitance_f");
    positive(supercap_max_v, "supercap_max_v");
    positive(backup_battery_mah, "backup_battery_mah");
    positive(harvest_w_per_lux, "harvest_w_per_lux");
    positive(firmware_current_a, "firmware_current_a");
    if (!(min_harvest_lux >= 0.0)) throw std::invalid_argument("min_harvest_lux must be >= 0");
    if (!(sleep_floor_a >= 0.0 && sleep_floor_a < firmware_current_a))
      throw std::invalid_argument("sleep_floor_a must be in [0, firmware_current_a)");
    if (supercap_max_v < operating_voltage_v)
      throw std::invalid_argument("supercap_max_v below operating voltage");
    if (tx_event_scale.count(kDefaultTx.dbm) == 0)
      throw std::invalid_argument("tx_event_scale must contain the -8 dBm reference");
  }
};

struct EnergyState {
  double supercap_v = 0.0;
  double battery_remaining_mah = 0.0;
  bool alive = false;
};

inline bool is_alive(const EnergyState& s, const PowerChainConfig& c) {
  return s.supercap_v >= c.operating_voltage_v || s.battery_remaining_mah > 0.0;
}

/// Fresh device: full battery, supercapacitor at `supercap_v`.
inline EnergyState initial_state(const PowerChainConfig& c, double supercap_v = 0.0) {
  EnergyState s{std::clamp(supercap_v, 0.0, c.supercap_max_v), c.backup_battery_mah, false};
  s.alive = is_alive(s, c);
  return s;
}

/// Average supply current. Duty-cycle model: sleep floor plus advertising
/// events whose charge scales with the TX setting. Written relative to the
/// calibration point so (100 ms, -8 dBm) reproduces firmware_current_a exactly.
inline double consumption_current(const PowerChainConfig& c, double adv_interval_ms, TxPower tx) {
  if (!(adv_interval_ms >= kMinAdvIntervalMs))
    throw std::invalid_argument("advertising interval must be >= 20 ms");
  auto it = c.tx_event_scale.find(tx.dbm);
  if (it == c.tx_event_scale.end())
    throw std::invalid_argument("no event energy for tx " + std::to_string(tx.dbm) + " dBm");
  const double event_current = c.firmware_current_a - c.sleep_floor_a;
  const double factor = (kReferenceAdvIntervalMs / adv_interval_ms) * it->second;
  return c.firmware_current_a + event_current * (factor - 1.0);
}

/// Energy of one advertising event, in joules, at the operating voltage.
inline double event_energy_j(const PowerChainConfig& c, TxPower tx) {
  const double event_current = c.firmware_current_a - c.sleep_floor_a;
  return event_current * c.tx_event_scale.at(tx.dbm) * (kReferenceAdvIntervalMs / 1000.0) *
         c.operating_voltage_v;
}

inline double harvest_power_w(const PowerChainConfig& c, double lux) {
  return lux >= c.min_harvest_lux && lux > 0.0 ? c.harvest_w_per_lux * lux : 0.0;
}

inline double supercap_energy_j(const PowerChainConfig& c, double v) {
  return 0.5 * c.supercap_capacitance_f * v * v;
}

inline double battery_energy_j(const PowerChainConfig& c, double mah) {
  return mah * 3.6 * c.operating_voltage_v;
}

/// Energy flows of one step, for conservation accounting.
struct StepFlows {
  double harvested_j = 0.0;
  double load_served_j = 0.0;
  double load_unmet_j = 0.0;
  double discarded_j = 0.0;  // harvest lost to the full supercapacitor
};

struct StepResult {
  EnergyState state;
  StepFlows flows;
};

inline StepResult step_energy_detailed(const EnergyState& state, const PowerChainConfig& c,
                                       double lux, double load_a, double dt_s) {
  if (!(dt_s > 0.0)) throw std::invalid_argument("dt_s must be > 0");
  if (!(load_a >= 0.0)) throw std::invalid_argument("load must be >= 0");

  StepFlows f;
  f.harvested_j = harvest_power_w(c, lux) * dt_s;
  const double load_j = load_a * c.operating_voltage_v * dt_s;
  const double e_max = supercap_energy_j(c, c.supercap_max_v);
  const double e_op = supercap_energy_j(c, c.operating_voltage_v);

  double e_sc = supercap_energy_j(c, state.supercap_v);
  double e_bat = battery_energy_j(c, state.battery_remaining_mah);

  // The supercapacitor serves the load while it is at or above the operating
  // voltage, down to that voltage; the battery covers the rest.
  double from_cap = 0.0;
  if (state.supercap_v >= c.operating_voltage_v)
    from_cap = std::min(load_j, std::max(0.0, e_sc + f.harvested_j - e_op));
  double remaining = load_j - from_cap;
  double from_bat = std::min(remaining, e_bat);
  f.load_served_j = from_cap + from_bat;
  f.load_unmet_j = remaining - from_bat;

  e_sc = e_sc + f.harvested_j - from_cap;
  if (e_sc > e_max) {
    f.discarded_j = e_sc - e_max;
    e_sc = e_max;
  }
  e_bat -= from_bat;

  EnergyState next;
  next.supercap_v = std::min(std::sqrt(std::max(0.0, 2.0 * e_sc / c.supercap_capacitance_f)),
                             c.supercap_max_v);
  next.battery_remaining_mah = std::max(0.0, e_bat / (3.6 * c.operating_voltage_v));
  if (from_bat == 0.0) next.battery_remaining_mah = state.battery_remaining_mah;
  if (f.harvested_j == from_cap && f.discarded_j == 0.0) next.supercap_v = state.supercap_v;
  next.alive = is_alive(next, c);
  return {next, f};
}

inline EnergyState step_energy(const EnergyState& state, const PowerChainConfig& c, double lux,
                               double load_a, double dt_s) {
  return step_energy_detailed(state, c, lux, load_a, dt_s).state;
}

/// Piecewise-constant 24 h illuminance profile: each sample holds until the
/// next one; the last holds until midnight, wrapping to the first.
class LightingProfile {
 public:
  struct Sample {
    double time_of_day_s = 0.0;
    double lux = 0.0;
  };

  LightingProfile() : samples_{{0.0, 0.0}} {}

  explicit LightingProfile(std::vector<Sample> samples) : samples_(std::move(samples)) {
    if (samples_.empty()) throw std::invalid_argument("lighting profile has no samples");
    std::sort(samples_.begin(), samples_.end(),
              [](const Sample& a, const Sample& b) { return a.time_of_day_s < b.time_of_day_s; });
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const auto& s = samples_[i];
      if (!(s.lux >= 0.0)) throw std::invalid_argument("lux must be >= 0");
      if (s.time_of_day_s < 0.0 || s.time_of_day_s >= kSecondsPerDay)
        throw std::invalid_argument("time_of_day_s must be in [0, 86400)");
      if (i && s.time_of_day_s == samples_[i - 1].time_of_day_s)
        throw std::invalid_argument("duplicate time_of_day_s in lighting profile");
    }
  }

  static LightingProfile constant(double lux) { return LightingProfile({{0.0, lux}}); }

  const std::vector<Sample>& samples() const { return samples_; }

  double lux_at(double t_s) const {
    double tod = std::fmod(t_s, kSecondsPerDay);
    if (tod < 0) tod += kSecondsPerDay;
    auto it = std::upper_bound(samples_.begin(), samples_.end(), tod,
                               [](double t, const Sample& s) { return t < s.time_of_day_s; });
    if (it == samples_.begin()) return samples_.back().lux;  // wrap from previous day
    return std::prev(it)->lux;
  }

  /// Calls fn(duration_s, lux) for each constant segment of the day.
  template <class Fn>
  void for_each_segment(Fn&& fn) const {
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      double start = samples_[i].time_of_day_s;
      double end = i + 1 < samples_.size() ? samples_[i + 1].time_of_day_s : kSecondsPerDay;
      fn(end - start, samples_[i].lux);
    }
    if (samples_.front().time_of_day_s > 0.0) fn(samples_.front().time_of_day_s, samples_.back().lux);
  }

  double hours_lit_per_day(double min_lux) const {
    double lit = 0.0;
    for_each_segment([&](double dur, double lux) {
      if (lux >= min_lux && lux > 0.0) lit += dur;
    });
    return lit / 3600.0;
  }

 private:
  std::vector<Sample> samples_;
};

inline double daily_harvest_j(const PowerChainConfig& c, const LightingProfile& profile) {
  double e = 0.0;
  profile.for_each_segment([&](double dur, double lux) { e += harvest_power_w(c, lux) * dur; });
  return e;
}

inline double daily_consumption_j(const PowerChainConfig& c, double adv_interval_ms, TxPower tx) {
  return consumption_current(c, adv_interval_ms, tx) * c.operating_voltage_v * kSecondsPerDay;
}

struct LifetimePrediction {
  double lifetime_years = 0.0;  // +infinity when energy-neutral
  double battery_only_years = 0.0;
  bool energy_neutral = false;

  /// Extension over the battery-only baseline, in percent (infinity if neutral).
  double extension_pct() const {
    if (energy_neutral) return std::numeric_limits<double>::infinity();
    return (lifetime_years / battery_only_years - 1.0) * 100.0;
  }
};

inline LifetimePrediction predict_lifetime(const PowerChainConfig& c, const LightingProfile& profile,
                                           double adv_interval_ms = kReferenceAdvIntervalMs,
                                           TxPower tx = kDefaultTx) {
  c.validate();
  const double consumed = daily_consumption_j(c, adv_interval_ms, tx);
  const double harvested = daily_harvest_j(c, profile);
  const double battery_j = battery_energy_j(c, c.backup_battery_mah);

  LifetimePrediction out;
  out.battery_only_years = battery_j / consumed / kDaysPerYear;
  if (harvested >= consumed) {
    out.energy_neutral = true;
    out.lifetime_years = std::numeric_limits<double>::infinity();
  } else {
    out.lifetime_years = battery_j / (consumed - harvested) / kDaysPerYear;
  }
  return out;
}

/// Constant illuminance (24 h/day) at which harvest equals consumption.
inline double break_even_lux(const PowerChainConfig& c, double adv_interval_ms = kReferenceAdvIntervalMs,
                             TxPower tx = kDefaultTx) {
  double lux = consumption_current(c, adv_interval_ms, tx) * c.operating_voltage_v / c.harvest_w_per_lux;
  return std::max(lux, c.min_harvest_lux);
}

// ---------------------------------------------------------------------------
// Architecture-level daily energy totals.

struct ArchitectureCosts {
  double alpha = 0.0;  // RF transmission cost per device per day
  double beta = 0.0;   // RF receiving cost per device per day
  double gamma = 0.0;  // LTE cost per device per day
  double n = 0.0;      // smartphones
  double m = 0.0;      // IoT devices
};

struct ArchitectureTotals {
  double decentralized = 0.0;
  double hybrid = 0.0;
  double iotrace = 0.0;
  double this_work = 0.0;
};

inline ArchitectureTotals architecture_energy(const ArchitectureCosts& k) {
  return {
      k.n * (k.alpha + k.beta),
      k.n * (k.alpha + k.beta),
      k.n * k.alpha + k.m * (k.beta + k.gamma),
      k.n * k.beta + k.m * k.alpha,
  };
}

/// Diagnostics for inputs outside the intended regime (alpha << beta << gamma, n > m).
inline std::vector<std::string> architecture_warnings(const ArchitectureCosts& k) {
  std::vector<std::string> w;
  if (k.alpha < 0 || k.beta < 0 || k.gamma < 0 || k.n < 0 || k.m < 0)
    w.emplace_back("negative cost or count");
  if (!(k.alpha < k.beta)) w.emplace_back("expected alpha < beta");
  if (!(k.beta < k.gamma)) w.emplace_back("expected beta < gamma");
  if (!(k.n > k.m)) w.emplace_back("expected n > m");
  return w;
}

}  // namespace luxtrace
