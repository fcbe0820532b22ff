#pragma once

// Flat `key = value` run configuration covering every module default.
// Unknown keys are rejected; dump() output loads back to the same config.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "luxtrace/accuracy.hpp"
#include "luxtrace/detection.hpp"
#include "luxtrace/energy.hpp"
#include "luxtrace/identity.hpp"
#include "luxtrace/io.hpp"
#include "luxtrace/protocol.hpp"
#include "luxtrace/radio.hpp"

namespace luxtrace {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::map<int, double> parse_int_double_table(const std::string& text) {
  // "-20:-12;-14:-6;..." (';' or whitespace separated)
  std::map<int, double> out;
  std::string norm = text;
  for (char& c : norm)
    if (c == ';') c = ' ';
  std::istringstream in(norm);
  for (std::string item; in >> item;) {
    auto colon = item.find(':', 1);
    if (colon == std::string::npos) throw ConfigError("table entry '" + item + "' must be <int>:<value>");
    try {
      std::size_t p1 = 0, p2 = 0;
      int k = std::stoi(item.substr(0, colon), &p1);
      double v = std::stod(item.substr(colon + 1), &p2);
      if (p1 != colon || p2 != item.size() - colon - 1) throw std::invalid_argument(item);
      out[k] = v;
    } catch (const std::invalid_argument&) {
      throw ConfigError("malformed table entry '" + item + "'");
    } catch (const std::out_of_range&) {
      throw ConfigError("table entry out of range '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty table");
  return out;
}

inline std::string format_table(const std::map<int, double>& t) {
  std::string s;
  for (const auto& [k, v] : t) {
    if (!s.empty()) s += ';';
    s += std::to_string(k) + ":" + csv::num(v);
  }
  return s;
}

}  // namespace detail

struct RunConfig {
  RadioParams radio;
  PowerChainConfig power;
  std::uint64_t epoch_s = kDefaultEpochS;
  ContactThresholds contact;
  double retention_s = kDefaultRetentionS;
  std::int64_t publication_bucket_s = kDefaultBucketS;
  double sensitivity_dbm = kDefaultSensitivityDbm;
  int tx_dbm = kDefaultTx.dbm;
  double adv_interval_ms = kReferenceAdvIntervalMs;
  double area_width_m = 10.0;
  double area_height_m = 10.0;
  std::size_t packets_per_beacon = 10;

  /// Sets one key from its textual value.
  void set(const std::string& key, const std::string& value) {
    auto d = [&] {
      try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
      } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': not a number: '" + value + "'");
      }
    };
    auto u = [&] {
      double v = d();
      if (v < 0 || v != static_cast<double>(static_cast<std::uint64_t>(v)))
        throw ConfigError("config key '" + key + "': expected a non-negative integer");
      return static_cast<std::uint64_t>(v);
    };
    const std::map<std::string, std::function<void()>> setters{
        {"rss_at_1m_dbm", [&] { radio.rss_at_1m_dbm = d(); }},
        {"path_loss_exponent", [&] { radio.path_loss_exponent = d(); }},
        {"shadowing_sigma_db", [&] { radio.shadowing_sigma_db = d(); }},
        {"min_distance_m", [&] { radio.min_distance_m = d(); }},
        {"tx_offset_table", [&] { radio.tx_offset_db = detail::parse_int_double_table(value); }},
        {"operating_voltage_v", [&] { power.operating_voltage_v = d(); }},
        {"supercap_capacitance_f", [&] { power.supercap_capacitance_f = d(); }},
        {"supercap_max_v", [&] { power.supercap_max_v = d(); }},
        {"backup_battery_mah", [&] { power.backup_battery_mah = d(); }},
        {"harvest_w_per_lux", [&] { power.harvest_w_per_lux = d(); }},
        {"min_harvest_lux", [&] { power.min_harvest_lux = d(); }},
        {"firmware_current_a", [&] { power.firmware_current_a = d(); }},
        {"sleep_floor_a", [&] { power.sleep_floor_a = d(); }},
        {"tx_event_scale", [&] { power.tx_event_scale = detail::parse_int_double_table(value); }},
        {"epoch_s", [&] { epoch_s = u(); }},
        {"contact_distance_m", [&] { contact.distance_m = d(); }},
        {"contact_duration_s", [&] { contact.duration_s = d(); }},
        {"window_s", [&] { contact.window_s = d(); }},
        {"retention_s", [&] { retention_s = d(); }},
        {"publication_bucket_s", [&] { publication_bucket_s = static_cast<std::int64_t>(u()); }},
        {"sensitivity_dbm", [&] { sensitivity_dbm = d(); }},
        {"tx_dbm", [&] { tx_dbm = static_cast<int>(d()); }},
        {"adv_interval_ms", [&] { adv_interval_ms = d(); }},
        {"area_width_m", [&] { area_width_m = d(); }},
        {"area_height_m", [&] { area_height_m = d(); }},
        {"packets_per_beacon", [&] { packets_per_beacon = static_cast<std::size_t>(u()); }},
    };
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second();
  }

  /// Builds every module object once so bad values fail early.
  void validate() const {
    try {
      (void)radio_model();
      power.validate();
      contact.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (epoch_s == 0) throw ConfigError("epoch_s must be > 0");
    if (publication_bucket_s <= 0) throw ConfigError("publication_bucket_s must be > 0");
    if (!(retention_s > 0)) throw ConfigError("retention_s must be > 0");
    if (!(area_width_m > 0) || !(area_height_m > 0)) throw ConfigError("area must be positive");
    if (packets_per_beacon == 0) throw ConfigError("packets_per_beacon must be >= 1");
    if (!(adv_interval_ms >= kMinAdvIntervalMs)) throw ConfigError("adv_interval_ms must be >= 20");
  }

  RadioModel radio_model() const { return RadioModel(radio); }
  TxPower tx() const { return {tx_dbm}; }

  DeploymentScenario deployment(std::uint64_t seed) const {
    DeploymentScenario sc;
    sc.width_m = area_width_m;
    sc.height_m = area_height_m;
    sc.tx = tx();
    sc.seed = seed;
    sc.packets_per_beacon = packets_per_beacon;
    sc.sensitivity_floor_dbm = sensitivity_dbm;
    return sc;
  }

  void load(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      auto t = std::string(csv::trim(line));
      if (t.empty()) continue;
      auto eq = t.find('=');
      if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
      auto key = std::string(csv::trim(std::string_view(t).substr(0, eq)));
      auto value = std::string(csv::trim(std::string_view(t).substr(eq + 1)));
      try {
        set(key, value);
      } catch (const ConfigError& e) {
        throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
      }
    }
  }

  void load_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot open config file " + p.string());
    load(in);
  }

  /// Every key with its effective value, in a loadable form.
  void dump(std::ostream& out, std::string_view prefix = "") const {
    auto kv = [&](const char* k, const std::string& v) { out << prefix << k << " = " << v << '\n'; };
    kv("rss_at_1m_dbm", csv::num(radio.rss_at_1m_dbm));
    kv("path_loss_exponent", csv::num(radio.path_loss_exponent));
    kv("shadowing_sigma_db", csv::num(radio.shadowing_sigma_db));
    kv("min_distance_m", csv::num(radio.min_distance_m));
    kv("tx_offset_table", detail::format_table(radio.tx_offset_db));
    kv("operating_voltage_v", csv::num(power.operating_voltage_v));
    kv("supercap_capacitance_f", csv::num(power.supercap_capacitance_f));
    kv("supercap_max_v", csv::num(power.supercap_max_v));
    kv("backup_battery_mah", csv::num(power.backup_battery_mah));
    kv("harvest_w_per_lux", csv::num(power.harvest_w_per_lux));
    kv("min_harvest_lux", csv::num(power.min_harvest_lux));
    kv("firmware_current_a", csv::num(power.firmware_current_a));
    kv("sleep_floor_a", csv::num(power.sleep_floor_a));
    kv("tx_event_scale", detail::format_table(power.tx_event_scale));
    kv("epoch_s", std::to_string(epoch_s));
    kv("contact_distance_m", csv::num(contact.distance_m));
    kv("contact_duration_s", csv::num(contact.duration_s));
    kv("window_s", csv::num(contact.window_s));
    kv("retention_s", csv::num(retention_s));
    kv("publication_bucket_s", std::to_string(publication_bucket_s));
    kv("sensitivity_dbm", csv::num(sensitivity_dbm));
    kv("tx_dbm", std::to_string(tx_dbm));
    kv("adv_interval_ms", csv::num(adv_interval_ms));
    kv("area_width_m", csv::num(area_width_m));
    kv("area_height_m", csv::num(area_height_m));
    kv("packets_per_beacon", std::to_string(packets_per_beacon));
  }
};

}  // namespace luxtrace
