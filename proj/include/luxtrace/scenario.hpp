#pragma once

// Line-oriented protocol scenarios and the tick-driven engine that runs them.
//
//   # comment
//   duration <s>                 tick <s>            seed <u64>
//   epoch <s>                    window <s>          bucket <s>
//   threshold distance <m>       threshold duration <s>
//   beacon <id> at <x> <y> tx <dbm> [interval <ms>] [battery <mAh>] [supercap <V>]
//   user <id> path <t>:<x>,<y> [<t>:<x>,<y> ...]
//   at <t> report <user>
//   lighting <beacon> <profile.csv>
//
// A user exists only between its first and last waypoint times and moves
// linearly between waypoints.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "luxtrace/detection.hpp"
#include "luxtrace/energy.hpp"
#include "luxtrace/identity.hpp"
#include "luxtrace/io.hpp"
#include "luxtrace/protocol.hpp"
#include "luxtrace/radio.hpp"

namespace luxtrace {

class ScenarioParseError : public std::runtime_error {
 public:
  ScenarioParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Waypoint {
  double t_s = 0.0;
  Point at;
};

struct BeaconSpec {
  std::string id;
  Point at;
  TxPower tx = kDefaultTx;
  double adv_interval_ms = kReferenceAdvIntervalMs;
  std::optional<double> battery_mah;
  double supercap_v = 0.0;
  std::optional<LightingProfile> lighting;  // none: dark
};

struct UserSpec {
  std::string id;
  std::vector<Waypoint> path;

  std::optional<Point> position_at(double t) const {
    if (path.empty() || t < path.front().t_s || t > path.back().t_s) return std::nullopt;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      const auto& a = path[i];
      const auto& b = path[i + 1];
      if (t <= b.t_s) {
        double f = b.t_s > a.t_s ? (t - a.t_s) / (b.t_s - a.t_s) : 1.0;
        return Point{a.at.x + f * (b.at.x - a.at.x), a.at.y + f * (b.at.y - a.at.y)};
      }
    }
    return path.back().at;
  }
};

struct ReportSpec {
  double t_s = 0.0;
  std::string user;
};

struct ScenarioScript {
  double duration_s = 1200.0;
  double tick_s = 10.0;
  std::uint64_t seed = 1;
  std::uint64_t epoch_s = kDefaultEpochS;
  std::int64_t bucket_s = kDefaultBucketS;
  ContactThresholds thresholds;
  std::vector<BeaconSpec> beacons;
  std::vector<UserSpec> users;
  std::vector<ReportSpec> reports;
};

namespace detail {

inline double parse_number(const std::string& tok, std::size_t line, const char* what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size() || !std::isfinite(v)) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ScenarioParseError(line, std::string("expected ") + what + ", got '" + tok + "'");
  }
}

inline std::uint64_t parse_u64(const std::string& tok, std::size_t line, const char* what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size())
    throw ScenarioParseError(line, std::string("expected ") + what + ", got '" + tok + "'");
  return v;
}

}  // namespace detail

/// Parses a scenario. Relative lighting-profile paths resolve against `base_dir`.
inline ScenarioScript parse_scenario(std::istream& in, const std::filesystem::path& base_dir = {}) {
  using detail::parse_number;
  using detail::parse_u64;
  ScenarioScript sc;
  std::map<std::string, std::size_t> beacon_index, user_index;
  std::vector<std::pair<std::size_t, ReportSpec>> pending_reports;
  std::string raw;
  std::size_t line_no = 0;

  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const auto& kw = tok[0];
    auto need = [&](std::size_t n, const char* usage) {
      if (tok.size() != n) throw ScenarioParseError(line_no, std::string("usage: ") + usage);
    };

    if (kw == "duration") {
      need(2, "duration <s>");
      sc.duration_s = parse_number(tok[1], line_no, "duration");
      if (!(sc.duration_s > 0)) throw ScenarioParseError(line_no, "duration must be > 0");
    } else if (kw == "tick") {
      need(2, "tick <s>");
      sc.tick_s = parse_number(tok[1], line_no, "tick");
      if (!(sc.tick_s > 0)) throw ScenarioParseError(line_no, "tick must be > 0");
    } else if (kw == "seed") {
      need(2, "seed <u64>");
      sc.seed = parse_u64(tok[1], line_no, "seed");
    } else if (kw == "epoch") {
      need(2, "epoch <s>");
      sc.epoch_s = parse_u64(tok[1], line_no, "epoch");
      if (sc.epoch_s == 0) throw ScenarioParseError(line_no, "epoch must be > 0");
    } else if (kw == "bucket") {
      need(2, "bucket <s>");
      sc.bucket_s = static_cast<std::int64_t>(parse_u64(tok[1], line_no, "bucket"));
      if (sc.bucket_s <= 0) throw ScenarioParseError(line_no, "bucket must be > 0");
    } else if (kw == "window") {
      need(2, "window <s>");
      sc.thresholds.window_s = parse_number(tok[1], line_no, "window");
      if (!(sc.thresholds.window_s > 0)) throw ScenarioParseError(line_no, "window must be > 0");
    } else if (kw == "threshold") {
      need(3, "threshold distance|duration <value>");
      double v = parse_number(tok[2], line_no, "threshold");
      if (!(v > 0)) throw ScenarioParseError(line_no, "threshold must be > 0");
      if (tok[1] == "distance") sc.thresholds.distance_m = v;
      else if (tok[1] == "duration") sc.thresholds.duration_s = v;
      else throw ScenarioParseError(line_no, "unknown threshold '" + tok[1] + "'");
    } else if (kw == "beacon") {
      if (tok.size() < 7 || tok[2] != "at" || tok[5] != "tx" || (tok.size() - 7) % 2 != 0)
        throw ScenarioParseError(line_no,
                                 "usage: beacon <id> at <x> <y> tx <dbm> [interval <ms>] [battery <mAh>] "
                                 "[supercap <V>]");
      BeaconSpec b;
      b.id = tok[1];
      if (beacon_index.count(b.id)) throw ScenarioParseError(line_no, "duplicate beacon '" + b.id + "'");
      b.at = {parse_number(tok[3], line_no, "x"), parse_number(tok[4], line_no, "y")};
      b.tx = {static_cast<int>(parse_number(tok[6], line_no, "tx dBm"))};
      for (std::size_t i = 7; i < tok.size(); i += 2) {
        double v = parse_number(tok[i + 1], line_no, tok[i].c_str());
        if (tok[i] == "interval") {
          if (!(v >= kMinAdvIntervalMs)) throw ScenarioParseError(line_no, "interval must be >= 20 ms");
          b.adv_interval_ms = v;
        } else if (tok[i] == "battery") {
          if (!(v >= 0)) throw ScenarioParseError(line_no, "battery must be >= 0");
          b.battery_mah = v;
        } else if (tok[i] == "supercap") {
          if (!(v >= 0)) throw ScenarioParseError(line_no, "supercap must be >= 0");
          b.supercap_v = v;
        } else {
          throw ScenarioParseError(line_no, "unknown beacon option '" + tok[i] + "'");
        }
      }
      beacon_index[b.id] = sc.beacons.size();
      sc.beacons.push_back(std::move(b));
    } else if (kw == "user") {
      if (tok.size() < 4 || tok[2] != "path")
        throw ScenarioParseError(line_no, "usage: user <id> path <t>:<x>,<y> ...");
      UserSpec u;
      u.id = tok[1];
      if (user_index.count(u.id)) throw ScenarioParseError(line_no, "duplicate user '" + u.id + "'");
      for (std::size_t i = 3; i < tok.size(); ++i) {
        auto colon = tok[i].find(':');
        auto comma = tok[i].find(',', colon == std::string::npos ? 0 : colon);
        if (colon == std::string::npos || comma == std::string::npos)
          throw ScenarioParseError(line_no, "waypoint must look like <t>:<x>,<y>, got '" + tok[i] + "'");
        Waypoint w{parse_number(tok[i].substr(0, colon), line_no, "waypoint time"),
                   {parse_number(tok[i].substr(colon + 1, comma - colon - 1), line_no, "waypoint x"),
                    parse_number(tok[i].substr(comma + 1), line_no, "waypoint y")}};
        if (!u.path.empty() && w.t_s < u.path.back().t_s)
          throw ScenarioParseError(line_no, "waypoint times must be non-decreasing");
        u.path.push_back(w);
      }
      user_index[u.id] = sc.users.size();
      sc.users.push_back(std::move(u));
    } else if (kw == "at") {
      need(4, "at <t> report <user>");
      if (tok[2] != "report") throw ScenarioParseError(line_no, "unknown action '" + tok[2] + "'");
      pending_reports.push_back({line_no, {parse_number(tok[1], line_no, "time"), tok[3]}});
    } else if (kw == "lighting") {
      need(3, "lighting <beacon> <profile-file>");
      auto it = beacon_index.find(tok[1]);
      if (it == beacon_index.end()) throw ScenarioParseError(line_no, "unknown beacon '" + tok[1] + "'");
      std::filesystem::path p(tok[2]);
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      try {
        sc.beacons[it->second].lighting = read_lighting_profile_file(p);
      } catch (const std::exception& e) {
        throw ScenarioParseError(line_no, std::string("lighting profile: ") + e.what());
      }
    } else {
      throw ScenarioParseError(line_no, "unknown directive '" + kw + "'");
    }
  }

  for (auto& [line, r] : pending_reports) {
    if (!user_index.count(r.user)) throw ScenarioParseError(line, "unknown user '" + r.user + "'");
    sc.reports.push_back(r);
  }
  std::stable_sort(sc.reports.begin(), sc.reports.end(),
                   [](const ReportSpec& a, const ReportSpec& b) { return a.t_s < b.t_s; });
  return sc;
}

inline ScenarioScript parse_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file " + path.string());
  return parse_scenario(in, path.parent_path());
}

// ---------------------------------------------------------------------------

enum class ActorKind { Beacon, User, Hospital, Authority };
enum class EventKind { RfTransmit, RfReceive, BeaconDepleted, HospitalReport, AuthorityIngest, ListDownload, Reconcile, Contact };

inline const char* to_string(ActorKind a) {
  switch (a) {
    case ActorKind::Beacon: return "beacon";
    case ActorKind::User: return "user";
    case ActorKind::Hospital: return "hospital";
    case ActorKind::Authority: return "authority";
  }
  return "?";
}

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::RfTransmit: return "rf_transmit";
    case EventKind::RfReceive: return "rf_receive";
    case EventKind::BeaconDepleted: return "beacon_depleted";
    case EventKind::HospitalReport: return "hospital_report";
    case EventKind::AuthorityIngest: return "authority_ingest";
    case EventKind::ListDownload: return "list_download";
    case EventKind::Reconcile: return "reconcile";
    case EventKind::Contact: return "contact";
  }
  return "?";
}

struct LedgerEvent {
  double time_s = 0.0;
  EventKind kind;
  ActorKind actor;
  std::string actor_id;
  std::string detail;
};

struct UserContacts {
  std::string user;
  std::vector<ContactEvent> events;
};

struct ScenarioResult {
  std::vector<LedgerEvent> ledger;
  std::vector<UserContacts> contacts;  // one entry per reconciling user
  std::vector<UserDevice> devices;
  std::uint64_t published_version = 0;

  std::size_t count(EventKind kind, std::optional<ActorKind> actor = std::nullopt) const {
    return static_cast<std::size_t>(std::count_if(ledger.begin(), ledger.end(), [&](const LedgerEvent& e) {
      return e.kind == kind && (!actor || e.actor == *actor);
    }));
  }

  std::size_t total_contacts() const {
    std::size_t n = 0;
    for (const auto& u : contacts) n += u.events.size();
    return n;
  }
};

struct ScenarioEnvironment {
  RadioModel radio;
  PowerChainConfig power;
  double sensitivity_floor_dbm = kDefaultSensitivityDbm;
  double retention_s = kDefaultRetentionS;
  TxPower reconcile_tx = kDefaultTx;
};

inline DeviceId scenario_device_id(std::uint64_t seed, std::size_t index) {
  DeviceId id;
  std::mt19937_64 g(seed ^ (0x6c7578ULL + index * 0x9e3779b97f4a7c15ULL));
  for (auto& b : id.bytes) b = static_cast<std::uint8_t>(g());
  return id;
}

/// Runs the scenario tick by tick: live beacons broadcast, present users scan,
/// scheduled reports go through the hospital to the authority, and at the end
/// every non-reporting user downloads the list and reconciles locally.
inline ScenarioResult run_protocol_scenario(const ScenarioScript& sc, const ScenarioEnvironment& env = {}) {
  env.power.validate();
  for (const auto& b : sc.beacons)
    if (!env.radio.supports(b.tx))
      throw std::invalid_argument("beacon " + b.id + " uses unsupported tx " + std::to_string(b.tx.dbm));

  ScenarioResult res;
  std::mt19937_64 rng(sc.seed);

  struct BeaconRuntime {
    BeaconConfig config;
    PowerChainConfig power;
    EnergyState energy;
    EnergyState latched;  // battery byte is held per epoch so the ID is stable within it
    std::uint64_t latched_epoch = UINT64_MAX;
    bool depleted_logged = false;
  };
  std::vector<BeaconRuntime> beacons;
  for (std::size_t i = 0; i < sc.beacons.size(); ++i) {
    const auto& spec = sc.beacons[i];
    BeaconRuntime b;
    b.config = {MacAddress::for_index(static_cast<std::uint32_t>(i)), scenario_device_id(sc.seed, i),
                spec.adv_interval_ms, spec.tx, sc.epoch_s};
    b.power = env.power;
    if (spec.battery_mah) b.power.backup_battery_mah = *spec.battery_mah;
    b.energy = EnergyState{std::min(spec.supercap_v, b.power.supercap_max_v), b.power.backup_battery_mah, false};
    b.energy.alive = is_alive(b.energy, b.power);
    beacons.push_back(b);
  }

  for (const auto& u : sc.users) res.devices.push_back(UserDevice{u.id, {}, {}});
  AuthorityStore authority(sc.bucket_s);
  std::vector<bool> reported(sc.users.size(), false);
  std::size_t next_report = 0;
  auto user_slot = [&](const std::string& id) {
    for (std::size_t i = 0; i < sc.users.size(); ++i)
      if (sc.users[i].id == id) return i;
    throw std::logic_error("unknown user " + id);
  };
  auto process_report = [&](const ReportSpec& r, double now) {
    auto slot = user_slot(r.user);
    auto report = hospital_report(res.devices[slot], now, "report-" + r.user + "-" + std::to_string(now),
                                  env.retention_s);
    if (!report) {
      res.ledger.push_back({now, EventKind::HospitalReport, ActorKind::Hospital, r.user, "refused: empty log"});
      return;
    }
    reported[slot] = true;
    res.ledger.push_back({now, EventKind::HospitalReport, ActorKind::Hospital, r.user,
                          std::to_string(report->records.size()) + " records"});
    auto ing = authority.ingest(*report);
    res.ledger.push_back({now, EventKind::AuthorityIngest, ActorKind::Authority, "authority",
                          "version " + std::to_string(ing.version) + ", " + std::to_string(ing.added) + " entries"});
  };

  const auto steps = static_cast<std::uint64_t>(std::floor(sc.duration_s / sc.tick_s + 1e-9));
  for (std::uint64_t step = 0; step <= steps; ++step) {
    const double t = static_cast<double>(step) * sc.tick_s;
    const auto clock = static_cast<std::uint64_t>(t);

    std::vector<std::pair<BeaconPayload, Point>> on_air;
    for (std::size_t i = 0; i < beacons.size(); ++i) {
      auto& b = beacons[i];
      std::uint64_t epoch = clock / sc.epoch_s;
      if (epoch != b.latched_epoch) b.latched = b.energy, b.latched_epoch = epoch;
      EnergyState view = b.latched;
      view.alive = b.energy.alive;
      if (auto payload = make_broadcast(b.config, clock, view)) {
        on_air.emplace_back(*payload, sc.beacons[i].at);
        res.ledger.push_back({t, EventKind::RfTransmit, ActorKind::Beacon, sc.beacons[i].id, payload->id.to_hex()});
      } else if (!b.depleted_logged) {
        b.depleted_logged = true;
        res.ledger.push_back({t, EventKind::BeaconDepleted, ActorKind::Beacon, sc.beacons[i].id, ""});
      }
      double lux = sc.beacons[i].lighting ? sc.beacons[i].lighting->lux_at(t) : 0.0;
      double load = consumption_current(b.power, b.config.adv_interval_ms, b.config.tx);
      b.energy = step_energy(b.energy, b.power, lux, load, sc.tick_s);
    }

    for (std::size_t u = 0; u < sc.users.size(); ++u) {
      auto pos = sc.users[u].position_at(t);
      if (!pos || reported[u]) continue;
      std::vector<InRangeBroadcast> heard;
      for (const auto& [payload, at] : on_air) heard.push_back({payload, distance(*pos, at)});
      auto& dev = res.devices[u];
      auto before = dev.log.size();
      user_scan_tick(dev, std::span<const InRangeBroadcast>(heard), env.radio, t, rng, env.sensitivity_floor_dbm);
      for (auto i = before; i < dev.log.size(); ++i)
        res.ledger.push_back({t, EventKind::RfReceive, ActorKind::User, dev.label, dev.log[i].ephemeral_id.to_hex()});
    }

    while (next_report < sc.reports.size() && sc.reports[next_report].t_s <= t)
      process_report(sc.reports[next_report++], t);
  }
  const double end = static_cast<double>(steps) * sc.tick_s;
  while (next_report < sc.reports.size()) process_report(sc.reports[next_report++], end);

  auto published = authority.snapshot();
  res.published_version = published.version;
  for (std::size_t u = 0; u < sc.users.size(); ++u) {
    if (reported[u]) continue;
    const auto& dev = res.devices[u];
    res.ledger.push_back({end, EventKind::ListDownload, ActorKind::User, dev.label,
                          "version " + std::to_string(published.version)});
    auto events = user_reconcile(dev.log, published, env.radio, env.reconcile_tx, sc.thresholds);
    res.ledger.push_back({end, EventKind::Reconcile, ActorKind::User, dev.label,
                          std::to_string(events.size()) + " contacts"});
    for (const auto& e : events)
      res.ledger.push_back({end, EventKind::Contact, ActorKind::User, dev.label,
                            std::to_string(e.window_start_s) + "-" + std::to_string(e.window_end_s)});
    res.contacts.push_back({dev.label, std::move(events)});
  }
  return res;
}

}  // namespace luxtrace
