#include "luxtrace/scenario.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace luxtrace;

namespace {

std::string scenario_path(const std::string& name) { return std::string(LUXTRACE_DATA_DIR) + "/scenarios/" + name; }

ScenarioScript parse(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in, std::string(LUXTRACE_DATA_DIR) + "/scenarios");
}

std::size_t error_line(const std::string& text) {
  try {
    parse(text);
  } catch (const ScenarioParseError& e) {
    return e.line();
  }
  return 0;
}

ScenarioEnvironment noiseless_env() {
  RadioParams p;
  p.shadowing_sigma_db = 0.0;
  ScenarioEnvironment env;
  env.radio = RadioModel(p);
  return env;
}

}  // namespace

TEST(ParseScenario, FullGrammar) {
  auto sc = parse(
      "# header\n"
      "duration 600\ntick 5\nseed 99\nepoch 300\nbucket 600\nwindow 30\n"
      "threshold distance 1.5\nthreshold duration 120\n"
      "beacon b1 at 1 2 tx -14 interval 200 battery 50 supercap 2.5\n"
      "lighting b1 ../profiles/office.csv\n"
      "user u path 0:0,0 100:10,0  # moving\n"
      "at 50 report u\n");
  EXPECT_EQ(sc.duration_s, 600.0);
  EXPECT_EQ(sc.tick_s, 5.0);
  EXPECT_EQ(sc.seed, 99u);
  EXPECT_EQ(sc.epoch_s, 300u);
  EXPECT_EQ(sc.bucket_s, 600);
  EXPECT_EQ(sc.thresholds.window_s, 30.0);
  EXPECT_EQ(sc.thresholds.distance_m, 1.5);
  EXPECT_EQ(sc.thresholds.duration_s, 120.0);
  ASSERT_EQ(sc.beacons.size(), 1u);
  EXPECT_EQ(sc.beacons[0].tx.dbm, -14);
  EXPECT_EQ(sc.beacons[0].adv_interval_ms, 200.0);
  EXPECT_EQ(*sc.beacons[0].battery_mah, 50.0);
  EXPECT_EQ(sc.beacons[0].supercap_v, 2.5);
  ASSERT_TRUE(sc.beacons[0].lighting);
  EXPECT_EQ(sc.beacons[0].lighting->lux_at(9 * 3600.0), 500.0);
  ASSERT_EQ(sc.users.size(), 1u);
  auto mid = sc.users[0].position_at(25.0);
  ASSERT_TRUE(mid);
  EXPECT_DOUBLE_EQ(mid->x, 2.5);
  EXPECT_FALSE(sc.users[0].position_at(100.5));
  ASSERT_EQ(sc.reports.size(), 1u);
  EXPECT_EQ(sc.reports[0].user, "u");
}

TEST(ParseScenario, ErrorsCarryLineNumbers) {
  EXPECT_EQ(error_line("duration 10\n\nfrobnicate\n"), 3u);
  EXPECT_EQ(error_line("tick abc\n"), 1u);
  EXPECT_EQ(error_line("tick 0\n"), 1u);
  EXPECT_EQ(error_line("beacon b1 at 1 tx -8\n"), 1u);
  EXPECT_EQ(error_line("beacon b1 at 1 1 tx -8\nbeacon b1 at 2 2 tx -8\n"), 2u);
  EXPECT_EQ(error_line("beacon b1 at 1 1 tx -8 interval 5\n"), 1u);
  EXPECT_EQ(error_line("beacon b1 at 1 1 tx -8 colour red\n"), 1u);
  EXPECT_EQ(error_line("user u path 10:0,0 5:1,1\n"), 1u);
  EXPECT_EQ(error_line("user u path 0-0-0\n"), 1u);
  EXPECT_EQ(error_line("# c\nat 5 report ghost\n"), 2u);
  EXPECT_EQ(error_line("lighting b9 x.csv\n"), 1u);
  EXPECT_EQ(error_line("beacon b1 at 1 1 tx -8\nlighting b1 missing.csv\n"), 2u);
  EXPECT_EQ(error_line("threshold speed 3\n"), 1u);
  EXPECT_THROW(parse_scenario_file(scenario_path("nope.scn")), std::runtime_error);
}

TEST(RunScenario, ColocatedUsersGetOneContact) {
  auto res = run_protocol_scenario(parse_scenario_file(scenario_path("colocated.scn")));
  ASSERT_EQ(res.contacts.size(), 1u);
  EXPECT_EQ(res.contacts[0].user, "bob");
  EXPECT_EQ(res.contacts[0].events.size(), 1u);
  EXPECT_EQ(res.published_version, 1u);
}

TEST(RunScenario, DistantUsersGetNone) {
  auto res = run_protocol_scenario(parse_scenario_file(scenario_path("distant.scn")));
  EXPECT_EQ(res.total_contacts(), 0u);
}

TEST(RunScenario, WalkByIsTooShort) {
  auto res = run_protocol_scenario(parse_scenario_file(scenario_path("walkby.scn")));
  EXPECT_EQ(res.total_contacts(), 0u);
}

TEST(RunScenario, HarvestingDayFindsWaitingRoomContact) {
  auto res = run_protocol_scenario(parse_scenario_file(scenario_path("harvesting.scn")));
  EXPECT_EQ(res.count(EventKind::BeaconDepleted), 0u);
  std::map<std::string, std::size_t> per_user;
  for (const auto& u : res.contacts) per_user[u.user] = u.events.size();
  EXPECT_EQ(per_user["dave"], 1u);
  EXPECT_EQ(per_user["erin"], 0u);
}

TEST(RunScenario, DepletedBeaconStopsBroadcasting) {
  auto sc = parse_scenario_file(scenario_path("depleted.scn"));
  auto res = run_protocol_scenario(sc);
  double last_b2 = -1, depleted_at = -1;
  std::size_t b1 = 0;
  for (const auto& e : res.ledger) {
    if (e.kind == EventKind::RfTransmit && e.actor_id == "b2") last_b2 = e.time_s;
    if (e.kind == EventKind::RfTransmit && e.actor_id == "b1") ++b1;
    if (e.kind == EventKind::BeaconDepleted) {
      EXPECT_EQ(e.actor_id, "b2");
      depleted_at = e.time_s;
    }
  }
  // 0.001 mAh at 12.2 uA lasts about 295 s.
  EXPECT_GT(last_b2, 250.0);
  EXPECT_LT(last_b2, 310.0);
  EXPECT_GT(depleted_at, last_b2);
  EXPECT_EQ(res.count(EventKind::BeaconDepleted), 1u);
  EXPECT_EQ(b1, 121u);
  for (const auto& dev : res.devices)
    for (const auto& r : dev.log) {
      if (r.timestamp_s > last_b2) {
        EXPECT_EQ(r.beacon_mac, MacAddress::for_index(0));
      }
    }
}

TEST(RunScenario, LedgerIsCompleteAndUsersNeverTransmit) {
  for (const char* name : {"colocated.scn", "distant.scn", "walkby.scn", "depleted.scn"}) {
    auto sc = parse_scenario_file(scenario_path(name));
    auto res = run_protocol_scenario(sc);
    EXPECT_EQ(res.count(EventKind::RfTransmit, ActorKind::User), 0u) << name;
    for (const auto& e : res.ledger) {
      if (e.kind == EventKind::RfTransmit) {
        EXPECT_EQ(e.actor, ActorKind::Beacon) << name;
      }
    }

    std::set<std::pair<double, std::string>> on_air;
    for (const auto& e : res.ledger)
      if (e.kind == EventKind::RfTransmit) on_air.insert({e.time_s, e.detail});
    std::size_t logged = 0;
    for (const auto& d : res.devices) {
      logged += d.log.size();
      for (const auto& r : d.log) EXPECT_TRUE(on_air.count({r.timestamp_s, r.ephemeral_id.to_hex()})) << name;
    }
    EXPECT_EQ(res.count(EventKind::RfReceive, ActorKind::User), logged) << name;
    EXPECT_EQ(res.count(EventKind::HospitalReport), sc.reports.size()) << name;
    EXPECT_EQ(res.count(EventKind::AuthorityIngest), sc.reports.size()) << name;
    EXPECT_EQ(res.count(EventKind::Reconcile), sc.users.size() - sc.reports.size()) << name;
    EXPECT_EQ(res.count(EventKind::Contact), res.total_contacts()) << name;
    for (std::size_t i = 1; i < res.ledger.size(); ++i) EXPECT_LE(res.ledger[i - 1].time_s, res.ledger[i].time_s);
  }
}

TEST(RunScenario, IdsStableWithinEpochAndRotateAcross) {
  auto sc = parse("duration 1800\ntick 30\nepoch 900\nbeacon b at 0 0 tx -8\n");
  auto res = run_protocol_scenario(sc);
  std::map<long, std::set<std::string>> ids_per_epoch;
  for (const auto& e : res.ledger)
    if (e.kind == EventKind::RfTransmit) ids_per_epoch[static_cast<long>(e.time_s) / 900].insert(e.detail);
  ASSERT_EQ(ids_per_epoch.size(), 3u);
  for (const auto& [ep, ids] : ids_per_epoch) EXPECT_EQ(ids.size(), 1u);
  EXPECT_NE(*ids_per_epoch[0].begin(), *ids_per_epoch[1].begin());
}

TEST(RunScenario, SameSeedSameLedger) {
  auto sc = parse_scenario_file(scenario_path("walkby.scn"));
  auto a = run_protocol_scenario(sc), b = run_protocol_scenario(sc);
  ASSERT_EQ(a.ledger.size(), b.ledger.size());
  for (std::size_t i = 0; i < a.ledger.size(); ++i) EXPECT_EQ(a.ledger[i].detail, b.ledger[i].detail);
}

TEST(RunScenario, ReportWithEmptyLogIsRefused) {
  auto res = run_protocol_scenario(parse("duration 100\nbeacon b at 0 0 tx -8\nuser u path 50:1,1 60:1,1\nat 10 report u\n"));
  ASSERT_EQ(res.count(EventKind::HospitalReport), 1u);
  EXPECT_EQ(res.count(EventKind::AuthorityIngest), 0u);
  EXPECT_EQ(res.published_version, 0u);
}

TEST(RunScenario, NoiselessTrueContactsAreAlwaysFound) {
  // Without shadowing the separation estimate never exceeds the true
  // separation, so users that really stay within the threshold long enough
  // are always flagged.
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> c(0.0, 8.0), sep(0.0, 6.0);
  int positives = 0, flagged = 0;
  for (int trial = 0; trial < 40; ++trial) {
    std::ostringstream s;
    s << "duration 900\ntick 10\nseed " << trial << "\n";
    for (int b = 0; b < 3; ++b) s << "beacon b" << b << " at " << c(rng) << ' ' << c(rng) << " tx -8\n";
    double x = c(rng), y = c(rng), d = sep(rng);
    s << "user p path 0:" << x << ',' << y << " 900:" << x << ',' << y << "\n";
    s << "user q path 0:" << x + d << ',' << y << " 900:" << x + d << ',' << y << "\n";
    s << "at 900 report p\n";
    auto res = run_protocol_scenario(parse(s.str()), noiseless_env());
    bool found = res.total_contacts() > 0;
    if (d <= 2.0) {
      ++positives;
      EXPECT_TRUE(found) << "separation " << d;
    }
    flagged += found;
  }
  EXPECT_GT(positives, 5);
  EXPECT_GE(flagged, positives);
}
