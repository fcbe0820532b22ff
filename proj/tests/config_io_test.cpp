#include "luxtrace/config.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "luxtrace/io.hpp"
#include "luxtrace/records_io.hpp"

using namespace luxtrace;

TEST(Csv, NumRoundTrips) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    double v = u(rng) / (1 + i);
    EXPECT_EQ(std::stod(csv::num(v)), v);
  }
  EXPECT_EQ(csv::num(0.5), "0.5");
  EXPECT_EQ(csv::num(12.2e-6), "1.22e-05");
  EXPECT_EQ(csv::num(-std::numeric_limits<double>::infinity()), "-inf");
}

TEST(Csv, SplitAndTrim) {
  auto f = csv::split(" a , b,,c \r");
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[0], "a");
  EXPECT_EQ(f[2], "");
  EXPECT_EQ(f[3], "c");
}

TEST(LightingProfileCsv, ParsesAndReportsBadRows) {
  std::istringstream ok("time_of_day_s,lux\n0,0\n# lights on\n28800, 500\n64800,0\n");
  auto p = read_lighting_profile(ok);
  EXPECT_EQ(p.lux_at(30000), 500.0);

  std::istringstream bad_header("t,lux\n0,0\n");
  EXPECT_THROW(read_lighting_profile(bad_header), FormatError);
  std::istringstream bad_value("time_of_day_s,lux\n0,0\n10,bright\n");
  try {
    read_lighting_profile(bad_value);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  std::istringstream bad_cols("time_of_day_s,lux\n0,0,1\n");
  EXPECT_THROW(read_lighting_profile(bad_cols), FormatError);
  std::istringstream unsorted("time_of_day_s,lux\n36000,0\n3600,100\n");
  EXPECT_EQ(read_lighting_profile(unsorted).lux_at(7200), 100.0);
  std::istringstream repeated("time_of_day_s,lux\n10,0\n10,1\n");
  EXPECT_THROW(read_lighting_profile(repeated), FormatError);
  std::istringstream empty("");
  EXPECT_THROW(read_lighting_profile(empty), FormatError);
}

TEST(CalibrationCsv, Parses) {
  std::istringstream in("tx_dbm,distance_m,rss_dbm\n-8,1,-60\n4,2,-54.02\n");
  auto m = read_calibration(in);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[1].tx_dbm, 4);
  EXPECT_EQ(m[1].distance_m, 2.0);
}

TEST(ScanLogCsv, RoundTrip) {
  std::vector<ScanRecord> log{{0.5, MacAddress::for_index(3), EphemeralId::from_value(0xdeadbeef), -61.25},
                              {1e6, MacAddress::for_index(0), EphemeralId::from_value(1), -99.999}};
  std::stringstream s;
  write_scan_log(s, log);
  EXPECT_EQ(read_scan_log(s), log);
  std::istringstream bad(std::string(kScanLogHeader) + "\n1,c0:00:00:00:00:01,zzzz,-60\n");
  EXPECT_THROW(read_scan_log(bad), FormatError);
}

TEST(PublishedCsv, RoundTrip) {
  PublishedList l{0, 600, {{EphemeralId::from_value(7), 1200, -70.5, 0}, {EphemeralId::from_value(8), 0, -80, 0}}};
  std::stringstream s;
  write_published(s, l);
  auto back = read_published(s, 600);
  EXPECT_EQ(back.bucket_s, 600);
  EXPECT_EQ(back.entries, l.entries);
}

TEST(IdVectors, FormatAndParse) {
  auto p = encode_preimage(DeviceId{}, BatteryStatus{0}, 0, 900);
  std::istringstream in(format_id_vector(p) + "\n");
  auto v = read_id_vectors(in);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].id.to_hex(), "3cc4236e");
  std::istringstream bad("00,11\n");
  EXPECT_THROW(read_id_vectors(bad), FormatError);
}

TEST(RunConfig, DumpLoadsBackIdentically) {
  RunConfig c;
  c.set("shadowing_sigma_db", "3.5");
  c.set("tx_offset_table", "-8:0;-2:6.5");
  c.set("tx_dbm", "-2");
  c.set("contact_duration_s", "300");
  c.set("publication_bucket_s", "900");
  c.set("tx_event_scale", "-8:1;-2:1.2");
  std::stringstream s;
  c.dump(s);
  RunConfig d;
  d.load(s);
  std::stringstream s2;
  d.dump(s2);
  std::stringstream s1;
  c.dump(s1);
  EXPECT_EQ(s1.str(), s2.str());
  EXPECT_EQ(d.radio.shadowing_sigma_db, 3.5);
  EXPECT_EQ(d.radio.tx_offset_db.at(-2), 6.5);
  EXPECT_EQ(d.publication_bucket_s, 900);
  EXPECT_NO_THROW(d.validate());
}

TEST(RunConfig, DefaultsValidate) {
  RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.contact.distance_m, 2.0);
  EXPECT_EQ(c.contact.duration_s, 600.0);
  EXPECT_EQ(c.epoch_s, 900u);
}

TEST(RunConfig, RejectsUnknownAndMalformed) {
  RunConfig c;
  EXPECT_THROW(c.set("colour", "red"), ConfigError);
  EXPECT_THROW(c.set("epoch_s", "1.5"), ConfigError);
  EXPECT_THROW(c.set("epoch_s", "-3"), ConfigError);
  EXPECT_THROW(c.set("path_loss_exponent", "two"), ConfigError);
  EXPECT_THROW(c.set("tx_offset_table", "-8"), ConfigError);
  EXPECT_THROW(c.set("tx_offset_table", ""), ConfigError);
  std::istringstream in("# comment\nepoch_s = 60\nnonsense\n");
  try {
    c.load(in);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  RunConfig v;
  v.set("tx_offset_table", "-8:0;-2:9");
  EXPECT_THROW(v.validate(), ConfigError);
  v = {};
  v.set("sleep_floor_a", "1");
  EXPECT_THROW(v.validate(), ConfigError);
  v = {};
  v.set("adv_interval_ms", "10");
  EXPECT_THROW(v.validate(), ConfigError);
}

TEST(RunConfig, DeploymentCarriesSettings) {
  RunConfig c;
  c.set("area_width_m", "20");
  c.set("packets_per_beacon", "3");
  auto d = c.deployment(17);
  EXPECT_EQ(d.width_m, 20.0);
  EXPECT_EQ(d.packets_per_beacon, 3u);
  EXPECT_EQ(d.seed, 17u);
}
