#include <gtest/gtest.h>

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "luxtrace/authority_service.hpp"
#include "luxtrace/records_io.hpp"

namespace fs = std::filesystem;
using namespace luxtrace;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path temp_dir() {
  static fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("luxtrace_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run run(const std::string& args) {
  auto out = temp_dir() / "stdout.txt", err = temp_dir() / "stderr.txt";
  std::string cmd = std::string(LUXTRACE_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string data(const std::string& rel) { return std::string(LUXTRACE_DATA_DIR) + "/" + rel; }

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Cli, IdgenZeroInputs) {
  auto r = run("--quiet idgen");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, std::string(54, '0') + ",3cc4236e\n");
}

TEST(Cli, IdgenVectorsVerifyAgainstCommittedOracle) {
  auto r = run("--quiet idgen --check " + data("vectors/ephemeral_ids.csv"));
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find(",0\n"), std::string::npos);

  auto gen = run("--quiet --seed 9 idgen --vectors 20 --out " + (temp_dir() / "v.csv").string());
  ASSERT_EQ(gen.code, 0);
  EXPECT_EQ(lines(slurp(temp_dir() / "v.csv")).size(), 20u);
  EXPECT_EQ(run("--quiet idgen --check " + (temp_dir() / "v.csv").string()).code, 0);
}

TEST(Cli, UsageAndInputErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("idgen --battery 300").code, 2);
  EXPECT_EQ(run("idgen --device-id abc").code, 2);
  EXPECT_EQ(run("--set nonsense=1 idgen").code, 2);
  EXPECT_EQ(run("--set shadowing_sigma_db=-1 idgen").code, 2);
  EXPECT_EQ(run("scenario /nonexistent/file.scn").code, 2);
  EXPECT_EQ(run("lifetime --profile /nonexistent.csv").code, 2);
  EXPECT_EQ(run("accuracy --trials 10").code, 2);
  EXPECT_EQ(run("accuracy --trials 100 --counts 0").code, 2);
  EXPECT_EQ(run("reconcile --log " + data("profiles/office.csv") + " --published x").code, 2);
  EXPECT_EQ(run("serve").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, EffectiveConfigEchoReloads) {
  auto r = run("--set shadowing_sigma_db=1.5 --set tx_dbm=-2 idgen");
  ASSERT_EQ(r.code, 0);
  auto cfg = temp_dir() / "echo.cfg";
  {
    std::ofstream f(cfg);
    f << r.err;
  }
  auto again = run("--config " + cfg.string() + " idgen");
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(again.err, r.err);
  EXPECT_NE(r.err.find("shadowing_sigma_db = 1.5"), std::string::npos);
}

TEST(Cli, LifetimeTable) {
  auto r = run("--quiet lifetime --profile " + data("profiles/dark.csv") + " --locations " +
               data("profiles/social_locations.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 6u);
  EXPECT_EQ(ls[0], "location,lux_profile,lifetime_years,extension_pct");
  EXPECT_EQ(ls.back(), "dark,dark.csv,2.197,0.0");
}

TEST(Cli, LifetimeTrace) {
  auto r = run("--quiet lifetime --profile " + data("profiles/window.csv") + " --trace 2 --trace-step 600");
  ASSERT_EQ(r.code, 0) << r.err;
  auto ls = lines(r.out);
  EXPECT_EQ(ls[0], "time_s,lux,supercap_v,battery_mah,alive");
  EXPECT_EQ(ls.size(), 14u);
}

TEST(Cli, AccuracyIsSeedDeterministicAndThreadInvariant) {
  auto a = run("--quiet --seed 5 accuracy --trials 200 --counts 1-4");
  auto b = run("--quiet --seed 5 accuracy --trials 200 --counts 1-4 --threads 3");
  auto c = run("--quiet --seed 6 accuracy --trials 200 --counts 1-4");
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out, c.out);
  auto ls = lines(a.out);
  ASSERT_EQ(ls.size(), 5u);
  EXPECT_EQ(ls[0], "n_beacons,mean_error_m,ci95_m,trials,excluded");
  EXPECT_EQ(ls[1].substr(0, 2), "1,");
}

TEST(Cli, ScenarioContactsAndLedger) {
  auto ledger = temp_dir() / "ledger.csv";
  auto r = run("--quiet scenario " + data("scenarios/colocated.scn") + " --ledger " + ledger.string());
  ASSERT_EQ(r.code, 0) << r.err;
  auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 2u);
  EXPECT_EQ(ls[1].substr(0, 4), "bob,");
  EXPECT_NE(r.err.find("user rf transmissions 0"), std::string::npos);
  auto led = slurp(ledger);
  EXPECT_EQ(led.rfind("time_s,kind,actor,actor_id,detail\n", 0), 0u);
  EXPECT_EQ(led.find("rf_transmit,user"), std::string::npos);
  EXPECT_NE(led.find("authority_ingest"), std::string::npos);

  auto bad = temp_dir() / "bad.scn";
  {
    std::ofstream f(bad);
    f << "duration 10\nwat\n";
  }
  auto e = run("scenario " + bad.string());
  EXPECT_EQ(e.code, 2);
  EXPECT_NE(e.err.find("line 2"), std::string::npos);
}

TEST(Cli, ReconcileFromSnapshotAndAuthority) {
  // Two co-located logs; one is published.
  std::vector<ScanRecord> mine, theirs;
  for (int t = 0; t < 900; t += 10)
    for (std::uint32_t b = 0; b < 3; ++b) {
      mine.push_back({double(t), MacAddress::for_index(b), EphemeralId::from_value(b + 1), -62.0 - b});
      theirs.push_back({double(t), MacAddress::for_index(b), EphemeralId::from_value(b + 1), -63.0 - b});
    }
  AuthorityStore store;
  store.ingest({"p", 900, theirs});
  auto log_path = temp_dir() / "log.csv", pub_path = temp_dir() / "pub.csv";
  {
    std::ofstream f(log_path);
    write_scan_log(f, mine);
    std::ofstream p(pub_path);
    write_published(p, store.snapshot());
  }
  auto r = run("--quiet reconcile --log " + log_path.string() + " --published " + pub_path.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(r.out).size(), 2u);

  AuthorityService svc(store, "t");
  int port = svc.bind_any_port();
  std::jthread th([&] { svc.serve(); });
  svc.wait_until_ready();
  auto viaweb = run("--quiet reconcile --log " + log_path.string() + " --authority http://127.0.0.1:" +
                    std::to_string(port));
  EXPECT_EQ(viaweb.code, 0) << viaweb.err;
  EXPECT_EQ(viaweb.out, r.out);
  auto none = run("--quiet reconcile --log " + log_path.string() + " --authority http://127.0.0.1:" +
                  std::to_string(port) + " --since 1");
  EXPECT_EQ(lines(none.out).size(), 1u);
  svc.stop();
}

TEST(Cli, ServeAcceptsReportsAndStopsOnSignal) {
  int pipefd[2];
  ASSERT_EQ(::pipe(pipefd), 0);
  pid_t pid = ::fork();
  ASSERT_GE(pid, 0);
  if (pid == 0) {
    ::dup2(pipefd[1], STDERR_FILENO);
    ::close(pipefd[0]);
    ::execl(LUXTRACE_CLI, LUXTRACE_CLI, "--quiet", "serve", "--port", "0", "--token", "tok", (char*)nullptr);
    ::_exit(127);
  }
  ::close(pipefd[1]);
  std::string banner;
  char c;
  while (::read(pipefd[0], &c, 1) == 1 && c != '\n') banner.push_back(c);
  auto colon = banner.rfind(':');
  ASSERT_NE(colon, std::string::npos) << banner;
  int port = std::stoi(banner.substr(colon + 1));

  AuthorityClient client("127.0.0.1", port);
  PositiveReport rep{"r", 0, {{10, MacAddress::for_index(1), EphemeralId::from_value(5), -60}}};
  EXPECT_EQ(client.submit(rep, "tok").version, 1u);
  EXPECT_TRUE(client.submit(rep, "tok").duplicate);
  EXPECT_THROW(client.submit(rep, "nope"), std::runtime_error);
  EXPECT_EQ(client.fetch(0).entries.size(), 1u);

  ::kill(pid, SIGTERM);
  int status = 0;
  ::waitpid(pid, &status, 0);
  ::close(pipefd[0]);
  EXPECT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0);
}
