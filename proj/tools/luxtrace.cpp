// luxtrace: command-line front end for the beacon contact-tracing library.
//
// CSV goes to stdout (or --out), diagnostics and the effective config echo go
// to stderr. Exit codes: 0 success, 1 internal failure, 2 usage/input error.

#include <CLI11.hpp>

#include <csignal>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "luxtrace/accuracy.hpp"
#include "luxtrace/authority_service.hpp"
#include "luxtrace/config.hpp"
#include "luxtrace/energy.hpp"
#include "luxtrace/identity.hpp"
#include "luxtrace/io.hpp"
#include "luxtrace/records_io.hpp"
#include "luxtrace/scenario.hpp"

namespace fs = std::filesystem;
using namespace luxtrace;

namespace {

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config_file;
  std::vector<std::string> overrides;
  std::uint64_t seed = 1;
  std::string out_path;
  bool quiet = false;
  RunConfig cfg;
};

/// stdout, or the --out file.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw InputError("cannot open output file " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

void resolve_config(Globals& g) {
  if (!g.config_file.empty()) g.cfg.load_file(g.config_file);
  for (const auto& kv : g.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    g.cfg.set(std::string(csv::trim(std::string_view(kv).substr(0, eq))),
              std::string(csv::trim(std::string_view(kv).substr(eq + 1))));
  }
  g.cfg.validate();
  if (!g.quiet) {
    std::cerr << "# effective config (seed = " << g.seed << ")\n";
    g.cfg.dump(std::cerr);
  }
}

// --- idgen -------------------------------------------------------------------

struct IdgenArgs {
  std::string device_id_hex = std::string(36, '0');
  int battery = 0;
  std::uint64_t timestamp = 0;
  std::uint64_t epoch = 0;  // 0: from config
  std::size_t vectors = 0;
  std::string check_file;
};

int cmd_idgen(Globals& g, const IdgenArgs& a) {
  const std::uint64_t epoch = a.epoch ? a.epoch : g.cfg.epoch_s;
  Output out(g.out_path);

  if (!a.check_file.empty()) {
    std::ifstream in(a.check_file);
    if (!in) throw InputError("cannot open " + a.check_file);
    auto vectors = read_id_vectors(in);
    std::size_t bad = 0;
    for (const auto& v : vectors) {
      auto pre = PacketPreimage::deserialize(v.preimage);
      if (ephemeral_id(pre) != v.id) {
        ++bad;
        std::cerr << "mismatch: " << to_hex(v.preimage) << " expected " << v.id.to_hex() << " got "
                  << ephemeral_id(pre).to_hex() << '\n';
      }
    }
    out.stream() << "vectors,mismatches\n" << vectors.size() << ',' << bad << '\n';
    return bad == 0 ? 0 : 1;
  }

  if (a.vectors > 0) {
    std::mt19937_64 rng(g.seed);
    for (std::size_t i = 0; i < a.vectors; ++i) {
      DeviceId id;
      for (auto& b : id.bytes) b = static_cast<std::uint8_t>(rng());
      auto battery = BatteryStatus{static_cast<std::uint8_t>(rng())};
      out.stream() << format_id_vector(encode_preimage(id, battery, rng() >> 24, epoch)) << '\n';
    }
    return 0;
  }

  if (a.battery < 0 || a.battery > 255) throw InputError("--battery must be in 0..255");
  DeviceId id;
  try {
    id = DeviceId::from_hex(a.device_id_hex);
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("--device-id: ") + e.what());
  }
  out.stream() << format_id_vector(
                      encode_preimage(id, BatteryStatus{static_cast<std::uint8_t>(a.battery)}, a.timestamp, epoch))
               << '\n';
  return 0;
}

// --- calibrate -----------------------------------------------------------------

int cmd_calibrate(Globals& g, const std::string& csv_file) {
  std::ifstream in(csv_file);
  if (!in) throw InputError("cannot open " + csv_file);
  auto samples = read_calibration(in);
  auto fit = calibrate(g.cfg.radio_model(), samples);
  Output out(g.out_path);
  out.stream() << "rss_at_1m_dbm,path_loss_exponent,rms_residual_db,samples\n"
               << csv::num(fit.model.params().rss_at_1m_dbm) << ',' << csv::num(fit.model.params().path_loss_exponent)
               << ',' << csv::num(fit.rms_residual_db) << ',' << samples.size() << '\n';
  return 0;
}

// --- lifetime --------------------------------------------------------------------

struct LifetimeArgs {
  std::vector<std::string> profiles;
  std::string locations_file;
  double trace_hours = 0.0;
  double trace_step_s = 60.0;
  double supercap_v = 3.3;
};

int cmd_lifetime(Globals& g, const LifetimeArgs& a) {
  std::vector<std::pair<std::string, fs::path>> rows;
  if (!a.locations_file.empty()) {
    std::ifstream in(a.locations_file);
    if (!in) throw InputError("cannot open " + a.locations_file);
    fs::path base = fs::path(a.locations_file).parent_path();
    csv::for_each_row(in, "location,profile", 2, [&](const auto& f, std::size_t) {
      fs::path p(f[1]);
      rows.emplace_back(f[0], p.is_relative() ? base / p : p);
    });
  }
  for (const auto& p : a.profiles) rows.emplace_back(fs::path(p).stem().string(), fs::path(p));
  if (rows.empty()) throw InputError("lifetime needs --profile or --locations");
  for (const auto& [name, path] : rows)
    if (!fs::is_regular_file(path)) throw InputError("lighting profile not found: " + path.string());

  const auto& power = g.cfg.power;
  const TxPower tx = g.cfg.tx();
  Output out(g.out_path);

  if (a.trace_hours > 0.0) {
    if (rows.size() != 1) throw InputError("--trace takes exactly one profile");
    if (!(a.trace_step_s > 0.0)) throw InputError("--trace-step must be > 0");
    auto profile = read_lighting_profile_file(rows[0].second);
    auto state = initial_state(power, a.supercap_v);
    double load = consumption_current(power, g.cfg.adv_interval_ms, tx);
    out.stream() << "time_s,lux,supercap_v,battery_mah,alive\n";
    const auto steps = static_cast<std::size_t>(a.trace_hours * 3600.0 / a.trace_step_s);
    for (std::size_t i = 0; i <= steps; ++i) {
      double t = static_cast<double>(i) * a.trace_step_s;
      double lux = profile.lux_at(t);
      out.stream() << csv::num(t) << ',' << csv::num(lux) << ',' << csv::fixed(state.supercap_v, 6) << ','
                   << csv::fixed(state.battery_remaining_mah, 6) << ',' << (state.alive ? 1 : 0) << '\n';
      state = step_energy(state, power, lux, load, a.trace_step_s);
    }
    return 0;
  }

  out.stream() << "location,lux_profile,lifetime_years,extension_pct\n";
  for (const auto& [name, path] : rows) {
    auto profile = read_lighting_profile_file(path);
    auto pred = predict_lifetime(power, profile, g.cfg.adv_interval_ms, tx);
    out.stream() << name << ',' << path.filename().string() << ',';
    if (pred.energy_neutral)
      out.stream() << "energy-neutral,inf\n";
    else
      out.stream() << csv::fixed(pred.lifetime_years, 3) << ',' << csv::fixed(pred.extension_pct(), 1) << '\n';
    if (!g.quiet)
      std::cerr << "# " << name << ": battery-only baseline " << csv::fixed(pred.battery_only_years, 3)
                << " years, lit " << csv::fixed(profile.hours_lit_per_day(power.min_harvest_lux), 1)
                << " h/day\n";
  }
  return 0;
}

// --- accuracy --------------------------------------------------------------------

std::vector<std::size_t> parse_counts(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      auto dash = item.find('-');
      std::size_t lo = std::stoul(item.substr(0, dash));
      std::size_t hi = dash == std::string::npos ? lo : std::stoul(item.substr(dash + 1));
      if (lo == 0 || hi < lo) throw std::invalid_argument(item);
      for (auto c = lo; c <= hi; ++c) out.push_back(c);
    } catch (const std::exception&) {
      throw InputError("--counts: malformed item '" + item + "'");
    }
  }
  if (out.empty()) throw InputError("--counts is empty");
  return out;
}

struct AccuracyArgs {
  std::size_t trials = 10000;
  std::string counts = "1-10";
  unsigned threads = 1;
};

int cmd_accuracy(Globals& g, const AccuracyArgs& a) {
  if (a.trials < 100) throw InputError("--trials must be >= 100");
  auto report = accuracy_sweep(g.cfg.deployment(g.seed), parse_counts(a.counts), a.trials, g.cfg.radio_model(),
                               a.threads);
  Output out(g.out_path);
  out.stream() << "n_beacons,mean_error_m,ci95_m,trials,excluded\n";
  for (const auto& r : report.rows)
    out.stream() << r.n_beacons << ',' << csv::fixed(r.mean_error_m, 6) << ',' << csv::fixed(r.ci95_m, 6) << ','
                 << r.trials << ',' << r.excluded << '\n';
  if (report.rows.size() >= 2) {
    double rho = error_trend(report);
    std::cerr << "# trend: spearman(n_beacons, mean_error) = " << csv::fixed(rho, 4)
              << (rho <= -0.8 ? " (decreasing: ok)" : " (decreasing: NOT met)") << '\n';
  }
  return 0;
}

// --- scenario ----------------------------------------------------------------------

int cmd_scenario(Globals& g, const std::string& file, const std::string& ledger_file) {
  if (!fs::exists(file)) throw InputError("scenario file not found: " + file);
  auto script = parse_scenario_file(file);
  ScenarioEnvironment env{g.cfg.radio_model(), g.cfg.power, g.cfg.sensitivity_dbm, g.cfg.retention_s, g.cfg.tx()};
  auto result = run_protocol_scenario(script, env);

  Output out(g.out_path);
  out.stream() << "user,start_s,end_s,min_distance_m,n_matched_ids\n";
  for (const auto& u : result.contacts)
    for (const auto& e : u.events)
      out.stream() << u.user << ',' << csv::num(e.window_start_s) << ',' << csv::num(e.window_end_s) << ','
                   << csv::fixed(e.min_estimated_distance_m, 3) << ',' << e.matched_ids.size() << '\n';

  if (!ledger_file.empty()) {
    std::ofstream led(ledger_file);
    if (!led) throw InputError("cannot open ledger file " + ledger_file);
    led << "time_s,kind,actor,actor_id,detail\n";
    for (const auto& e : result.ledger)
      led << csv::num(e.time_s) << ',' << to_string(e.kind) << ',' << to_string(e.actor) << ',' << e.actor_id << ','
          << e.detail << '\n';
  }
  std::cerr << "# broadcasts " << result.count(EventKind::RfTransmit) << ", receptions "
            << result.count(EventKind::RfReceive) << ", user rf transmissions "
            << result.count(EventKind::RfTransmit, ActorKind::User) << ", published version "
            << result.published_version << ", contacts " << result.total_contacts() << '\n';
  return 0;
}

// --- serve / reconcile -----------------------------------------------------------------

AuthorityService* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

int cmd_serve(Globals& g, const std::string& host, int port, std::string token) {
  if (token.empty()) {
    if (const char* env = std::getenv("LUXTRACE_HOSPITAL_TOKEN")) token = env;
  }
  if (token.empty()) throw InputError("serve needs --token or LUXTRACE_HOSPITAL_TOKEN");
  AuthorityStore store(g.cfg.publication_bucket_s);
  AuthorityService service(store, token);
  if (port == 0)
    port = service.bind_any_port(host);
  else
    service.bind(host, port);
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "# authority listening on " << host << ':' << port << std::endl;
  service.serve();
  g_service = nullptr;
  return 0;
}

struct ReconcileArgs {
  std::string log_file;
  std::string published_file;
  std::string authority_url;
  std::uint64_t since = 0;
};

int cmd_reconcile(Globals& g, const ReconcileArgs& a) {
  std::ifstream log_in(a.log_file);
  if (!log_in) throw InputError("cannot open scan log " + a.log_file);
  auto log = read_scan_log(log_in);

  PublishedList list;
  if (!a.authority_url.empty()) {
    AuthorityClient client(a.authority_url);
    list = client.fetch(a.since);
  } else if (!a.published_file.empty()) {
    std::ifstream pin(a.published_file);
    if (!pin) throw InputError("cannot open published list " + a.published_file);
    list = read_published(pin, g.cfg.publication_bucket_s);
  } else {
    throw InputError("reconcile needs --published or --authority");
  }

  auto events = user_reconcile(log, list, g.cfg.radio_model(), g.cfg.tx(), g.cfg.contact);
  Output out(g.out_path);
  write_contact_events(out.stream(), events);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contact tracing over light-harvesting BLE beacons: ID generation, radio calibration, "
               "lifetime prediction, accuracy sweeps, protocol scenarios and the authority service."};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  Globals g;
  app.add_option("--config", g.config_file, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "override one config key (key=value), repeatable");
  app.add_option("--seed", g.seed, "RNG seed");
  app.add_option("--out", g.out_path, "write CSV output to this file instead of stdout");
  app.add_flag("--quiet", g.quiet, "do not echo the effective config to stderr");

  IdgenArgs idgen;
  auto* c_idgen = app.add_subcommand("idgen", "print preimage and ephemeral ID as hex(preimage),hex(id)");
  c_idgen->add_option("--device-id", idgen.device_id_hex, "18-byte device ID as hex");
  c_idgen->add_option("--battery", idgen.battery, "battery status byte 0..255");
  c_idgen->add_option("--timestamp", idgen.timestamp, "UNIX seconds");
  c_idgen->add_option("--epoch", idgen.epoch, "rotation epoch in seconds (default: config epoch_s)");
  c_idgen->add_option("--vectors", idgen.vectors, "emit N random test vectors from --seed");
  c_idgen->add_option("--check", idgen.check_file, "verify a test-vector file");

  std::string calib_csv;
  auto* c_cal = app.add_subcommand("calibrate", "fit rss_at_1m and path loss exponent to measurements");
  c_cal->add_option("csv", calib_csv, "CSV with header tx_dbm,distance_m,rss_dbm")->required();

  LifetimeArgs life;
  auto* c_life = app.add_subcommand("lifetime", "predict beacon lifetime for lighting profiles");
  c_life->add_option("--profile", life.profiles, "lighting profile CSV (time_of_day_s,lux), repeatable");
  c_life->add_option("--locations", life.locations_file, "CSV location,profile listing profiles");
  c_life->add_option("--trace", life.trace_hours, "emit a supercapacitor voltage trace over N hours instead");
  c_life->add_option("--trace-step", life.trace_step_s, "trace step in seconds");
  c_life->add_option("--supercap-v", life.supercap_v, "initial supercapacitor voltage for --trace");

  AccuracyArgs acc;
  auto* c_acc = app.add_subcommand("accuracy", "Monte Carlo distance-estimation error versus beacon count");
  c_acc->add_option("--trials", acc.trials, "trials per beacon count");
  c_acc->add_option("--counts", acc.counts, "beacon counts, e.g. 1-10 or 1,2,5");
  c_acc->add_option("--threads", acc.threads, "worker threads");

  std::string scenario_file, ledger_file;
  auto* c_scn = app.add_subcommand("scenario", "run a protocol scenario script");
  c_scn->add_option("file", scenario_file, "scenario file")->required();
  c_scn->add_option("--ledger", ledger_file, "write the event ledger CSV here");

  std::string host = "127.0.0.1", token;
  int port = 8080;
  auto* c_serve = app.add_subcommand("serve", "run the authority service");
  c_serve->add_option("--host", host, "bind address");
  c_serve->add_option("--port", port, "port (0 = any free port)");
  c_serve->add_option("--token", token, "hospital bearer credential");

  ReconcileArgs rec;
  auto* c_rec = app.add_subcommand("reconcile", "match a scan log against the published list");
  c_rec->add_option("--log", rec.log_file, "scan log CSV")->required();
  c_rec->add_option("--published", rec.published_file, "published snapshot CSV");
  c_rec->add_option("--authority", rec.authority_url, "authority base URL, e.g. http://127.0.0.1:8080");
  c_rec->add_option("--since", rec.since, "only entries newer than this version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    resolve_config(g);
    if (c_idgen->parsed()) return cmd_idgen(g, idgen);
    if (c_cal->parsed()) return cmd_calibrate(g, calib_csv);
    if (c_life->parsed()) return cmd_lifetime(g, life);
    if (c_acc->parsed()) return cmd_accuracy(g, acc);
    if (c_scn->parsed()) return cmd_scenario(g, scenario_file, ledger_file);
    if (c_serve->parsed()) return cmd_serve(g, host, port, token);
    if (c_rec->parsed()) return cmd_reconcile(g, rec);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ScenarioParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::length_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
