#pragma once

// CSV file formats. Readers validate the header line and report the
// offending line number on malformed rows.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "luxtrace/bytes.hpp"
#include "luxtrace/energy.hpp"
#include "luxtrace/identity.hpp"
#include "luxtrace/radio.hpp"

namespace luxtrace {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto comma = line.find(',', start);
    out.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double to_double(const std::string& s, std::size_t line) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("line " + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

/// Formats with up to 17 significant digits, shortest that round-trips.
inline std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::stod(buf) == v) break;
  }
  return buf;
}

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

/// Iterates data rows after checking the header; fn(fields, line_no).
template <class Fn>
void for_each_row(std::istream& in, std::string_view header, std::size_t ncols, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (!saw_header) {
      if (t != header)
        throw FormatError("line " + std::to_string(line_no) + ": expected header '" + std::string(header) + "'");
      saw_header = true;
      continue;
    }
    auto fields = split(t);
    if (fields.size() != ncols)
      throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(ncols) + " fields, got " +
                        std::to_string(fields.size()));
    fn(fields, line_no);
  }
  if (!saw_header) throw FormatError("missing header '" + std::string(header) + "'");
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return in;
}

}  // namespace csv

// --- lighting profile: time_of_day_s,lux -----------------------------------

inline LightingProfile read_lighting_profile(std::istream& in) {
  std::vector<LightingProfile::Sample> samples;
  csv::for_each_row(in, "time_of_day_s,lux", 2, [&](const auto& f, std::size_t line) {
    samples.push_back({csv::to_double(f[0], line), csv::to_double(f[1], line)});
  });
  try {
    return LightingProfile(std::move(samples));
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
}

inline LightingProfile read_lighting_profile_file(const std::filesystem::path& p) {
  auto in = csv::open_in(p);
  return read_lighting_profile(in);
}

// --- calibration: tx_dbm,distance_m,rss_dbm --------------------------------

inline std::vector<RssMeasurement> read_calibration(std::istream& in) {
  std::vector<RssMeasurement> out;
  csv::for_each_row(in, "tx_dbm,distance_m,rss_dbm", 3, [&](const auto& f, std::size_t line) {
    out.push_back({static_cast<int>(csv::to_double(f[0], line)), csv::to_double(f[1], line),
                   csv::to_double(f[2], line)});
  });
  return out;
}

// --- ephemeral ID test vectors: hex(preimage),hex(id), no header -------------

struct IdVector {
  std::array<std::uint8_t, kPreimageSize> preimage{};
  EphemeralId id;
};

inline std::string format_id_vector(const PacketPreimage& p) {
  auto raw = p.serialize();
  return to_hex(raw) + "," + ephemeral_id(p).to_hex();
}

inline std::vector<IdVector> read_id_vectors(std::istream& in) {
  std::vector<IdVector> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = csv::trim(line);
    if (t.empty()) continue;
    auto f = csv::split(t);
    if (f.size() != 2) throw FormatError("line " + std::to_string(line_no) + ": expected 2 fields");
    try {
      out.push_back({fixed_from_hex<kPreimageSize>(f[0]), EphemeralId::from_hex(f[1])});
    } catch (const std::invalid_argument& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace luxtrace
