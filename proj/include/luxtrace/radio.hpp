#pragma once

// Log-distance path loss with Gaussian shadowing, its inverse, and a
// least-squares calibration from measured (tx, distance, rss) triples.

#include <cmath>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

namespace luxtrace {

/// Transmit power setting in dBm.
struct TxPower {
  int dbm = -8;
  friend auto operator<=>(const TxPower&, const TxPower&) = default;
};

inline constexpr TxPower kDefaultTx{-8};

struct RadioParams {
  double rss_at_1m_dbm = -60.0;  // at the reference setting (offset 0)
  double path_loss_exponent = 2.0;
  double shadowing_sigma_db = 2.0;
  double min_distance_m = 0.1;
  // TX setting (dBm) -> offset (dB) added to rss_at_1m_dbm.
  std::map<int, double> tx_offset_db{{-20, -12.0}, {-14, -6.0}, {-8, 0.0}, {-2, 6.0}, {4, 12.0}};
};

/// Immutable after construction. Construction validates the parameters,
/// including the 5-7 dB spacing between adjacent TX settings.
class RadioModel {
 public:
  RadioModel() : RadioModel(RadioParams{}) {}

  explicit RadioModel(RadioParams params) : p_(std::move(params)) {
    if (!(p_.path_loss_exponent > 0.0))
      throw std::invalid_argument("path_loss_exponent must be > 0");
    if (!(p_.shadowing_sigma_db >= 0.0))
      throw std::invalid_argument("shadowing_sigma_db must be >= 0");
    if (!(p_.min_distance_m > 0.0)) throw std::invalid_argument("min_distance_m must be > 0");
    if (p_.tx_offset_db.empty()) throw std::invalid_argument("tx_offset_table is empty");
    const double* prev = nullptr;
    for (const auto& [dbm, offset] : p_.tx_offset_db) {
      if (prev) {
        double gap = offset - *prev;
        if (gap < 5.0 || gap > 7.0)
          throw std::invalid_argument("adjacent tx offsets must differ by 5-7 dB (setting " +
                                      std::to_string(dbm) + " dBm has gap " +
                                      std::to_string(gap) + ")");
      }
      prev = &offset;
    }
  }

  const RadioParams& params() const { return p_; }

  bool supports(TxPower tx) const { return p_.tx_offset_db.count(tx.dbm) != 0; }

  double rss_at_1m(TxPower tx) const {
    auto it = p_.tx_offset_db.find(tx.dbm);
    if (it == p_.tx_offset_db.end())
      throw std::invalid_argument("tx power " + std::to_string(tx.dbm) +
                                  " dBm is not a configured setting");
    return p_.rss_at_1m_dbm + it->second;
  }

  double mean_rss(TxPower tx, double distance_m) const {
    return rss_at_1m(tx) -
           10.0 * p_.path_loss_exponent * std::log10(std::max(distance_m, p_.min_distance_m));
  }

  template <class Rng>
  double sample_rss(TxPower tx, double distance_m, Rng& rng) const {
    double mean = mean_rss(tx, distance_m);
    if (p_.shadowing_sigma_db == 0.0) return mean;
    std::normal_distribution<double> noise(0.0, p_.shadowing_sigma_db);
    return mean + noise(rng);
  }

  /// Inverse of mean_rss, clamped below at min_distance_m.
  double distance_from_rss(TxPower tx, double rss_dbm) const {
    double d = std::pow(10.0, (rss_at_1m(tx) - rss_dbm) / (10.0 * p_.path_loss_exponent));
    return std::max(d, p_.min_distance_m);
  }

 private:
  RadioParams p_;
};

inline double mean_rss(const RadioModel& m, TxPower tx, double d) { return m.mean_rss(tx, d); }
inline double distance_from_rss(const RadioModel& m, TxPower tx, double rss) {
  return m.distance_from_rss(tx, rss);
}
template <class Rng>
double sample_rss(const RadioModel& m, TxPower tx, double d, Rng& rng) {
  return m.sample_rss(tx, d, rng);
}

struct RssMeasurement {
  int tx_dbm = -8;
  double distance_m = 1.0;
  double rss_dbm = -60.0;
};

struct CalibrationFit {
  RadioModel model;
  double rms_residual_db = 0.0;
};

/// Fits (rss_at_1m, path loss exponent) by linear least squares on
/// rss - offset(tx) = a - eta * 10 log10(d). Other parameters are kept from `base`.
inline CalibrationFit calibrate(const RadioModel& base, std::span<const RssMeasurement> samples) {
  const auto& p = base.params();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (const auto& s : samples) {
    if (!(s.distance_m > 0.0))
      throw std::invalid_argument("calibration distance must be > 0");
    double x = -10.0 * std::log10(std::max(s.distance_m, p.min_distance_m));
    double y = s.rss_dbm - (base.rss_at_1m({s.tx_dbm}) - p.rss_at_1m_dbm);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
    ++n;
  }
  if (n < 2) throw std::invalid_argument("calibration needs at least two measurements");
  double denom = static_cast<double>(n) * sxx - sx * sx;
  if (std::abs(denom) < 1e-12)
    throw std::invalid_argument("calibration needs at least two distinct distances");
  double eta = (static_cast<double>(n) * sxy - sx * sy) / denom;
  double a = (sy - eta * sx) / static_cast<double>(n);

  RadioParams fitted = p;
  fitted.rss_at_1m_dbm = a;
  fitted.path_loss_exponent = eta;
  RadioModel model(fitted);

  double ss = 0;
  for (const auto& s : samples) {
    double r = s.rss_dbm - model.mean_rss({s.tx_dbm}, s.distance_m);
    ss += r * r;
  }
  return {std::move(model), std::sqrt(ss / static_cast<double>(n))};
}

}  // namespace luxtrace
