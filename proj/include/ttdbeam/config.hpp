#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "ttdbeam/util.hpp"

namespace ttdbeam {

/// Static description of the transmitter: array geometry, OFDM grid,
/// power budget, and channel statistics. All fields are linear SI values;
/// dB conversions happen at the I/O boundary.
struct SystemConfig {
  int n_antennas = 512;        // N, uniform linear array
  int n_rf = 1;                // RF chains
  int n_ttd_per_chain = 32;    // Q, delayers per chain
  int n_subcarriers = 10;      // M
  int cp_length = 4;           // OFDM cyclic prefix length
  double center_freq_hz = 100e9;
  double bandwidth_hz = 10e9;
  double transmit_power_w = dbm_to_watts(20.0);
  double noise_density_w_hz = dbm_to_watts(-174.0);
  double antenna_spacing_m = 0.0;  // 0 -> half wavelength at the carrier
  double tx_gain = db_to_linear(15.0);
  double rx_gain = db_to_linear(5.0);
  double absorption_coeff = 0.0;  // medium absorption, 1/m
  int n_paths = 4;                // channel paths per user
  bool paths_include_los = true;  // if true, one path is the LoS component
  double scatter_loss = db_to_linear(-15.0);

  int n_sub() const { return n_antennas / n_ttd_per_chain; }
  double spacing() const {
    return antenna_spacing_m > 0.0 ? antenna_spacing_m
                                   : kSpeedOfLight / (2.0 * center_freq_hz);
  }
  /// Per-subcarrier noise power: the density integrated over one
  /// subcarrier's bandwidth.
  double noise_power() const {
    return noise_density_w_hz * bandwidth_hz / n_subcarriers;
  }
  int n_scatterers() const {
    return paths_include_los ? n_paths - 1 : n_paths;
  }

  void validate() const {
    auto fail = [](const std::string& what) {
      throw std::invalid_argument("SystemConfig: " + what);
    };
    if (n_antennas <= 0) fail("n_antennas must be positive");
    if (n_rf <= 0) fail("n_rf must be positive");
    if (n_ttd_per_chain <= 0) fail("n_ttd_per_chain must be positive");
    if (n_antennas % n_ttd_per_chain != 0)
      fail("n_antennas must be divisible by n_ttd_per_chain");
    if (n_ttd_per_chain % 2 != 0) fail("n_ttd_per_chain must be even");
    if (n_subcarriers < 1) fail("n_subcarriers must be >= 1");
    if (cp_length < 0) fail("cp_length must be >= 0");
    if (bandwidth_hz <= 0.0) fail("bandwidth_hz must be positive");
    if (center_freq_hz <= bandwidth_hz / 2.0)
      fail("center_freq_hz must exceed half the bandwidth");
    if (transmit_power_w <= 0.0) fail("transmit_power_w must be positive");
    if (noise_density_w_hz <= 0.0) fail("noise_density_w_hz must be positive");
    if (antenna_spacing_m < 0.0) fail("antenna_spacing_m must be >= 0");
    if (absorption_coeff < 0.0) fail("absorption_coeff must be >= 0");
    if (n_paths < (paths_include_los ? 1 : 0)) fail("n_paths too small");
    if (scatter_loss <= 0.0) fail("scatter_loss must be positive");
  }
};

/// Polar user position relative to the array center. The angle is measured
/// against the array axis and must lie strictly inside (0, pi).
struct UserLocation {
  double distance_m = 10.0;
  double angle_rad = kPi / 2.0;

  void validate() const {
    if (distance_m <= 0.0)
      throw std::invalid_argument("UserLocation: distance must be positive");
    if (!(angle_rad > 0.0 && angle_rad < kPi))
      throw std::invalid_argument("UserLocation: angle must be in (0, pi)");
  }
};

/// OFDM subcarrier frequencies, symmetric about the carrier with step B/M.
inline std::vector<double> subcarrier_frequencies(const SystemConfig& cfg) {
  std::vector<double> f(cfg.n_subcarriers);
  const int m_total = cfg.n_subcarriers;
  for (int m = 1; m <= m_total; ++m) {
    f[m - 1] = cfg.center_freq_hz +
               cfg.bandwidth_hz * (2.0 * m - 1.0 - m_total) / (2.0 * m_total);
  }
  return f;
}

}  // namespace ttdbeam
