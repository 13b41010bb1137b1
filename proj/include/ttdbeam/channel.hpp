#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <vector>

#include "ttdbeam/config.hpp"
#include "ttdbeam/util.hpp"

namespace ttdbeam {

/// Exact spherical-wave distances from every array element to a point
/// target. Element n sits at offset (n-1-(N-1)/2)*d along the array axis.
inline Eigen::VectorXd propagation_distances(const UserLocation& loc,
                                             const SystemConfig& cfg) {
  if (loc.distance_m <= 0.0)
    throw std::invalid_argument("propagation_distances: distance must be > 0");
  const int n = cfg.n_antennas;
  const double d = cfg.spacing();
  const double r = loc.distance_m;
  const double cos_t = std::cos(loc.angle_rad);
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    const double delta = i - (n - 1) / 2.0;
    out[i] = std::sqrt(r * r + delta * delta * d * d - 2.0 * r * delta * d * cos_t);
  }
  return out;
}

/// Near-field array response: unit-modulus phase profile of a spherical
/// wavefront observed across the aperture at frequency f.
inline Eigen::VectorXcd array_response(double f, const UserLocation& loc,
                                       const SystemConfig& cfg) {
  if (f <= 0.0) throw std::invalid_argument("array_response: f must be > 0");
  const Eigen::VectorXd dist = propagation_distances(loc, cfg);
  const double scale = -2.0 * kPi * f / kSpeedOfLight;
  Eigen::VectorXcd out(dist.size());
  for (Eigen::Index i = 0; i < dist.size(); ++i)
    out[i] = std::polar(1.0, scale * dist[i]);
  return out;
}

/// Spreading loss plus exponential medium absorption, as a linear power
/// factor (values > 1 mean attenuation).
inline double pathloss(double f, double r, const SystemConfig& cfg) {
  if (f <= 0.0 || r <= 0.0)
    throw std::invalid_argument("pathloss: f and r must be > 0");
  const double spread = 4.0 * kPi * f * r / kSpeedOfLight;
  return spread * spread * std::exp(cfg.absorption_coeff * r);
}

/// Wideband near-field channel realization: one length-N vector per
/// (subcarrier, user), LoS plus scattered components, with the gain
/// metadata retained for diagnostics.
struct ChannelRealization {
  int n_subcarriers = 0;
  int n_users = 0;
  std::vector<Eigen::MatrixXcd> h;  // [m]: N x K, column k is user k
  std::vector<std::vector<double>> los_gain;  // [m][k]: |beta|^2
  std::vector<UserLocation> users;
  std::vector<std::vector<UserLocation>> scatterers;        // [k][l]
  std::vector<std::vector<double>> scatter_path_m;          // [k][l]: total distance

  const Eigen::MatrixXcd& at(int m) const { return h[m]; }
};

inline double scatter_total_distance(const UserLocation& scat,
                                     const UserLocation& user) {
  const double xs = scat.distance_m * std::sin(scat.angle_rad);
  const double ys = scat.distance_m * std::cos(scat.angle_rad);
  const double xu = user.distance_m * std::sin(user.angle_rad);
  const double yu = user.distance_m * std::cos(user.angle_rad);
  const double hop = std::hypot(xs - xu, ys - yu);
  return scat.distance_m + hop;
}

/// Draws a channel for the given user and scatterer geometry. LoS gains are
/// real positive (the carrier phase lives in the array response); scattered
/// components carry independent uniform phases. Deterministic per seed.
inline ChannelRealization generate_channel(
    const std::vector<UserLocation>& users,
    const std::vector<std::vector<UserLocation>>& scatterers,
    const SystemConfig& cfg, std::uint64_t seed) {
  const int k_total = static_cast<int>(users.size());
  if (static_cast<int>(scatterers.size()) != k_total)
    throw std::invalid_argument("generate_channel: scatterer list size mismatch");
  for (const auto& s : scatterers)
    if (static_cast<int>(s.size()) != cfg.n_scatterers())
      throw std::invalid_argument(
          "generate_channel: per-user scatterer count must equal the "
          "configured path count");

  const auto freqs = subcarrier_frequencies(cfg);
  const int m_total = cfg.n_subcarriers;
  const double amp_gain = cfg.tx_gain * cfg.rx_gain;

  ChannelRealization chan;
  chan.n_subcarriers = m_total;
  chan.n_users = k_total;
  chan.users = users;
  chan.scatterers = scatterers;
  chan.h.assign(m_total, Eigen::MatrixXcd::Zero(cfg.n_antennas, k_total));
  chan.los_gain.assign(m_total, std::vector<double>(k_total, 0.0));
  chan.scatter_path_m.assign(k_total, {});

  Rng rng(seed);
  for (int k = 0; k < k_total; ++k) {
    users[k].validate();
    chan.scatter_path_m[k].reserve(scatterers[k].size());
    for (const auto& s : scatterers[k])
      chan.scatter_path_m[k].push_back(scatter_total_distance(s, users[k]));

    for (int m = 0; m < m_total; ++m) {
      const double f = freqs[m];
      const double beta2 = amp_gain / pathloss(f, users[k].distance_m, cfg);
      chan.los_gain[m][k] = beta2;
      Eigen::VectorXcd col =
          std::sqrt(beta2) * array_response(f, users[k], cfg).conjugate();
      for (std::size_t l = 0; l < scatterers[k].size(); ++l) {
        const double path = chan.scatter_path_m[k][l];
        const double g2 = cfg.scatter_loss * amp_gain / pathloss(f, path, cfg);
        const cplx gain = std::polar(std::sqrt(g2), rng.angle());
        col += gain * array_response(f, scatterers[k][l], cfg).conjugate();
      }
      chan.h[m].col(k) = col;
    }
  }
  return chan;
}

/// Annulus in which Monte-Carlo users and scatterers are drawn.
struct PlacementRing {
  double r_min_m = 5.0;
  double r_max_m = 15.0;
  double angle_min_rad = deg_to_rad(5.0);
  double angle_max_rad = deg_to_rad(175.0);

  UserLocation draw(Rng& rng) const {
    return {rng.uniform(r_min_m, r_max_m),
            rng.uniform(angle_min_rad, angle_max_rad)};
  }
};

/// Random users plus per-user scatterers in the same annulus.
inline ChannelRealization random_channel(const SystemConfig& cfg, int n_users,
                                         const PlacementRing& ring,
                                         std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x706c6163656dULL));
  std::vector<UserLocation> users;
  std::vector<std::vector<UserLocation>> scatterers;
  for (int k = 0; k < n_users; ++k) {
    users.push_back(ring.draw(rng));
    std::vector<UserLocation> per_user;
    for (int l = 0; l < cfg.n_scatterers(); ++l) per_user.push_back(ring.draw(rng));
    scatterers.push_back(std::move(per_user));
  }
  return generate_channel(users, scatterers, cfg, mix_seed(seed, 0x6368616eULL));
}

}  // namespace ttdbeam
