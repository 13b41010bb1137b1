#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ttdbeam/channel.hpp"
#include "ttdbeam/config.hpp"
#include "ttdbeam/topology.hpp"

namespace ttdbeam {

/// Distances from the user to each delayer's sub-array: the sub-array
/// centers and the exact per-element distances within them.
struct SubarrayGeometry {
  std::vector<double> chi;     // center offsets in element counts
  std::vector<double> r_sub;   // user-to-subarray-center distances
  Eigen::VectorXd r_elem;      // exact per-element distances, length N
  double r_sub_max = 0.0;
  double r_sub_min = 0.0;
};

inline SubarrayGeometry subarray_geometry(const UserLocation& loc,
                                          const SystemConfig& cfg) {
  loc.validate();
  const int q_total = cfg.n_ttd_per_chain;
  const int n_sub = cfg.n_sub();
  const double d = cfg.spacing();
  const double r = loc.distance_m;
  const double cos_t = std::cos(loc.angle_rad);

  SubarrayGeometry geo;
  geo.chi.resize(q_total);
  geo.r_sub.resize(q_total);
  geo.r_elem = propagation_distances(loc, cfg);
  for (int q = 0; q < q_total; ++q) {
    geo.chi[q] = (q - (q_total - 1) / 2.0) * n_sub;
    const double x = geo.chi[q] * d;
    geo.r_sub[q] = std::sqrt(r * r + x * x - 2.0 * r * x * cos_t);
  }
  geo.r_sub_max = *std::max_element(geo.r_sub.begin(), geo.r_sub.end());
  geo.r_sub_min = *std::min_element(geo.r_sub.begin(), geo.r_sub.end());
  return geo;
}

/// Idealized (unbounded-range) delay profile together with the matching
/// per-element phase-shifter settings. Delays compensate each sub-array's
/// propagation advance relative to the slowest sub-array, so the smallest
/// entry is always zero; phases flatten the residual intra-sub-array
/// curvature at the carrier.
struct InfiniteDelayProfile {
  std::vector<double> t_inf;          // seconds, length Q, min is 0
  double mu = 0.0;                    // alignment offset, seconds
  std::vector<Eigen::VectorXd> psi;   // [q]: N_sub phases in cycles
};

inline InfiniteDelayProfile infinite_range_design(const SubarrayGeometry& geo,
                                                  const SystemConfig& cfg) {
  const int q_total = static_cast<int>(geo.r_sub.size());
  const int n_sub = cfg.n_sub();
  InfiniteDelayProfile prof;
  prof.mu = geo.r_sub_max / kSpeedOfLight;
  prof.t_inf.resize(q_total);
  prof.psi.resize(q_total);
  for (int q = 0; q < q_total; ++q) {
    prof.t_inf[q] = (geo.r_sub_max - geo.r_sub[q]) / kSpeedOfLight;
    prof.psi[q].resize(n_sub);
    for (int i = 0; i < n_sub; ++i) {
      // Undo the intra-sub-array excess path at the carrier so that the
      // shifter phase plus the element's response phase is flat across the
      // sub-array: response exp(-j2pi f r/c) times shifter exp(+j2pi psi).
      const double r_elem = geo.r_elem[q * n_sub + i];
      prof.psi[q][i] =
          cfg.center_freq_hz * (r_elem - geo.r_sub[q]) / kSpeedOfLight;
    }
  }
  return prof;
}

/// Unit-modulus phase-shifter vectors realizing the profile's phases.
inline std::vector<Eigen::VectorXcd> ps_from_profile(
    const InfiniteDelayProfile& prof) {
  std::vector<Eigen::VectorXcd> ps(prof.psi.size());
  for (std::size_t q = 0; q < prof.psi.size(); ++q) {
    ps[q].resize(prof.psi[q].size());
    for (Eigen::Index i = 0; i < ps[q].size(); ++i)
      ps[q][i] = std::polar(1.0, 2.0 * kPi * prof.psi[q][i]);
  }
  return ps;
}

enum class Monotonicity { kIncreasing, kDecreasing, kUnimodal };

inline std::string to_string(Monotonicity m) {
  switch (m) {
    case Monotonicity::kIncreasing: return "increasing";
    case Monotonicity::kDecreasing: return "decreasing";
    case Monotonicity::kUnimodal: return "unimodal";
  }
  return "?";
}

/// Region classification of the ideal delay profile's shape as a function
/// of user location.
struct MonotonicityRegion {
  double j_value = 0.0;   // 2 r cos(theta) / sin^2(theta), meters
  Monotonicity kind = Monotonicity::kUnimodal;
  int turning_index = 0;  // 1-based peak delayer index, set when unimodal
};

inline double j_functional(const UserLocation& loc) {
  const double s = std::sin(loc.angle_rad);
  if (s == 0.0)
    throw std::invalid_argument("j_functional: angle must be interior to (0, pi)");
  return 2.0 * loc.distance_m * std::cos(loc.angle_rad) / (s * s);
}

/// Classifies whether the ideal delays grow, shrink, or peak inside the
/// chain, using the Fresnel-based location functional. The turning index is
/// clamped to [2, Q] since it marks an adjacent-difference sign change.
inline MonotonicityRegion classify_monotonicity(const UserLocation& loc,
                                                const SystemConfig& cfg) {
  loc.validate();
  MonotonicityRegion region;
  region.j_value = j_functional(loc);
  const int q_total = cfg.n_ttd_per_chain;
  const double unit = cfg.n_sub() * cfg.spacing();
  const double threshold = (q_total - 2) * unit;
  if (region.j_value >= threshold) {
    region.kind = Monotonicity::kIncreasing;
  } else if (region.j_value <= -threshold) {
    region.kind = Monotonicity::kDecreasing;
  } else {
    region.kind = Monotonicity::kUnimodal;
    const int qc = q_total / 2 + 1 +
                   static_cast<int>(std::floor(region.j_value / (2.0 * unit)));
    region.turning_index = std::clamp(qc, 2, q_total);
  }
  return region;
}

/// Range-limited delay settings per accumulation rule. Serial rules spend
/// each delayer on the adjacent profile difference that matches their
/// direction and park it at zero otherwise; the parallel rule clips the
/// profile directly; the hybrid rule applies the forward recipe to the
/// first half of the chain and the backward recipe to the second half.
inline std::vector<double> finite_range_design(const InfiniteDelayProfile& prof,
                                               ChainRule rule, double t_max) {
  const int q_total = static_cast<int>(prof.t_inf.size());
  std::vector<double> raw(q_total, 0.0);
  auto forward_delay = [&](int q) {  // 0-based, q >= 1
    const double step = prof.t_inf[q] - prof.t_inf[q - 1];
    return step >= 0.0 ? std::min(t_max, step) : 0.0;
  };
  auto backward_delay = [&](int q) {  // 0-based, q <= Q-2
    const double step = prof.t_inf[q] - prof.t_inf[q + 1];
    return step >= 0.0 ? std::min(t_max, step) : 0.0;
  };
  switch (rule) {
    case ChainRule::kParallel:
      for (int q = 0; q < q_total; ++q)
        raw[q] = std::min(t_max, prof.t_inf[q]);
      break;
    case ChainRule::kForward:
      for (int q = 1; q < q_total; ++q) raw[q] = forward_delay(q);
      break;
    case ChainRule::kBackward:
      for (int q = 0; q < q_total - 1; ++q) raw[q] = backward_delay(q);
      break;
    case ChainRule::kHybrid: {
      const int half = q_total / 2;
      for (int q = 1; q < half; ++q) raw[q] = forward_delay(q);
      for (int q = half; q < q_total - 1; ++q) raw[q] = backward_delay(q);
      break;
    }
  }
  return raw;
}

/// Beamformed aperture response toward the user at frequency f for the
/// given phase-shifter settings and cumulative delays. Bounded by N, with
/// equality only under perfect phase alignment.
inline double array_gain(double f, const SubarrayGeometry& geo,
                         const std::vector<Eigen::VectorXcd>& ps,
                         const std::vector<double>& cumulative,
                         const SystemConfig& cfg) {
  const int q_total = cfg.n_ttd_per_chain;
  const int n_sub = cfg.n_sub();
  const double scale = -2.0 * kPi * f / kSpeedOfLight;
  cplx acc(0.0, 0.0);
  for (int q = 0; q < q_total; ++q) {
    cplx sub(0.0, 0.0);
    for (int i = 0; i < n_sub; ++i)
      sub += std::polar(1.0, scale * geo.r_elem[q * n_sub + i]) * ps[q][i];
    acc += sub * std::polar(1.0, -2.0 * kPi * f * cumulative[q]);
  }
  return std::abs(acc);
}

/// Rate of a single-chain link given the LoS power gain and the achieved
/// aperture gain; the digital scalar runs at full power.
inline double rate_from_gain(double beta2, double gain,
                             const SystemConfig& cfg) {
  const double snr = beta2 * cfg.transmit_power_w * gain * gain /
                     (cfg.noise_power() * cfg.n_antennas);
  return std::log2(1.0 + snr);
}

/// Closed-form single-user design bundle for one chain.
struct SingleUserDesign {
  SubarrayGeometry geometry;
  InfiniteDelayProfile profile;
  MonotonicityRegion region;
  std::vector<Eigen::VectorXcd> ps;
  std::vector<double> raw_delays;
  std::vector<double> cumulative;
};

inline SingleUserDesign design_single_user(const UserLocation& loc,
                                           const SystemConfig& cfg,
                                           TtdConfig config, double t_max) {
  if (config == TtdConfig::kHfb)
    throw std::invalid_argument(
        "design_single_user: hfb applies to multi-chain systems only");
  validate_topology(config, cfg.n_ttd_per_chain, 1);
  SingleUserDesign design;
  design.geometry = subarray_geometry(loc, cfg);
  design.profile = infinite_range_design(design.geometry, cfg);
  design.region = classify_monotonicity(loc, cfg);
  design.ps = ps_from_profile(design.profile);
  const ChainRule rule = chain_rule(config, 0, 1);
  design.raw_delays = finite_range_design(design.profile, rule, t_max);
  design.cumulative = cumulative_delays(design.raw_delays, rule);
  return design;
}

/// Same bundle but with the ideal delays applied directly (no range limit).
inline SingleUserDesign design_single_user_unbounded(const UserLocation& loc,
                                                     const SystemConfig& cfg) {
  SingleUserDesign design;
  design.geometry = subarray_geometry(loc, cfg);
  design.profile = infinite_range_design(design.geometry, cfg);
  design.region = classify_monotonicity(loc, cfg);
  design.ps = ps_from_profile(design.profile);
  design.raw_delays = design.profile.t_inf;
  design.cumulative = design.profile.t_inf;
  return design;
}

/// Per-subcarrier rates over the LoS path for a designed single-user link.
struct SingleUserRates {
  std::vector<double> per_subcarrier;   // bits/s/Hz each
  std::vector<double> gain_fraction;    // achieved gain / N per subcarrier
  double aggregate = 0.0;               // cyclic-prefix-weighted sum
  double min_gain_fraction = 1.0;
};

inline SingleUserRates single_user_rate(const UserLocation& loc,
                                        const SingleUserDesign& design,
                                        const SystemConfig& cfg) {
  const auto freqs = subcarrier_frequencies(cfg);
  SingleUserRates out;
  out.per_subcarrier.reserve(freqs.size());
  out.gain_fraction.reserve(freqs.size());
  const double amp_gain = cfg.tx_gain * cfg.rx_gain;
  for (double f : freqs) {
    const double beta2 = amp_gain / pathloss(f, loc.distance_m, cfg);
    const double gain =
        array_gain(f, design.geometry, design.ps, design.cumulative, cfg);
    out.per_subcarrier.push_back(rate_from_gain(beta2, gain, cfg));
    out.gain_fraction.push_back(gain / cfg.n_antennas);
    out.min_gain_fraction = std::min(out.min_gain_fraction, gain / cfg.n_antennas);
    out.aggregate += out.per_subcarrier.back();
  }
  out.aggregate /= (cfg.n_subcarriers + cfg.cp_length);
  return out;
}

}  // namespace ttdbeam
