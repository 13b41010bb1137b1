#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "ttdbeam/util.hpp"

namespace ttdbeam {

/// How the delayers of one RF chain feed each other. Parallel delayers are
/// independent; serial chains accumulate, forward from the first delayer or
/// backward from the last; the hybrid layout splits the chain into a forward
/// and a backward half. The HFB layout assigns whole chains alternately to
/// the forward and backward serial rules.
enum class TtdConfig { kParallel, kSerialForward, kSerialBackward, kHybrid, kHfb };

/// Accumulation rule effective for a single chain.
enum class ChainRule { kParallel, kForward, kBackward, kHybrid };

inline std::string to_string(TtdConfig c) {
  switch (c) {
    case TtdConfig::kParallel: return "parallel";
    case TtdConfig::kSerialForward: return "serial_f";
    case TtdConfig::kSerialBackward: return "serial_b";
    case TtdConfig::kHybrid: return "hybrid";
    case TtdConfig::kHfb: return "hfb";
  }
  return "?";
}

inline bool parse_ttd_config(const std::string& tag, TtdConfig& out) {
  if (tag == "parallel") out = TtdConfig::kParallel;
  else if (tag == "serial_f") out = TtdConfig::kSerialForward;
  else if (tag == "serial_b") out = TtdConfig::kSerialBackward;
  else if (tag == "hybrid") out = TtdConfig::kHybrid;
  else if (tag == "hfb") out = TtdConfig::kHfb;
  else return false;
  return true;
}

inline void validate_topology(TtdConfig c, int q, int n_rf) {
  if (c == TtdConfig::kHybrid && q % 2 != 0)
    throw std::invalid_argument("hybrid layout requires an even delayer count");
  if (c == TtdConfig::kHfb && n_rf % 2 != 0)
    throw std::invalid_argument("hfb layout requires an even RF chain count");
}

/// Rule governing chain `n` (0-based) out of `n_rf`.
inline ChainRule chain_rule(TtdConfig c, int n, int n_rf) {
  switch (c) {
    case TtdConfig::kParallel: return ChainRule::kParallel;
    case TtdConfig::kSerialForward: return ChainRule::kForward;
    case TtdConfig::kSerialBackward: return ChainRule::kBackward;
    case TtdConfig::kHybrid: return ChainRule::kHybrid;
    case TtdConfig::kHfb:
      return n < n_rf / 2 ? ChainRule::kForward : ChainRule::kBackward;
  }
  return ChainRule::kParallel;
}

/// Raw per-delayer settings for one chain together with the hardware range.
struct DelayVector {
  std::vector<double> raw;  // seconds, one entry per delayer
  double t_max = 0.0;       // seconds; raw entries must lie in [0, t_max]

  void validate() const {
    for (double t : raw)
      if (!(t >= 0.0) || t > t_max * (1.0 + 1e-12))
        throw std::invalid_argument("DelayVector: raw delay outside [0, t_max]");
  }
};

/// Output delay of each delayer after accumulation along the chain.
inline std::vector<double> cumulative_delays(const std::vector<double>& raw,
                                             ChainRule rule) {
  const int q_total = static_cast<int>(raw.size());
  std::vector<double> out(q_total, 0.0);
  switch (rule) {
    case ChainRule::kParallel:
      out = raw;
      break;
    case ChainRule::kForward: {
      double acc = 0.0;
      for (int q = 0; q < q_total; ++q) out[q] = (acc += raw[q]);
      break;
    }
    case ChainRule::kBackward: {
      double acc = 0.0;
      for (int q = q_total - 1; q >= 0; --q) out[q] = (acc += raw[q]);
      break;
    }
    case ChainRule::kHybrid: {
      if (q_total % 2 != 0)
        throw std::invalid_argument("hybrid layout requires an even delayer count");
      const int half = q_total / 2;
      double acc = 0.0;
      for (int q = 0; q < half; ++q) out[q] = (acc += raw[q]);
      acc = 0.0;
      for (int q = q_total - 1; q >= half; --q) out[q] = (acc += raw[q]);
      break;
    }
  }
  return out;
}

inline std::vector<double> cumulative_delays(const std::vector<double>& raw,
                                             TtdConfig c, int chain, int n_rf) {
  validate_topology(c, static_cast<int>(raw.size()), n_rf);
  return cumulative_delays(raw, chain_rule(c, chain, n_rf));
}

/// Frequency-domain response of one chain's delayers: unit-modulus phasors
/// exp(-j 2 pi f t) for each cumulative delay.
inline Eigen::VectorXcd ttd_phase_vector(const std::vector<double>& cumulative,
                                         double f) {
  Eigen::VectorXcd out(static_cast<Eigen::Index>(cumulative.size()));
  for (Eigen::Index q = 0; q < out.size(); ++q)
    out[q] = std::polar(1.0, -2.0 * kPi * f * cumulative[q]);
  return out;
}

/// Block-diagonal delayer response for all chains: column n carries the Q
/// phasors of chain n in rows [nQ, (n+1)Q); all other entries are zero.
inline Eigen::MatrixXcd ttd_phase_matrix(
    const std::vector<std::vector<double>>& cumulative_per_chain, double f) {
  const int n_rf = static_cast<int>(cumulative_per_chain.size());
  const int q_total =
      n_rf > 0 ? static_cast<int>(cumulative_per_chain[0].size()) : 0;
  Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(
      static_cast<Eigen::Index>(q_total) * n_rf, n_rf);
  for (int n = 0; n < n_rf; ++n) {
    if (static_cast<int>(cumulative_per_chain[n].size()) != q_total)
      throw std::invalid_argument("ttd_phase_matrix: ragged delay table");
    t.block(static_cast<Eigen::Index>(n) * q_total, n, q_total, 1) =
        ttd_phase_vector(cumulative_per_chain[n], f);
  }
  return t;
}

}  // namespace ttdbeam
