#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ttdbeam/topology.hpp"

namespace ttdbeam {

/// Power-splitting fractions along one serial run of delayers. `nu[q]` is
/// the fraction tapped off for delayer q+1 (the final tap is always 1);
/// `nu_tilde[q]` is the resulting share of the input power. `eta` is the
/// per-stage insertion loss (delayer times splitter) the plan equalizes.
struct SplitterPlan {
  std::vector<double> nu;
  std::vector<double> nu_tilde;
  double eta = 1.0;
};

/// Split fractions giving every delayer the same output power when the
/// stages are lossless: 1/Q of the input each.
inline SplitterPlan splitter_equal_power(int q_total) {
  if (q_total < 1) throw std::invalid_argument("splitter: Q must be >= 1");
  SplitterPlan plan;
  plan.eta = 1.0;
  plan.nu.resize(q_total);
  plan.nu_tilde.assign(q_total, 1.0 / q_total);
  for (int q = 1; q <= q_total; ++q) plan.nu[q - 1] = 1.0 / (q_total - q + 1);
  return plan;
}

/// Split fractions that keep every delayer's output power equal when each
/// stage attenuates by eta >= 1. Falls back to the lossless fractions in the
/// eta -> 1 limit, where the closed forms become 0/0.
inline SplitterPlan splitter_equalized(int q_total, double eta) {
  if (q_total < 1) throw std::invalid_argument("splitter: Q must be >= 1");
  if (eta < 1.0) throw std::invalid_argument("splitter: eta must be >= 1");
  if (eta == 1.0) return splitter_equal_power(q_total);
  SplitterPlan plan;
  plan.eta = eta;
  plan.nu.resize(q_total);
  plan.nu_tilde.resize(q_total);
  const double denom = 1.0 - std::pow(eta, q_total);
  for (int q = 1; q <= q_total; ++q) {
    plan.nu[q - 1] = (1.0 - eta) / (1.0 - std::pow(eta, q_total - q + 1));
    plan.nu_tilde[q - 1] =
        (std::pow(eta, q - 1) - std::pow(eta, q)) / denom;
  }
  return plan;
}

/// Geometric-series sum (1 - eta^n) / ((1 - eta) n), continuous at eta = 1.
inline double loss_cascade_factor(double eta, int n) {
  if (eta == 1.0) return 1.0;
  return (1.0 - std::pow(eta, n)) / ((1.0 - eta) * n);
}

/// Effective per-delayer insertion loss after equalization. Serial runs
/// (including each chain of the HFB layout) accumulate all Q stages; the
/// hybrid layout accumulates only half a chain per group; parallel delayers
/// see a single stage.
inline double effective_insertion_loss(int q_total, double eta, TtdConfig c) {
  if (eta < 1.0)
    throw std::invalid_argument("effective_insertion_loss: eta must be >= 1");
  switch (c) {
    case TtdConfig::kParallel:
      return eta;
    case TtdConfig::kSerialForward:
    case TtdConfig::kSerialBackward:
    case TtdConfig::kHfb:
      return eta * loss_cascade_factor(eta, q_total);
    case TtdConfig::kHybrid:
      if (q_total % 2 != 0)
        throw std::invalid_argument("hybrid layout requires an even delayer count");
      return eta * loss_cascade_factor(eta, q_total / 2);
  }
  return eta;
}

/// Number of lossy stages the signal crosses to reach delayer q (0-based)
/// under the given accumulation rule.
inline int stage_count(ChainRule rule, int q, int q_total) {
  switch (rule) {
    case ChainRule::kParallel: return 1;
    case ChainRule::kForward: return q + 1;
    case ChainRule::kBackward: return q_total - q;
    case ChainRule::kHybrid: {
      const int half = q_total / 2;
      return q < half ? q + 1 : q_total - q;
    }
  }
  return 1;
}

/// Per-branch amplitude weights relative to an equal-power parallel feed,
/// used when rating a design under insertion loss. Equalized plans yield a
/// uniform weight sqrt(eta / eta_effective); the lossless case is all ones.
///
/// The non-equalized rating compares the equal-split plan against the
/// equalized one at the same delivered power: the cascade taper
/// eta^(-stages/2) is rescaled so the mean branch power matches the
/// equalized plan's, isolating the misallocation penalty of skipping
/// equalization from the overall power bookkeeping.
inline std::vector<double> branch_amplitude_weights(ChainRule rule, int q_total,
                                                    double eta, bool equalized) {
  if (eta < 1.0)
    throw std::invalid_argument("branch_amplitude_weights: eta must be >= 1");
  std::vector<double> w(q_total, 1.0);
  if (eta == 1.0) return w;
  int run = q_total;
  if (rule == ChainRule::kParallel) run = 1;
  if (rule == ChainRule::kHybrid) run = q_total / 2;
  const double eff = eta * loss_cascade_factor(eta, run);
  if (equalized) {
    w.assign(q_total, std::sqrt(eta / eff));
  } else {
    double mean_square = 0.0;
    for (int q = 0; q < q_total; ++q) {
      w[q] = std::pow(eta, -0.5 * stage_count(rule, q, q_total));
      mean_square += w[q] * w[q] / q_total;
    }
    const double scale = std::sqrt(eta / eff / mean_square);
    for (double& v : w) v *= scale;
  }
  return w;
}

}  // namespace ttdbeam
