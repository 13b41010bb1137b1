#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ttdbeam/channel.hpp"
#include "ttdbeam/config.hpp"
#include "ttdbeam/solver.hpp"
#include "ttdbeam/splitter.hpp"

namespace ttdbeam {

/// Analog-stage insertion loss to account for when rating a design. The
/// loss is the combined delayer-plus-splitter attenuation per stage; with
/// `equalized` the splitter plan keeps all branch powers equal, otherwise
/// the equal-split plan is assumed and later branches fade.
struct InsertionSpec {
  double eta = 1.0;  // linear, >= 1
  bool equalized = true;
};

struct EvaluationReport {
  Eigen::MatrixXd rates;              // M x K, bits/s/Hz
  double spectral_efficiency = 0.0;   // cyclic-prefix-weighted aggregate
  double power_derate = 1.0;          // mean branch power loss vs parallel
  std::string scheme;
  bool converged = true;
};

namespace detail {

/// Effective analog matrix with per-branch insertion-loss weights applied.
inline Eigen::MatrixXcd lossy_analog_matrix(const BeamformerSet& bf, double f,
                                            const SystemConfig& cfg,
                                            const InsertionSpec& ins) {
  Eigen::MatrixXcd w = bf.analog_matrix(f, cfg);
  if (ins.eta == 1.0) return w;
  const int n_sub = cfg.n_sub();
  for (int n = 0; n < bf.n_chains(); ++n) {
    const auto weights = branch_amplitude_weights(
        chain_rule(bf.config, n, bf.n_chains()), cfg.n_ttd_per_chain, ins.eta,
        ins.equalized);
    for (int q = 0; q < cfg.n_ttd_per_chain; ++q)
      w.block(static_cast<Eigen::Index>(q) * n_sub, n, n_sub, 1) *= weights[q];
  }
  return w;
}

}  // namespace detail

/// Achieved rates of a beamformer set on a channel, optionally derated by
/// the configuration's insertion loss. Losses scale the radiated signal
/// only; beamforming design itself stays loss-agnostic.
inline EvaluationReport spectral_efficiency(const BeamformerSet& bf,
                                            const ChannelRealization& chan,
                                            const SystemConfig& cfg,
                                            const InsertionSpec& ins = {}) {
  const auto freqs = subcarrier_frequencies(cfg);
  const int m_total = cfg.n_subcarriers;
  const double sigma2 = cfg.noise_power();

  EvaluationReport report;
  report.rates.resize(m_total, chan.n_users);
  for (int m = 0; m < m_total; ++m) {
    const Eigen::MatrixXcd w =
        detail::lossy_analog_matrix(bf, freqs[m], cfg, ins);
    report.rates.row(m) =
        rate_plain(chan.h[m], w * bf.digital[m], sigma2).transpose();
  }
  report.spectral_efficiency = report.rates.sum() / (m_total + cfg.cp_length);
  if (ins.eta > 1.0)
    report.power_derate =
        effective_insertion_loss(cfg.n_ttd_per_chain, ins.eta, bf.config) /
        ins.eta;
  return report;
}

/// Upper bound: unconstrained per-subcarrier precoding.
inline EvaluationReport benchmark_full_digital(const ChannelRealization& chan,
                                               const SystemConfig& cfg) {
  const auto fd = full_digital_solve(chan, cfg);
  EvaluationReport report;
  report.rates = fd.rates;
  report.spectral_efficiency = fd.spectral_efficiency;
  report.scheme = "full_digital";
  return report;
}

/// Delay range that lets parallel delayers realize any ideal profile for
/// any user location: the full-aperture propagation spread.
inline double unbounded_delay_emulation(const SystemConfig& cfg) {
  return (cfg.n_antennas - cfg.n_sub()) * cfg.spacing() / kSpeedOfLight;
}

/// Effectively infinite-range delayers: parallel layout with the delay
/// bound opened up to the full-aperture spread.
inline SolveResult benchmark_optimal_ttd(const ChannelRealization& chan,
                                         const SystemConfig& cfg,
                                         const SolverHyperparams& hp = {},
                                         const SolverOptions& opt = {}) {
  return penalty_solve(chan, cfg, TtdConfig::kParallel,
                       unbounded_delay_emulation(cfg), hp, opt);
}

/// Phase-shifter-only architecture: all delays frozen at zero.
inline SolveResult benchmark_conventional(const ChannelRealization& chan,
                                          const SystemConfig& cfg,
                                          const SolverHyperparams& hp = {},
                                          SolverOptions opt = {}) {
  opt.freeze_ttd = true;
  return penalty_solve(chan, cfg, TtdConfig::kParallel, 0.0, hp, opt);
}

}  // namespace ttdbeam
