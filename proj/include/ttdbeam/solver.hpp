#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ttdbeam/channel.hpp"
#include "ttdbeam/config.hpp"
#include "ttdbeam/single_user.hpp"
#include "ttdbeam/splitter.hpp"
#include "ttdbeam/sylvester.hpp"
#include "ttdbeam/topology.hpp"

namespace ttdbeam {

struct SolverHyperparams {
  double rho0 = 1e4;        // initial penalty factor
  double epsilon = 0.1;     // penalty reduction per outer round
  double inner_tol = 1e-4;  // fractional objective change stopping the sweeps
  double xi_tol = 1e-4;     // max-abs factorization violation at termination
  int grid_points = 1000;   // one-dimensional delay search resolution
  double cd_tol = 1e-4;     // coordinate-descent sweep threshold
  int max_outer = 30;
  int max_inner = 200;
};

/// Full transmit beamformer: per-chain phase-shifter vectors and raw delays
/// plus per-subcarrier digital matrices. Phase-shifter entries are exactly
/// unit modulus; the assembled analog matrix carries the 1/sqrt(N) feed
/// normalization.
struct BeamformerSet {
  TtdConfig config = TtdConfig::kParallel;
  double t_max = 0.0;
  std::vector<std::vector<Eigen::VectorXcd>> ps;  // [n][q], length N_sub
  std::vector<std::vector<double>> delays;        // [n][q], seconds
  std::vector<Eigen::MatrixXcd> digital;          // [m], N_RF x K

  int n_chains() const { return static_cast<int>(ps.size()); }

  std::vector<double> cumulative(int n) const {
    return cumulative_delays(delays[n], chain_rule(config, n, n_chains()));
  }

  /// Effective analog beamformer A*T at frequency f (N x N_RF).
  Eigen::MatrixXcd analog_matrix(double f, const SystemConfig& cfg) const {
    const int n_rf = n_chains();
    const int q_total = cfg.n_ttd_per_chain;
    const int n_sub = cfg.n_sub();
    const double norm = 1.0 / std::sqrt(static_cast<double>(cfg.n_antennas));
    Eigen::MatrixXcd w(cfg.n_antennas, n_rf);
    for (int n = 0; n < n_rf; ++n) {
      const auto cum = cumulative(n);
      for (int q = 0; q < q_total; ++q) {
        const cplx rot = std::polar(norm, -2.0 * kPi * f * cum[q]);
        w.block(static_cast<Eigen::Index>(q) * n_sub, n, n_sub, 1) =
            rot * ps[n][q];
      }
    }
    return w;
  }

  /// Block-stacked phase-shifter matrix (N x Q*N_RF) with 1/sqrt(N) scaling.
  Eigen::MatrixXcd ps_matrix(const SystemConfig& cfg) const {
    const int n_rf = n_chains();
    const int q_total = cfg.n_ttd_per_chain;
    const int n_sub = cfg.n_sub();
    const double norm = 1.0 / std::sqrt(static_cast<double>(cfg.n_antennas));
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(
        cfg.n_antennas, static_cast<Eigen::Index>(q_total) * n_rf);
    for (int n = 0; n < n_rf; ++n)
      for (int q = 0; q < q_total; ++q)
        a.block(static_cast<Eigen::Index>(q) * n_sub,
                static_cast<Eigen::Index>(n) * q_total + q, n_sub, 1) =
            norm * ps[n][q];
    return a;
  }

  /// Delayer response matrix at frequency f (Q*N_RF x N_RF).
  Eigen::MatrixXcd ttd_matrix(double f) const {
    std::vector<std::vector<double>> cum(n_chains());
    for (int n = 0; n < n_chains(); ++n) cum[n] = cumulative(n);
    return ttd_phase_matrix(cum, f);
  }
};

/// Per-user rates from the cross-gain table gram(k, i) = h_k^H p_i.
/// `noise` is the per-user denominator constant: the physical noise power
/// for the plain rate, or its full-power surrogate (sigma^2/P_t)*||P||_F^2.
inline Eigen::VectorXd rates_from_gram(const Eigen::MatrixXcd& gram,
                                       double noise) {
  const Eigen::Index k_total = gram.rows();
  Eigen::VectorXd rates(k_total);
  for (Eigen::Index k = 0; k < k_total; ++k) {
    double interference = 0.0;
    for (Eigen::Index i = 0; i < k_total; ++i)
      if (i != k) interference += std::norm(gram(k, i));
    rates[k] =
        std::log2(1.0 + std::norm(gram(k, k)) / (interference + noise));
  }
  return rates;
}

inline Eigen::VectorXd rate_plain(const Eigen::MatrixXcd& h,
                                  const Eigen::MatrixXcd& p, double sigma2) {
  return rates_from_gram(h.adjoint() * p, sigma2);
}

inline Eigen::VectorXd rate_surrogate(const Eigen::MatrixXcd& h,
                                      const Eigen::MatrixXcd& p, double sigma2,
                                      double pt) {
  return rates_from_gram(h.adjoint() * p, sigma2 / pt * p.squaredNorm());
}

struct WmmseVars {
  Eigen::VectorXd w;
  Eigen::VectorXcd v;
};

/// Closed-form weight and receive-scalar update of the weighted-MMSE
/// surrogate. An all-zero precoder is the MSE-1 fixed point: w = 1, v = 0.
inline WmmseVars wmmse_update(const Eigen::MatrixXcd& h,
                              const Eigen::MatrixXcd& p, double sigma2,
                              double pt) {
  const Eigen::Index k_total = h.cols();
  WmmseVars vars;
  vars.w = Eigen::VectorXd::Ones(k_total);
  vars.v = Eigen::VectorXcd::Zero(k_total);
  const double total_power = p.squaredNorm();
  if (total_power == 0.0) return vars;

  const Eigen::MatrixXcd gram = h.adjoint() * p;
  const double noise = sigma2 / pt * total_power;
  for (Eigen::Index k = 0; k < k_total; ++k) {
    double received = noise;
    for (Eigen::Index i = 0; i < k_total; ++i) received += std::norm(gram(k, i));
    const double sinr =
        std::norm(gram(k, k)) / (received - std::norm(gram(k, k)));
    vars.w[k] = 1.0 + sinr;  // equals 2^rate of the surrogate
    vars.v[k] = gram(k, k) / received;
  }
  return vars;
}

struct PUpdateDiag {
  double rel_residual = 0.0;
  bool fallback = false;
};

/// Minimizer of the weighted-MSE-plus-penalty quadratic in the auxiliary
/// precoder: solves Phi P + P Psi = Ups_h where Phi = H C H^H + s I is the
/// receive-side Hessian (C = diag(w |v|^2), s its noise share) and Psi is
/// the penalty-side Gram matrix. Exploits that Phi is a low-rank update of
/// the identity: after diagonalizing Psi, each column needs one small
/// Woodbury solve. Falls back to the dense triangular-Schur path if the
/// residual check fails.
inline Eigen::MatrixXcd penalty_p_update(const Eigen::MatrixXcd& h,
                                         const Eigen::VectorXd& w,
                                         const Eigen::VectorXcd& v,
                                         double sigma2, double pt,
                                         const Eigen::MatrixXcd& psi,
                                         const Eigen::MatrixXcd& ups_h,
                                         PUpdateDiag* diag = nullptr) {
  const Eigen::Index n = h.rows();
  const Eigen::Index k_total = h.cols();

  Eigen::VectorXd c(k_total);
  double s = 0.0;
  for (Eigen::Index k = 0; k < k_total; ++k) {
    c[k] = w[k] * std::norm(v[k]);
    s += c[k];
  }
  s *= sigma2 / pt;

  std::vector<Eigen::Index> active;
  for (Eigen::Index k = 0; k < k_total; ++k)
    if (c[k] > 0.0) active.push_back(k);
  const Eigen::Index ka = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXcd ha(n, ka);
  Eigen::VectorXd ca(ka);
  for (Eigen::Index j = 0; j < ka; ++j) {
    ha.col(j) = h.col(active[j]);
    ca[j] = c[active[j]];
  }
  const Eigen::MatrixXcd gram = ha.adjoint() * ha;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(psi);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("penalty_p_update: eigensolver failed");
  const Eigen::MatrixXcd& vmat = es.eigenvectors();
  const Eigen::VectorXd omega = es.eigenvalues().cwiseMax(0.0);

  const Eigen::MatrixXcd b = ups_h * vmat;
  Eigen::MatrixXcd phat(n, k_total);
  const double floor = 1e-300;
  for (Eigen::Index j = 0; j < k_total; ++j) {
    const double mu = s + omega[j];
    if (mu < floor && ka == 0)
      throw std::runtime_error("penalty_p_update: degenerate quadratic");
    if (ka == 0) {
      phat.col(j) = b.col(j) / mu;
    } else {
      Eigen::MatrixXcd m = gram;
      for (Eigen::Index i = 0; i < ka; ++i) m(i, i) += mu / ca[i];
      const Eigen::VectorXcd z = m.ldlt().solve(ha.adjoint() * b.col(j));
      phat.col(j) = (b.col(j) - ha * z) / mu;
    }
  }
  Eigen::MatrixXcd p = phat * vmat.adjoint();

  auto residual = [&](const Eigen::MatrixXcd& cand) {
    const Eigen::MatrixXcd lhs =
        ha * (ca.asDiagonal() * (ha.adjoint() * cand)) + s * cand + cand * psi;
    const double denom = ups_h.norm();
    return denom > 0.0 ? (lhs - ups_h).norm() / denom : lhs.norm();
  };

  double rel = residual(p);
  bool fell_back = false;
  if (!(rel <= 1e-8)) {
    Eigen::MatrixXcd phi = s * Eigen::MatrixXcd::Identity(n, n);
    if (ka > 0) phi += ha * ca.asDiagonal() * ha.adjoint();
    const Eigen::MatrixXcd x = sylvester_solve(psi, phi, ups_h.adjoint());
    p = x.adjoint();
    rel = residual(p);
    fell_back = true;
  }
  if (diag) {
    diag->rel_residual = rel;
    diag->fallback = fell_back;
  }
  return p;
}

/// Phase-only update of one chain's shifter vectors: each element matches
/// the phase of the delay-derotated target aggregated over subcarriers.
/// Elements whose aggregate vanishes keep phase zero.
inline Eigen::VectorXcd ps_phase_match(const Eigen::MatrixXcd& targets,
                                       const Eigen::VectorXcd& rotations) {
  // targets: N_sub x M slice stack, rotations: M phasors exp(+j 2 pi f t).
  Eigen::VectorXcd acc = targets * rotations;
  Eigen::VectorXcd out(acc.size());
  for (Eigen::Index i = 0; i < acc.size(); ++i)
    out[i] = acc[i] == cplx(0.0, 0.0) ? cplx(1.0, 0.0)
                                      : std::polar(1.0, std::arg(acc[i]));
  return out;
}

namespace detail {

/// Delay-coordinate objective for one chain:
/// sum_m sum_q Re{ psi(m,q) * exp(-j 2 pi f_m cum_q) }.
inline double chain_delay_objective(const Eigen::MatrixXcd& psi_coef,
                                    const std::vector<double>& freqs,
                                    const std::vector<double>& cumulative) {
  double total = 0.0;
  for (std::size_t m = 0; m < freqs.size(); ++m)
    for (std::size_t q = 0; q < cumulative.size(); ++q)
      total += (psi_coef(static_cast<Eigen::Index>(m),
                         static_cast<Eigen::Index>(q)) *
                std::polar(1.0, -2.0 * kPi * freqs[m] * cumulative[q]))
                   .real();
  return total;
}

/// Best grid point for sum_m Re{ coef_m exp(-j 2 pi f_m tau) } over the
/// uniform grid {0, step, ..., t_max}. The per-subcarrier phasors advance
/// by a fixed rotation per step, so the scan is a single multiply-add pass.
inline double grid_search_delay(const Eigen::VectorXcd& coef,
                                const std::vector<double>& freqs, double t_max,
                                int grid_points) {
  if (t_max <= 0.0 || grid_points < 2) return 0.0;
  const double step = t_max / (grid_points - 1);
  const Eigen::Index m_total = coef.size();
  Eigen::VectorXcd z = coef;
  Eigen::VectorXcd rot(m_total);
  for (Eigen::Index m = 0; m < m_total; ++m)
    rot[m] = std::polar(1.0, -2.0 * kPi * freqs[m] * step);
  double best_val = -std::numeric_limits<double>::infinity();
  int best_u = 0;
  for (int u = 0; u < grid_points; ++u) {
    const double val = z.real().sum();
    if (val > best_val) {
      best_val = val;
      best_u = u;
    }
    z.array() *= rot.array();
  }
  return best_u * step;
}

}  // namespace detail

/// One-dimensional-search delay update for a single chain. Parallel
/// delayers are independent and need a single pass; coupled layouts run
/// cyclic coordinate descent, where fixing all but one delayer reduces the
/// coupled terms to the same single-phasor search with an aggregated
/// coefficient. Returns the achieved objective.
inline double ttd_update_chain(const Eigen::MatrixXcd& psi_coef,
                               const std::vector<double>& freqs,
                               ChainRule rule, double t_max, int grid_points,
                               double cd_tol, int max_sweeps,
                               std::vector<double>& raw) {
  const int q_total = static_cast<int>(raw.size());
  const int m_total = static_cast<int>(freqs.size());
  if (t_max <= 0.0) {
    std::fill(raw.begin(), raw.end(), 0.0);
    return detail::chain_delay_objective(psi_coef, freqs,
                                         cumulative_delays(raw, rule));
  }

  if (rule == ChainRule::kParallel) {
    for (int q = 0; q < q_total; ++q)
      raw[q] = detail::grid_search_delay(psi_coef.col(q), freqs, t_max,
                                         grid_points);
    return detail::chain_delay_objective(psi_coef, freqs,
                                         cumulative_delays(raw, rule));
  }

  const int half = q_total / 2;
  auto affected = [&](int q, int& lo, int& hi) {
    switch (rule) {
      case ChainRule::kForward: lo = q; hi = q_total - 1; break;
      case ChainRule::kBackward: lo = 0; hi = q; break;
      case ChainRule::kHybrid:
        if (q < half) { lo = q; hi = half - 1; }
        else { lo = half; hi = q; }
        break;
      default: lo = hi = q; break;
    }
  };

  double prev = detail::chain_delay_objective(psi_coef, freqs,
                                              cumulative_delays(raw, rule));
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    for (int q = 0; q < q_total; ++q) {
      const auto cum = cumulative_delays(raw, rule);
      int lo = 0, hi = 0;
      affected(q, lo, hi);
      Eigen::VectorXcd coef = Eigen::VectorXcd::Zero(m_total);
      for (int m = 0; m < m_total; ++m) {
        cplx acc(0.0, 0.0);
        for (int qq = lo; qq <= hi; ++qq)
          acc += psi_coef(m, qq) *
                 std::polar(1.0, -2.0 * kPi * freqs[m] * (cum[qq] - raw[q]));
        coef[m] = acc;
      }
      raw[q] = detail::grid_search_delay(coef, freqs, t_max, grid_points);
    }
    const double now = detail::chain_delay_objective(
        psi_coef, freqs, cumulative_delays(raw, rule));
    if (std::abs(now - prev) <= cd_tol * std::max(std::abs(prev), 1e-30)) {
      prev = now;
      break;
    }
    prev = now;
  }
  return prev;
}

/// Least-squares digital stage for fixed analog beamformer.
inline Eigen::MatrixXcd digital_update(const Eigen::MatrixXcd& analog,
                                       const Eigen::MatrixXcd& p,
                                       bool* rank_deficient = nullptr) {
  return pseudo_inverse(analog, 1e-12, rank_deficient) * p;
}

struct TraceEntry {
  int outer = 0;
  int inner = 0;
  double objective = 0.0;
  double xi = 0.0;
  double rho = 0.0;
};

struct SolverDiagnostics {
  bool converged = false;
  double xi_final = 0.0;
  int outer_iterations = 0;
  int total_sweeps = 0;
  double max_sylvester_residual = 0.0;
  double min_sweep_delta = 0.0;  // most negative within-round objective step
  int pinv_rank_warnings = 0;
  int p_update_fallbacks = 0;
  double rate_surrogate_unscaled = 0.0;
  double rate_plain_scaled = 0.0;
  std::vector<TraceEntry> trace;
};

struct SolverOptions {
  bool freeze_ttd = false;      // keep all delays at zero (phase-only analog)
  std::vector<int> chain_user;  // warm-start user index per chain
  bool collect_trace = false;
  int max_cd_sweeps = 50;
};

struct SolveResult {
  BeamformerSet beamformers;
  std::vector<Eigen::MatrixXcd> p;   // scaled auxiliary precoders
  double spectral_efficiency = 0.0;  // achieved by the returned beamformers
  SolverDiagnostics diagnostics;
};

/// Warm-start assignment of users to chains. Direction-committed chains
/// (the HFB layout) are matched to the users whose ideal delay profile
/// runs the same way; everything else is round-robin.
inline std::vector<int> default_chain_assignment(
    TtdConfig config, const std::vector<UserLocation>& users,
    const SystemConfig& cfg) {
  const int n_rf = cfg.n_rf;
  const int k_total = static_cast<int>(users.size());
  std::vector<int> assignment(n_rf);
  if (config != TtdConfig::kHfb || k_total < 2) {
    for (int n = 0; n < n_rf; ++n) assignment[n] = n % k_total;
    return assignment;
  }
  // Users sorted by the location functional: most increasing first. Forward
  // chains take from the front, backward chains from the back, cycling
  // within each half when there are more chains than users.
  std::vector<int> order(k_total);
  for (int k = 0; k < k_total; ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return j_functional(users[a]) > j_functional(users[b]);
  });
  const int half = n_rf / 2;
  for (int n = 0; n < n_rf; ++n) {
    if (n < half)
      assignment[n] = order[n % k_total];
    else
      assignment[n] = order[k_total - 1 - (n - half) % k_total];
  }
  return assignment;
}

namespace detail {

inline void snap_to_grid(std::vector<double>& raw, double t_max,
                         int grid_points) {
  if (t_max <= 0.0 || grid_points < 2) {
    std::fill(raw.begin(), raw.end(), 0.0);
    return;
  }
  const double step = t_max / (grid_points - 1);
  for (double& t : raw)
    t = std::clamp(std::round(t / step) * step, 0.0, t_max);
}

}  // namespace detail

/// Double-loop penalty method for the sum-spectral-efficiency problem:
/// the inner loop block-descends over the WMMSE variables, the auxiliary
/// precoders, the phase shifters, the delays, and the digital stage for a
/// fixed penalty factor; the outer loop shrinks the factor until the
/// precoder factorization holds to tolerance. Warm-started from the
/// closed-form single-user designs, one chain per user.
inline SolveResult penalty_solve(const ChannelRealization& chan,
                                 const SystemConfig& cfg, TtdConfig config,
                                 double t_max,
                                 const SolverHyperparams& hp = {},
                                 const SolverOptions& opt = {}) {
  cfg.validate();
  validate_topology(config, cfg.n_ttd_per_chain, cfg.n_rf);
  const int n_rf = cfg.n_rf;
  const int k_total = chan.n_users;
  const int m_total = cfg.n_subcarriers;
  const int q_total = cfg.n_ttd_per_chain;
  const int n_sub = cfg.n_sub();
  const double sigma2 = cfg.noise_power();
  const double pt = cfg.transmit_power_w;
  const auto freqs = subcarrier_frequencies(cfg);
  const double effective_t_max = opt.freeze_ttd ? 0.0 : t_max;

  SolveResult result;
  BeamformerSet& bf = result.beamformers;
  bf.config = config;
  bf.t_max = effective_t_max;
  bf.ps.resize(n_rf);
  bf.delays.resize(n_rf);

  // Warm start: point each chain at a user with the closed-form design.
  const std::vector<int> assignment =
      opt.chain_user.empty() ? default_chain_assignment(config, chan.users, cfg)
                             : opt.chain_user;
  for (int n = 0; n < n_rf; ++n) {
    const int user = assignment[static_cast<std::size_t>(n)];
    const auto geo = subarray_geometry(chan.users[user], cfg);
    const auto prof = infinite_range_design(geo, cfg);
    bf.ps[n] = ps_from_profile(prof);
    const ChainRule rule = chain_rule(config, n, n_rf);
    bf.delays[n] = finite_range_design(prof, rule, effective_t_max);
    detail::snap_to_grid(bf.delays[n], effective_t_max, hp.grid_points);
  }

  // Digital warm start: power-normalized zero-forcing over the effective
  // channel; the auxiliary precoders start exactly feasible.
  std::vector<Eigen::MatrixXcd> analog(m_total);
  bf.digital.resize(m_total);
  std::vector<Eigen::MatrixXcd>& p = result.p;
  p.resize(m_total);
  SolverDiagnostics& diag = result.diagnostics;
  for (int m = 0; m < m_total; ++m) {
    analog[m] = bf.analog_matrix(freqs[m], cfg);
    bool warn = false;
    const Eigen::MatrixXcd heff = chan.h[m].adjoint() * analog[m];  // K x N_RF
    Eigen::MatrixXcd d = pseudo_inverse(heff, 1e-12, &warn);
    if (warn) ++diag.pinv_rank_warnings;
    const double norm = (analog[m] * d).norm();
    if (norm > 0.0) d *= std::sqrt(pt) / norm;
    bf.digital[m] = d;
    p[m] = analog[m] * d;
  }

  // The digital-stage pseudo-inverses are part of the loop state so that
  // the tracked objective always matches the stored matrices.
  std::vector<Eigen::MatrixXcd> d_dagger(m_total);
  for (int m = 0; m < m_total; ++m) {
    bool warn = false;
    d_dagger[m] = pseudo_inverse(bf.digital[m], 1e-12, &warn);
    if (warn) ++diag.pinv_rank_warnings;
  }

  auto surrogate_sum = [&]() {
    double total = 0.0;
    for (int m = 0; m < m_total; ++m)
      total += rate_surrogate(chan.h[m], p[m], sigma2, pt).sum();
    return total;
  };
  auto penalty_sum = [&]() {
    double total = 0.0;
    for (int m = 0; m < m_total; ++m)
      total += (p[m] * d_dagger[m] - analog[m]).squaredNorm();
    return total;
  };
  auto violation = [&]() {
    double xi = 0.0;
    for (int m = 0; m < m_total; ++m)
      xi = std::max(xi,
                    (p[m] * d_dagger[m] - analog[m]).cwiseAbs().maxCoeff());
    return xi;
  };
  // Penalized objective in nats; the surrogate-rate bound that each sweep
  // tightens is exact in this scaling, which is what makes the sweeps
  // monotone.
  auto penalized_objective = [&](double rho) {
    return std::numbers::ln2 * surrogate_sum() - penalty_sum() / rho;
  };

  double rho = hp.rho0;
  diag.min_sweep_delta = 0.0;
  for (int outer = 0; outer < hp.max_outer; ++outer) {
    double obj_prev = std::numeric_limits<double>::quiet_NaN();
    for (int inner = 0; inner < hp.max_inner; ++inner) {
      // Per-subcarrier WMMSE variables and auxiliary precoder.
      for (int m = 0; m < m_total; ++m) {
        const auto vars = wmmse_update(chan.h[m], p[m], sigma2, pt);
        const Eigen::MatrixXcd psi =
            (1.0 / rho) * d_dagger[m] * d_dagger[m].adjoint();
        Eigen::MatrixXcd ups_h =
            chan.h[m] * (vars.w.cast<cplx>().cwiseProduct(vars.v)).asDiagonal();
        ups_h += (1.0 / rho) * analog[m] * d_dagger[m].adjoint();
        PUpdateDiag pdiag;
        p[m] = penalty_p_update(chan.h[m], vars.w, vars.v, sigma2, pt, psi,
                                ups_h, &pdiag);
        diag.max_sylvester_residual =
            std::max(diag.max_sylvester_residual, pdiag.rel_residual);
        if (pdiag.fallback) ++diag.p_update_fallbacks;
      }

      // Phase shifters: match the phase of the delay-derotated targets.
      std::vector<Eigen::MatrixXcd> p_tilde(m_total);
      for (int m = 0; m < m_total; ++m) p_tilde[m] = p[m] * d_dagger[m];
      for (int n = 0; n < n_rf; ++n) {
        const auto cum = bf.cumulative(n);
        for (int q = 0; q < q_total; ++q) {
          Eigen::MatrixXcd targets(n_sub, m_total);
          Eigen::VectorXcd rot(m_total);
          for (int m = 0; m < m_total; ++m) {
            targets.col(m) =
                p_tilde[m].block(static_cast<Eigen::Index>(q) * n_sub, n,
                                 n_sub, 1);
            rot[m] = std::polar(1.0, 2.0 * kPi * freqs[m] * cum[q]);
          }
          bf.ps[n][q] = ps_phase_match(targets, rot);
        }
      }

      // Delays: per-chain one-dimensional searches.
      if (!opt.freeze_ttd && effective_t_max > 0.0) {
        for (int n = 0; n < n_rf; ++n) {
          Eigen::MatrixXcd psi_coef(m_total, q_total);
          for (int m = 0; m < m_total; ++m)
            for (int q = 0; q < q_total; ++q)
              psi_coef(m, q) =
                  p_tilde[m]
                      .col(n)
                      .segment(static_cast<Eigen::Index>(q) * n_sub, n_sub)
                      .dot(bf.ps[n][q]);
          ttd_update_chain(psi_coef, freqs, chain_rule(config, n, n_rf),
                           effective_t_max, hp.grid_points, hp.cd_tol,
                           opt.max_cd_sweeps, bf.delays[n]);
        }
      }

      // Digital stage. The least-squares update targets the factorization
      // residual with the roles of the factors swapped, so it can raise
      // the penalty term as written, typically when it passes near a
      // singular digital matrix. Backtracking toward the current matrix
      // keeps the sweep monotone while following the least-squares
      // direction whenever it behaves.
      for (int m = 0; m < m_total; ++m) {
        analog[m] = bf.analog_matrix(freqs[m], cfg);
        bool warn = false;
        const Eigen::MatrixXcd target = digital_update(analog[m], p[m], &warn);
        if (warn) ++diag.pinv_rank_warnings;
        const double pen_old = (p[m] * d_dagger[m] - analog[m]).squaredNorm();
        double step = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 24 && !accepted; ++bt, step *= 0.5) {
          const Eigen::MatrixXcd cand =
              step * target + (1.0 - step) * bf.digital[m];
          const Eigen::MatrixXcd cand_dagger = pseudo_inverse(cand);
          if ((p[m] * cand_dagger - analog[m]).squaredNorm() <= pen_old) {
            bf.digital[m] = cand;
            d_dagger[m] = cand_dagger;
            accepted = true;
          }
        }
        if (!accepted) {
          // Exact penalty minimizer over the digital stage: project the
          // analog matrix onto the precoder's column space.
          const Eigen::MatrixXcd dagger = pseudo_inverse(p[m]) * analog[m];
          const Eigen::MatrixXcd cand = pseudo_inverse(dagger);
          if ((p[m] * dagger - analog[m]).squaredNorm() <= pen_old) {
            bf.digital[m] = cand;
            d_dagger[m] = dagger;
          }
        }
      }
      const double obj = penalized_objective(rho);
      ++diag.total_sweeps;
      if (opt.collect_trace)
        diag.trace.push_back({outer, inner, obj, -1.0, rho});
      if (inner >= 1) {
        diag.min_sweep_delta = std::min(diag.min_sweep_delta, obj - obj_prev);
        if (std::abs(obj - obj_prev) <=
            hp.inner_tol * std::max(std::abs(obj_prev), 1e-30)) {
          obj_prev = obj;
          break;
        }
      }
      obj_prev = obj;
    }

    diag.outer_iterations = outer + 1;
    const double xi = violation();
    diag.xi_final = xi;
    if (opt.collect_trace && !diag.trace.empty()) diag.trace.back().xi = xi;
    if (xi < hp.xi_tol) {
      diag.converged = true;
      break;
    }
    rho *= hp.epsilon;
  }

  diag.rate_surrogate_unscaled = surrogate_sum();

  // Full-power restoration: the surrogate is scale-invariant, so both the
  // auxiliary precoders and the digital stage are rescaled to radiate
  // exactly the power budget on every subcarrier.
  double plain_sum = 0.0;
  for (int m = 0; m < m_total; ++m) {
    const double pnorm = p[m].norm();
    if (pnorm > 0.0) p[m] *= std::sqrt(pt) / pnorm;
    const double bnorm = (analog[m] * bf.digital[m]).norm();
    if (bnorm > 0.0) bf.digital[m] *= std::sqrt(pt) / bnorm;
    plain_sum +=
        rate_plain(chan.h[m], analog[m] * bf.digital[m], sigma2).sum();
  }
  diag.rate_plain_scaled = plain_sum;
  result.spectral_efficiency = plain_sum / (m_total + cfg.cp_length);
  return result;
}

struct FullDigitalResult {
  std::vector<Eigen::MatrixXcd> p;
  Eigen::MatrixXd rates;  // M x K
  double spectral_efficiency = 0.0;
};

/// Per-subcarrier WMMSE with an unconstrained precoder (one RF chain per
/// antenna): the upper-bound benchmark. Runs on the full-power surrogate
/// and rescales to the power budget at the end.
inline FullDigitalResult full_digital_solve(const ChannelRealization& chan,
                                            const SystemConfig& cfg,
                                            double tol = 1e-8,
                                            int max_iters = 2000) {
  const int m_total = cfg.n_subcarriers;
  const int k_total = chan.n_users;
  const double sigma2 = cfg.noise_power();
  const double pt = cfg.transmit_power_w;

  FullDigitalResult result;
  result.p.resize(m_total);
  result.rates.resize(m_total, k_total);
  const Eigen::MatrixXcd psi = Eigen::MatrixXcd::Zero(k_total, k_total);
  for (int m = 0; m < m_total; ++m) {
    Eigen::MatrixXcd p = chan.h[m];
    p *= std::sqrt(pt) / p.norm();
    double prev = rate_surrogate(chan.h[m], p, sigma2, pt).sum();
    for (int it = 0; it < max_iters; ++it) {
      const auto vars = wmmse_update(chan.h[m], p, sigma2, pt);
      const Eigen::MatrixXcd ups_h =
          chan.h[m] * (vars.w.cast<cplx>().cwiseProduct(vars.v)).asDiagonal();
      p = penalty_p_update(chan.h[m], vars.w, vars.v, sigma2, pt, psi, ups_h);
      const double now = rate_surrogate(chan.h[m], p, sigma2, pt).sum();
      if (std::abs(now - prev) <= tol * std::max(std::abs(prev), 1e-30)) break;
      prev = now;
    }
    p *= std::sqrt(pt) / p.norm();
    result.p[m] = p;
    result.rates.row(m) = rate_plain(chan.h[m], p, sigma2).transpose();
  }
  result.spectral_efficiency =
      result.rates.sum() / (m_total + cfg.cp_length);
  return result;
}

}  // namespace ttdbeam
