#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "ttdbeam/evaluation.hpp"
#include "ttdbeam/scenario.hpp"
#include "ttdbeam/single_user.hpp"

namespace ttdbeam {

enum class SweepAxis { kAngle, kTransmitPower, kTMax, kInsertionLoss };

inline bool parse_axis(const std::string& tag, SweepAxis& out) {
  if (tag == "angle") out = SweepAxis::kAngle;
  else if (tag == "transmit_power") out = SweepAxis::kTransmitPower;
  else if (tag == "t_max") out = SweepAxis::kTMax;
  else if (tag == "insertion_loss") out = SweepAxis::kInsertionLoss;
  else return false;
  return true;
}

inline std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::kAngle: return "angle";
    case SweepAxis::kTransmitPower: return "transmit_power";
    case SweepAxis::kTMax: return "t_max";
    case SweepAxis::kInsertionLoss: return "insertion_loss";
  }
  return "?";
}

/// Grid units by axis: degrees, dBm, seconds, dB.
inline std::vector<double> default_grid(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kAngle: {
      std::vector<double> g;
      for (int i = 0; i < 37; ++i) g.push_back(2.0 + i * (176.0 / 36.0));
      return g;
    }
    case SweepAxis::kTransmitPower:
      return {-10, -5, 0, 5, 10, 15, 20};
    case SweepAxis::kTMax:
      return {10e-12, 40e-12, 80e-12, 200e-12, 500e-12, 2480e-12};
    case SweepAxis::kInsertionLoss:
      return {0.0, 0.3, 0.6, 0.9, 1.2};
  }
  return {};
}

/// A scheme names either a benchmark or a delayer layout to solve for; the
/// `_noneq` suffix rates the result under equal-split (non-equalized)
/// power splitters when insertion loss is swept.
struct Scheme {
  enum class Kind { kFullDigital, kOptimalTtd, kConventional, kTopology };
  std::string name;
  Kind kind = Kind::kTopology;
  TtdConfig topo = TtdConfig::kParallel;
  bool equalized = true;
};

inline bool parse_scheme(const std::string& name, Scheme& out) {
  out.name = name;
  std::string base = name;
  out.equalized = true;
  if (base.size() > 6 && base.substr(base.size() - 6) == "_noneq") {
    out.equalized = false;
    base = base.substr(0, base.size() - 6);
  }
  if (base == "full_digital") out.kind = Scheme::Kind::kFullDigital;
  else if (base == "optimal_ttd") out.kind = Scheme::Kind::kOptimalTtd;
  else if (base == "conventional") out.kind = Scheme::Kind::kConventional;
  else {
    out.kind = Scheme::Kind::kTopology;
    return parse_ttd_config(base, out.topo);
  }
  return true;
}

inline std::vector<std::string> default_schemes(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kAngle:
      return {"optimal_ttd", "parallel", "serial_f", "serial_b", "hybrid"};
    case SweepAxis::kTransmitPower:
      return {"full_digital", "optimal_ttd", "parallel",
              "serial_f",     "hybrid",      "hfb",      "conventional"};
    case SweepAxis::kTMax:
      return {"parallel", "serial_f", "hybrid", "hfb"};
    case SweepAxis::kInsertionLoss:
      return {"parallel", "serial_f", "serial_f_noneq", "hybrid",
              "hybrid_noneq"};
  }
  return {};
}

struct Campaign {
  Scenario scenario;
  SweepAxis axis = SweepAxis::kTMax;
  std::vector<double> grid;
  std::string out_path;
  bool trace = false;
  int n_threads = 0;  // 0 -> hardware concurrency
};

/// One result cell, in deterministic (grid, realization, scheme) order.
struct CampaignRow {
  std::size_t grid_index = 0;
  double grid_value = 0.0;
  int realization = 0;
  std::uint64_t seed = 0;
  std::string scheme;
  std::string topology;
  double t_max_ps = 0.0;
  double eta_db = 0.0;
  int n_users = 0;
  double rate = 0.0;
  bool converged = true;
};

/// The report row layout shared with the evaluation CSV.
inline std::string evaluation_csv_header() {
  return "seed,scheme,topology,t_max_ps,eta_db,K,rate_bps_hz";
}

inline void write_evaluation_fields(std::ostream& os, const CampaignRow& r) {
  os << r.seed << ',' << r.scheme << ',' << r.topology << ',' << r.t_max_ps
     << ',' << r.eta_db << ',' << r.n_users << ',' << r.rate;
}

namespace detail {

inline void parallel_for(int n, int n_threads,
                         const std::function<void(int)>& fn) {
  if (n_threads <= 0)
    n_threads = static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min(n_threads, n));
  if (n_threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

inline ChannelRealization draw_users(const Scenario& s, std::uint64_t seed) {
  if (!s.users.fixed.empty()) {
    std::vector<std::vector<UserLocation>> scatterers;
    Rng rng(mix_seed(seed, 0x736361747465ULL));
    for (std::size_t k = 0; k < s.users.fixed.size(); ++k) {
      std::vector<UserLocation> per_user;
      for (int l = 0; l < s.system.n_scatterers(); ++l)
        per_user.push_back(s.users.ring.draw(rng));
      scatterers.push_back(std::move(per_user));
    }
    return generate_channel(s.users.fixed, scatterers, s.system,
                            mix_seed(seed, 0x6368616eULL));
  }
  return random_channel(s.system, s.users.count, s.users.ring, seed);
}

}  // namespace detail

struct TraceRecord {
  std::string cell;  // "<scheme>/g<grid_index>/r<realization>"
  std::vector<TraceEntry> entries;
};

struct CampaignResult {
  std::vector<CampaignRow> rows;
  std::vector<TraceRecord> traces;
  bool any_nonconverged = false;
};

/// Runs grid x realization x scheme, dispatching realizations to a worker
/// pool; rows come back in deterministic order regardless of scheduling.
/// Output is a pure function of (scenario, seed).
inline CampaignResult run_campaign(const Campaign& campaign) {
  const Scenario& base = campaign.scenario;
  if (campaign.grid.empty())
    throw std::invalid_argument("run_campaign: empty sweep grid");
  std::vector<Scheme> schemes;
  {
    const auto names = base.campaign.schemes.empty()
                           ? default_schemes(campaign.axis)
                           : base.campaign.schemes;
    for (const auto& name : names) {
      Scheme s;
      if (!parse_scheme(name, s))
        throw std::invalid_argument("run_campaign: unknown scheme " + name);
      schemes.push_back(s);
    }
  }

  CampaignResult result;

  if (campaign.axis == SweepAxis::kAngle) {
    // Single-user closed-form designs over the LoS path; no Monte Carlo.
    SystemConfig cfg = base.system;
    cfg.n_rf = 1;
    cfg.validate();
    const double distance =
        base.users.fixed.empty() ? 10.0 : base.users.fixed[0].distance_m;
    for (std::size_t g = 0; g < campaign.grid.size(); ++g) {
      const UserLocation loc{distance, deg_to_rad(campaign.grid[g])};
      for (const auto& scheme : schemes) {
        CampaignRow row;
        row.grid_index = g;
        row.grid_value = campaign.grid[g];
        row.seed = base.campaign.seed;
        row.scheme = scheme.name;
        row.n_users = 1;
        SingleUserDesign design;
        switch (scheme.kind) {
          case Scheme::Kind::kOptimalTtd:
            design = design_single_user_unbounded(loc, cfg);
            row.topology = "parallel";
            row.t_max_ps = unbounded_delay_emulation(cfg) * 1e12;
            break;
          case Scheme::Kind::kConventional:
            design = design_single_user(loc, cfg, TtdConfig::kParallel, 0.0);
            row.topology = "parallel";
            row.t_max_ps = 0.0;
            break;
          case Scheme::Kind::kFullDigital:
            throw std::invalid_argument(
                "run_campaign: full_digital is not a single-user closed-form "
                "scheme");
          case Scheme::Kind::kTopology:
            design = design_single_user(loc, cfg, scheme.topo,
                                        base.topology.t_max_s);
            row.topology = to_string(scheme.topo);
            row.t_max_ps = base.topology.t_max_s * 1e12;
            break;
        }
        row.rate = single_user_rate(loc, design, cfg).aggregate;
        result.rows.push_back(std::move(row));
      }
    }
    return result;
  }

  // Monte-Carlo axes. The channel depends only on the realization, so a
  // worker unit is one realization; the axis value enters the config.
  const int n_real = base.campaign.n_realizations;
  std::vector<std::vector<CampaignRow>> per_real(n_real);
  std::vector<std::vector<TraceRecord>> traces(n_real);
  detail::parallel_for(n_real, campaign.n_threads, [&](int r) {
    const std::uint64_t seed = mix_seed(base.campaign.seed, r);
    std::vector<CampaignRow>& rows = per_real[r];
    ChannelRealization chan;  // drawn lazily per config below
    SolverOptions solver_opt;
    solver_opt.collect_trace = campaign.trace;
    auto record_trace = [&](const CampaignRow& row, const SolveResult& res) {
      if (!campaign.trace) return;
      traces[r].push_back({row.scheme + "/g" + std::to_string(row.grid_index) +
                               "/r" + std::to_string(row.realization),
                           res.diagnostics.trace});
    };

    auto solve_and_rate = [&](const SystemConfig& cfg, const Scheme& scheme,
                              double t_max, double eta_db, CampaignRow& row) {
      row.topology = scheme.kind == Scheme::Kind::kTopology
                         ? to_string(scheme.topo)
                         : "parallel";
      row.eta_db = eta_db;
      const InsertionSpec ins{db_to_linear(eta_db), scheme.equalized};
      switch (scheme.kind) {
        case Scheme::Kind::kFullDigital: {
          row.topology = "-";
          row.t_max_ps = 0.0;
          row.rate = benchmark_full_digital(chan, cfg).spectral_efficiency;
          break;
        }
        case Scheme::Kind::kOptimalTtd: {
          row.t_max_ps = unbounded_delay_emulation(cfg) * 1e12;
          auto res = benchmark_optimal_ttd(chan, cfg, base.solver, solver_opt);
          row.converged = res.diagnostics.converged;
          row.rate = spectral_efficiency(res.beamformers, chan, cfg, ins)
                         .spectral_efficiency;
          record_trace(row, res);
          break;
        }
        case Scheme::Kind::kConventional: {
          row.t_max_ps = 0.0;
          auto res = benchmark_conventional(chan, cfg, base.solver, solver_opt);
          row.converged = res.diagnostics.converged;
          // Phase-shifter-only rows carry no delayer loss cascade.
          row.rate = spectral_efficiency(res.beamformers, chan, cfg)
                         .spectral_efficiency;
          record_trace(row, res);
          break;
        }
        case Scheme::Kind::kTopology: {
          row.t_max_ps = t_max * 1e12;
          auto res = penalty_solve(chan, cfg, scheme.topo, t_max, base.solver,
                                   solver_opt);
          row.converged = res.diagnostics.converged;
          row.rate = spectral_efficiency(res.beamformers, chan, cfg, ins)
                         .spectral_efficiency;
          record_trace(row, res);
          break;
        }
      }
    };

    switch (campaign.axis) {
      case SweepAxis::kTransmitPower: {
        SystemConfig cfg = base.system;
        chan = detail::draw_users(base, seed);
        for (std::size_t g = 0; g < campaign.grid.size(); ++g) {
          cfg.transmit_power_w = dbm_to_watts(campaign.grid[g]);
          for (const auto& scheme : schemes) {
            CampaignRow row;
            row.grid_index = g;
            row.grid_value = campaign.grid[g];
            row.realization = r;
            row.seed = seed;
            row.scheme = scheme.name;
            row.n_users = chan.n_users;
            solve_and_rate(cfg, scheme, base.topology.t_max_s,
                           base.topology.eta_ttd_db + base.topology.eta_splitter_db,
                           row);
            rows.push_back(std::move(row));
          }
        }
        break;
      }
      case SweepAxis::kTMax: {
        const SystemConfig& cfg = base.system;
        chan = detail::draw_users(base, seed);
        for (std::size_t g = 0; g < campaign.grid.size(); ++g) {
          for (const auto& scheme : schemes) {
            CampaignRow row;
            row.grid_index = g;
            row.grid_value = campaign.grid[g];
            row.realization = r;
            row.seed = seed;
            row.scheme = scheme.name;
            row.n_users = chan.n_users;
            solve_and_rate(cfg, scheme, campaign.grid[g], 0.0, row);
            rows.push_back(std::move(row));
          }
        }
        break;
      }
      case SweepAxis::kInsertionLoss: {
        // The beamforming design ignores the loss, so each scheme is
        // solved once per realization and rated at every grid loss.
        const SystemConfig& cfg = base.system;
        chan = detail::draw_users(base, seed);
        std::map<std::string, SolveResult> cache;
        std::map<std::string, double> fd_cache;
        for (const auto& scheme : schemes) {
          if (scheme.kind == Scheme::Kind::kFullDigital) {
            fd_cache[scheme.name] =
                benchmark_full_digital(chan, cfg).spectral_efficiency;
            continue;
          }
          std::string key = scheme.kind == Scheme::Kind::kTopology
                                ? to_string(scheme.topo)
                                : scheme.name;
          if (cache.count(key)) continue;
          switch (scheme.kind) {
            case Scheme::Kind::kOptimalTtd:
              cache[key] =
                  benchmark_optimal_ttd(chan, cfg, base.solver, solver_opt);
              break;
            case Scheme::Kind::kConventional:
              cache[key] =
                  benchmark_conventional(chan, cfg, base.solver, solver_opt);
              break;
            default:
              cache[key] = penalty_solve(chan, cfg, scheme.topo,
                                         base.topology.t_max_s, base.solver,
                                         solver_opt);
              break;
          }
          if (campaign.trace)
            traces[r].push_back({key + "/r" + std::to_string(r),
                                 cache[key].diagnostics.trace});
        }
        for (std::size_t g = 0; g < campaign.grid.size(); ++g) {
          for (const auto& scheme : schemes) {
            CampaignRow row;
            row.grid_index = g;
            row.grid_value = campaign.grid[g];
            row.realization = r;
            row.seed = seed;
            row.scheme = scheme.name;
            row.n_users = chan.n_users;
            row.eta_db = campaign.grid[g];
            if (scheme.kind == Scheme::Kind::kFullDigital) {
              row.topology = "-";
              row.rate = fd_cache[scheme.name];
            } else {
              const std::string key = scheme.kind == Scheme::Kind::kTopology
                                          ? to_string(scheme.topo)
                                          : scheme.name;
              const SolveResult& res = cache[key];
              row.topology = to_string(res.beamformers.config);
              row.t_max_ps = res.beamformers.t_max * 1e12;
              row.converged = res.diagnostics.converged;
              const InsertionSpec ins{db_to_linear(campaign.grid[g]),
                                      scheme.equalized};
              row.rate = spectral_efficiency(res.beamformers, chan, cfg, ins)
                             .spectral_efficiency;
            }
            rows.push_back(std::move(row));
          }
        }
        break;
      }
      case SweepAxis::kAngle:
        break;  // handled above
    }
  });

  // Deterministic (grid, realization, scheme) order for the writer.
  for (std::size_t g = 0; g < campaign.grid.size(); ++g)
    for (int r = 0; r < n_real; ++r)
      for (const auto& row : per_real[r])
        if (row.grid_index == g) {
          result.any_nonconverged |= !row.converged;
          result.rows.push_back(row);
        }
  for (auto& t : traces)
    result.traces.insert(result.traces.end(), t.begin(), t.end());
  return result;
}

inline void write_trace_csv(const CampaignResult& result, std::ostream& os) {
  os << "cell,outer,inner,objective,xi,rho\n";
  for (const auto& rec : result.traces)
    for (const auto& e : rec.entries)
      os << rec.cell << ',' << e.outer << ',' << e.inner << ',' << e.objective
         << ',' << e.xi << ',' << e.rho << '\n';
}

inline void write_campaign_csv(const CampaignResult& result, SweepAxis axis,
                               std::ostream& os) {
  os << "axis,grid_value,realization," << evaluation_csv_header()
     << ",converged\n";
  for (const auto& row : result.rows) {
    os << to_string(axis) << ',' << row.grid_value << ',' << row.realization
       << ',';
    write_evaluation_fields(os, row);
    os << ',' << (row.converged ? 1 : 0) << '\n';
  }
}

/// Mean and standard error per (grid value, scheme) cell.
inline void write_campaign_summary(const CampaignResult& result,
                                   SweepAxis axis, std::ostream& os) {
  std::map<std::pair<std::size_t, std::string>,
           std::pair<std::vector<double>, double>>
      cells;
  for (const auto& row : result.rows)
    cells[{row.grid_index, row.scheme}].first.push_back(row.rate),
        cells[{row.grid_index, row.scheme}].second = row.grid_value;
  os << "axis,grid_value,scheme,mean_rate,stderr,n\n";
  for (const auto& [key, cell] : cells) {
    const auto& vals = cell.first;
    const double n = static_cast<double>(vals.size());
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    const double stderr_val = n > 1 ? std::sqrt(var / (n - 1) / n) : 0.0;
    os << to_string(axis) << ',' << cell.second << ',' << key.second << ','
       << mean << ',' << stderr_val << ',' << vals.size() << '\n';
  }
}

}  // namespace ttdbeam
