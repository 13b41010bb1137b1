// Command-line front end: scenario validation, single-user design sweeps,
// and the Monte-Carlo sweep campaigns. Outputs CSV; exit code 0 on
// success, 2 on validation failure, 3 when any solve failed to converge.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>

#include "ttdbeam/campaign.hpp"
#include "ttdbeam/scenario.hpp"
#include "ttdbeam/single_user.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNonConvergence = 3;

struct CommonArgs {
  std::string scenario_path;
  std::string preset = "desk";
  std::string out_path;
  std::optional<std::uint64_t> seed;
  bool trace = false;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--scenario", args.scenario_path, "scenario JSON file");
  cmd->add_option("--preset", args.preset, "base preset when no scenario")
      ->check(CLI::IsMember({"paper", "desk"}));
  cmd->add_option("--seed", args.seed, "override the campaign seed");
  cmd->add_option("--out", args.out_path, "output CSV path (default stdout)");
  cmd->add_flag("--trace", args.trace, "emit per-iteration solver trace CSV");
  cmd->add_option("--threads", args.threads, "worker threads (0 = auto)");
}

int load_scenario(const CommonArgs& args, ttdbeam::Scenario& out) {
  if (args.scenario_path.empty()) {
    out = ttdbeam::preset_by_name(args.preset);
  } else {
    auto parsed = ttdbeam::parse_scenario_file(args.scenario_path);
    if (!parsed.ok()) {
      for (const auto& issue : parsed.issues)
        std::cerr << "scenario error: " << (issue.field.empty() ? "<file>" : issue.field)
                  << ": " << issue.message << "\n";
      return kExitValidation;
    }
    out = *parsed.scenario;
  }
  if (args.seed) out.campaign.seed = *args.seed;
  return 0;
}

int run_sweep(const CommonArgs& args, ttdbeam::SweepAxis axis) {
  ttdbeam::Scenario scenario;
  if (int rc = load_scenario(args, scenario); rc != 0) return rc;

  ttdbeam::Campaign campaign;
  campaign.scenario = scenario;
  campaign.axis = axis;
  // The scenario's grid applies only when it was written for this axis.
  ttdbeam::SweepAxis scenario_axis;
  const bool grid_matches =
      ttdbeam::parse_axis(scenario.campaign.axis, scenario_axis) &&
      scenario_axis == axis && !scenario.campaign.grid.empty();
  campaign.grid = grid_matches ? scenario.campaign.grid
                               : ttdbeam::default_grid(axis);
  campaign.trace = args.trace;
  campaign.n_threads = args.threads;

  // Scheme lists are validated up front so a typo fails before any solve.
  const auto names = scenario.campaign.schemes.empty()
                         ? ttdbeam::default_schemes(axis)
                         : scenario.campaign.schemes;
  for (const auto& name : names) {
    ttdbeam::Scheme s;
    if (!ttdbeam::parse_scheme(name, s)) {
      std::cerr << "scenario error: campaign.schemes: unknown scheme '" << name
                << "'\n";
      return kExitValidation;
    }
  }

  ttdbeam::CampaignResult result;
  try {
    result = ttdbeam::run_campaign(campaign);
  } catch (const std::invalid_argument& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return kExitValidation;
  }

  if (args.out_path.empty()) {
    ttdbeam::write_campaign_csv(result, axis, std::cout);
    ttdbeam::write_campaign_summary(result, axis, std::cerr);
  } else {
    std::ofstream csv(args.out_path);
    ttdbeam::write_campaign_csv(result, axis, csv);
    std::ofstream summary(args.out_path + ".summary.csv");
    ttdbeam::write_campaign_summary(result, axis, summary);
    if (args.trace) {
      std::ofstream trace(args.out_path + ".trace.csv");
      ttdbeam::write_trace_csv(result, trace);
    }
    std::cerr << "wrote " << result.rows.size() << " rows to " << args.out_path
              << "\n";
  }
  return result.any_nonconverged ? kExitNonConvergence : 0;
}

int run_single_user_design(const CommonArgs& args) {
  ttdbeam::Scenario scenario;
  if (int rc = load_scenario(args, scenario); rc != 0) return rc;

  ttdbeam::SystemConfig cfg = scenario.system;
  cfg.n_rf = 1;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return kExitValidation;
  }
  const double distance = scenario.users.fixed.empty()
                              ? 10.0
                              : scenario.users.fixed[0].distance_m;
  const auto grid = scenario.campaign.grid.empty()
                        ? ttdbeam::default_grid(ttdbeam::SweepAxis::kAngle)
                        : scenario.campaign.grid;

  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!args.out_path.empty()) {
    file.open(args.out_path);
    os = &file;
  }
  *os << "theta_deg,topology,rate_bps_hz,min_gain_frac,J_over_Nsub_d,region\n";
  const double unit = cfg.n_sub() * cfg.spacing();
  const ttdbeam::TtdConfig topologies[] = {
      ttdbeam::TtdConfig::kParallel, ttdbeam::TtdConfig::kSerialForward,
      ttdbeam::TtdConfig::kSerialBackward, ttdbeam::TtdConfig::kHybrid};
  for (double theta_deg : grid) {
    const ttdbeam::UserLocation loc{distance, ttdbeam::deg_to_rad(theta_deg)};
    const auto region = ttdbeam::classify_monotonicity(loc, cfg);
    for (auto topo : topologies) {
      const auto design = ttdbeam::design_single_user(
          loc, cfg, topo, scenario.topology.t_max_s);
      const auto rates = ttdbeam::single_user_rate(loc, design, cfg);
      *os << theta_deg << ',' << ttdbeam::to_string(topo) << ','
          << rates.aggregate << ',' << rates.min_gain_fraction << ','
          << region.j_value / unit << ',' << ttdbeam::to_string(region.kind)
          << '\n';
    }
    const auto unbounded = ttdbeam::design_single_user_unbounded(loc, cfg);
    const auto rates = ttdbeam::single_user_rate(loc, unbounded, cfg);
    *os << theta_deg << ",optimal_ttd," << rates.aggregate << ','
        << rates.min_gain_fraction << ',' << region.j_value / unit << ','
        << ttdbeam::to_string(region.kind) << '\n';
  }
  return 0;
}

int run_validate(const CommonArgs& args) {
  if (args.scenario_path.empty()) {
    std::cerr << "validate requires --scenario\n";
    return kExitValidation;
  }
  auto parsed = ttdbeam::parse_scenario_file(args.scenario_path);
  if (!parsed.ok()) {
    for (const auto& issue : parsed.issues)
      std::cerr << "scenario error: " << (issue.field.empty() ? "<file>" : issue.field)
                << ": " << issue.message << "\n";
    return kExitValidation;
  }
  std::cout << ttdbeam::scenario_to_json(*parsed.scenario).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Wideband near-field delay-network beamforming experiments"};
  app.require_subcommand(1);

  CommonArgs args;
  auto* angle = app.add_subcommand("sweep-angle",
                                   "single-user rate vs direction");
  auto* power = app.add_subcommand("sweep-power",
                                   "multi-user rate vs transmit power");
  auto* tmax = app.add_subcommand("sweep-tmax",
                                  "multi-user rate vs delayer range");
  auto* loss = app.add_subcommand("sweep-loss",
                                  "multi-user rate vs insertion loss");
  auto* design = app.add_subcommand(
      "single-user-design", "closed-form design sweep with gain diagnostics");
  auto* validate = app.add_subcommand("validate",
                                      "check a scenario file and normalize it");
  for (auto* cmd : {angle, power, tmax, loss, design, validate})
    add_common(cmd, args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(angle)) return run_sweep(args, ttdbeam::SweepAxis::kAngle);
    if (app.got_subcommand(power))
      return run_sweep(args, ttdbeam::SweepAxis::kTransmitPower);
    if (app.got_subcommand(tmax)) return run_sweep(args, ttdbeam::SweepAxis::kTMax);
    if (app.got_subcommand(loss))
      return run_sweep(args, ttdbeam::SweepAxis::kInsertionLoss);
    if (app.got_subcommand(design)) return run_single_user_design(args);
    if (app.got_subcommand(validate)) return run_validate(args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
