#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ttdbeam/config.hpp"
#include "ttdbeam/solver.hpp"
#include "ttdbeam/topology.hpp"

namespace ttdbeam {

using ojson = nlohmann::ordered_json;

struct TopologySpec {
  TtdConfig kind = TtdConfig::kParallel;
  double t_max_s = 80e-12;
  double eta_ttd_db = 0.0;
  double eta_splitter_db = 0.0;
  bool equalized = true;

  double eta_linear() const { return db_to_linear(eta_ttd_db + eta_splitter_db); }
};

/// Users are either pinned explicitly or drawn per realization from a ring.
struct UserSpec {
  std::vector<UserLocation> fixed;  // empty -> random placement
  int count = 4;
  PlacementRing ring;

  int n_users() const {
    return fixed.empty() ? count : static_cast<int>(fixed.size());
  }
};

struct CampaignSpec {
  std::string axis = "t_max";  // angle | transmit_power | t_max | insertion_loss
  std::vector<double> grid;
  int n_realizations = 20;
  std::uint64_t seed = 1;
  std::vector<std::string> schemes;  // empty -> axis default
};

struct Scenario {
  SystemConfig system;
  TopologySpec topology;
  UserSpec users;
  SolverHyperparams solver;
  CampaignSpec campaign;
};

/// Field-level validation message, path in dotted form.
struct Diagnostic {
  std::string field;
  std::string message;
};

struct ScenarioParse {
  std::optional<Scenario> scenario;
  std::vector<Diagnostic> issues;

  bool ok() const { return scenario.has_value() && issues.empty(); }
};

/// Full-scale reference configuration: 512-element array, 10-GHz band,
/// four RF chains serving four users.
inline Scenario preset_paper() {
  Scenario s;
  s.system.n_antennas = 512;
  s.system.n_rf = 4;
  s.system.n_ttd_per_chain = 32;
  s.system.n_subcarriers = 10;
  s.system.cp_length = 4;
  s.system.center_freq_hz = 100e9;
  s.system.bandwidth_hz = 10e9;
  s.system.transmit_power_w = dbm_to_watts(20.0);
  s.system.noise_density_w_hz = dbm_to_watts(-174.0);
  s.system.tx_gain = db_to_linear(15.0);
  s.system.rx_gain = db_to_linear(5.0);
  s.system.n_paths = 4;
  s.users.count = 4;
  s.campaign.n_realizations = 100;
  return s;
}

/// Same array geometry with a reduced OFDM grid, fewer realizations, and a
/// low-SNR operating point; finishes full sweeps in minutes on a laptop.
inline Scenario preset_desk() {
  Scenario s = preset_paper();
  s.system.n_subcarriers = 5;
  s.system.transmit_power_w = dbm_to_watts(-10.0);
  s.campaign.n_realizations = 20;
  return s;
}

inline Scenario preset_by_name(const std::string& name) {
  if (name == "paper") return preset_paper();
  if (name == "desk") return preset_desk();
  throw std::invalid_argument("unknown preset: " + name);
}

namespace detail {

class JsonReader {
 public:
  JsonReader(const ojson& node, std::string path, std::vector<Diagnostic>& out)
      : node_(node), path_(std::move(path)), issues_(out) {
    if (!node_.is_object())
      issues_.push_back({path_, "expected an object"});
  }

  ~JsonReader() {
    if (!node_.is_object()) return;
    for (auto it = node_.begin(); it != node_.end(); ++it)
      if (!seen_.count(it.key()))
        issues_.push_back({join(it.key()), "unknown key"});
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_.is_object() && node_.contains(key);
  }

  template <typename T>
  void require(const std::string& key, T& out) {
    if (!has(key)) {
      issues_.push_back({join(key), "required key is missing"});
      return;
    }
    read(key, out);
  }

  template <typename T>
  void optional(const std::string& key, T& out) {
    if (has(key)) read(key, out);
  }

  const ojson* child(const std::string& key) {
    return has(key) ? &node_.at(key) : nullptr;
  }

  std::string join(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  template <typename T>
  void read(const std::string& key, T& out) {
    const ojson& v = node_.at(key);
    try {
      out = v.get<T>();
    } catch (const nlohmann::json::exception&) {
      issues_.push_back({join(key), "wrong type"});
    }
  }

  const ojson& node_;
  std::string path_;
  std::vector<Diagnostic>& issues_;
  std::set<std::string> seen_;
};

inline void check_system(const SystemConfig& cfg, std::vector<Diagnostic>& out) {
  auto add = [&](const char* field, const std::string& msg) {
    out.push_back({std::string("system.") + field, msg});
  };
  if (cfg.n_antennas <= 0) add("n_antennas", "must be positive");
  if (cfg.n_rf <= 0) add("n_rf", "must be positive");
  if (cfg.n_ttd_per_chain <= 0) {
    add("n_ttd_per_chain", "must be positive");
  } else {
    if (cfg.n_antennas > 0 && cfg.n_antennas % cfg.n_ttd_per_chain != 0)
      add("n_ttd_per_chain",
          "n_antennas must be divisible by n_ttd_per_chain (" +
              std::to_string(cfg.n_antennas) + " % " +
              std::to_string(cfg.n_ttd_per_chain) + " != 0)");
    if (cfg.n_ttd_per_chain % 2 != 0)
      add("n_ttd_per_chain", "must be even");
  }
  if (cfg.n_subcarriers < 1) add("n_subcarriers", "must be >= 1");
  if (cfg.cp_length < 0) add("cp_length", "must be >= 0");
  if (cfg.bandwidth_hz <= 0) add("bandwidth_hz", "must be positive");
  if (cfg.center_freq_hz <= cfg.bandwidth_hz / 2.0)
    add("center_freq_hz", "must exceed half the bandwidth");
  if (cfg.antenna_spacing_m < 0) add("antenna_spacing_m", "must be >= 0");
  if (cfg.absorption_coeff < 0) add("absorption_coeff_per_m", "must be >= 0");
  if (cfg.n_paths < (cfg.paths_include_los ? 1 : 0))
    add("n_paths", "too small for the path model");
}

}  // namespace detail

/// Parses and validates a scenario document. All issues are collected with
/// their field paths; the scenario is returned only when everything checks
/// out.
inline ScenarioParse parse_scenario_json(const ojson& doc) {
  ScenarioParse result;
  auto& issues = result.issues;
  Scenario s = preset_paper();
  s.campaign.grid.clear();

  {
    detail::JsonReader root(doc, "", issues);
    if (const ojson* sys = root.child("system")) {
      detail::JsonReader r(*sys, "system", issues);
      r.require("n_antennas", s.system.n_antennas);
      r.require("n_rf", s.system.n_rf);
      r.require("n_ttd_per_chain", s.system.n_ttd_per_chain);
      r.require("n_subcarriers", s.system.n_subcarriers);
      r.require("cp_length", s.system.cp_length);
      r.require("center_freq_hz", s.system.center_freq_hz);
      r.require("bandwidth_hz", s.system.bandwidth_hz);
      double dbm = watts_to_dbm(s.system.transmit_power_w);
      r.require("transmit_power_dbm", dbm);
      s.system.transmit_power_w = dbm_to_watts(dbm);
      double nd = watts_to_dbm(s.system.noise_density_w_hz);
      r.require("noise_density_dbm_hz", nd);
      s.system.noise_density_w_hz = dbm_to_watts(nd);
      r.optional("antenna_spacing_m", s.system.antenna_spacing_m);
      double g = linear_to_db(s.system.tx_gain);
      r.optional("tx_gain_db", g);
      s.system.tx_gain = db_to_linear(g);
      g = linear_to_db(s.system.rx_gain);
      r.optional("rx_gain_db", g);
      s.system.rx_gain = db_to_linear(g);
      r.optional("absorption_coeff_per_m", s.system.absorption_coeff);
      r.optional("n_paths", s.system.n_paths);
      r.optional("paths_include_los", s.system.paths_include_los);
      g = linear_to_db(s.system.scatter_loss);
      r.optional("scatter_loss_db", g);
      s.system.scatter_loss = db_to_linear(g);
    } else {
      issues.push_back({"system", "required section is missing"});
    }

    if (const ojson* topo = root.child("topology")) {
      detail::JsonReader r(*topo, "topology", issues);
      std::string tag = to_string(s.topology.kind);
      r.optional("kind", tag);
      if (!parse_ttd_config(tag, s.topology.kind))
        issues.push_back(
            {"topology.kind",
             "unknown tag '" + tag +
                 "' (use parallel|serial_f|serial_b|hybrid|hfb)"});
      r.optional("t_max_s", s.topology.t_max_s);
      if (s.topology.t_max_s < 0)
        issues.push_back({"topology.t_max_s", "must be >= 0"});
      r.optional("eta_ttd_db", s.topology.eta_ttd_db);
      r.optional("eta_splitter_db", s.topology.eta_splitter_db);
      if (s.topology.eta_ttd_db < 0 || s.topology.eta_splitter_db < 0)
        issues.push_back({"topology", "insertion losses must be >= 0 dB"});
      r.optional("equalized", s.topology.equalized);
    }

    if (const ojson* users = root.child("users")) {
      if (users->is_array()) {
        root.has("users");
        s.users.fixed.clear();
        int idx = 0;
        for (const auto& u : *users) {
          detail::JsonReader r(u, "users[" + std::to_string(idx) + "]", issues);
          UserLocation loc;
          r.require("distance_m", loc.distance_m);
          double deg = rad_to_deg(loc.angle_rad);
          r.require("angle_deg", deg);
          loc.angle_rad = deg_to_rad(deg);
          if (loc.distance_m <= 0)
            issues.push_back({r.join("distance_m"), "must be positive"});
          if (!(deg > 0 && deg < 180))
            issues.push_back({r.join("angle_deg"), "must be in (0, 180)"});
          s.users.fixed.push_back(loc);
          ++idx;
        }
        if (s.users.fixed.empty())
          issues.push_back({"users", "must not be empty"});
      } else {
        detail::JsonReader r(*users, "users", issues);
        r.optional("count", s.users.count);
        if (s.users.count < 1)
          issues.push_back({"users.count", "must be >= 1"});
        std::vector<double> range{s.users.ring.r_min_m, s.users.ring.r_max_m};
        r.optional("range_m", range);
        std::vector<double> arange{rad_to_deg(s.users.ring.angle_min_rad),
                                   rad_to_deg(s.users.ring.angle_max_rad)};
        r.optional("angle_deg_range", arange);
        if (range.size() != 2 || range[0] <= 0 || range[1] < range[0])
          issues.push_back({"users.range_m", "expected [min, max] with 0 < min <= max"});
        else {
          s.users.ring.r_min_m = range[0];
          s.users.ring.r_max_m = range[1];
        }
        if (arange.size() != 2 || !(arange[0] > 0) || !(arange[1] < 180) ||
            arange[1] < arange[0])
          issues.push_back(
              {"users.angle_deg_range", "expected [min, max] inside (0, 180)"});
        else {
          s.users.ring.angle_min_rad = deg_to_rad(arange[0]);
          s.users.ring.angle_max_rad = deg_to_rad(arange[1]);
        }
      }
    }

    if (const ojson* solver = root.child("solver")) {
      detail::JsonReader r(*solver, "solver", issues);
      r.optional("rho0", s.solver.rho0);
      r.optional("epsilon", s.solver.epsilon);
      r.optional("inner_tol", s.solver.inner_tol);
      r.optional("xi_tol", s.solver.xi_tol);
      r.optional("grid_points", s.solver.grid_points);
      r.optional("cd_tol", s.solver.cd_tol);
      r.optional("max_outer", s.solver.max_outer);
      r.optional("max_inner", s.solver.max_inner);
      if (s.solver.rho0 <= 0) issues.push_back({"solver.rho0", "must be > 0"});
      if (!(s.solver.epsilon > 0 && s.solver.epsilon < 1))
        issues.push_back({"solver.epsilon", "must be in (0, 1)"});
      if (s.solver.grid_points < 2)
        issues.push_back({"solver.grid_points", "must be >= 2"});
    }

    if (const ojson* camp = root.child("campaign")) {
      detail::JsonReader r(*camp, "campaign", issues);
      r.optional("axis", s.campaign.axis);
      if (s.campaign.axis != "angle" && s.campaign.axis != "transmit_power" &&
          s.campaign.axis != "t_max" && s.campaign.axis != "insertion_loss")
        issues.push_back({"campaign.axis",
                          "expected angle|transmit_power|t_max|insertion_loss"});
      if (camp->contains("grid")) {
        r.optional("grid", s.campaign.grid);
        if (s.campaign.grid.empty())
          issues.push_back({"campaign.grid", "must not be empty"});
      }
      r.optional("n_realizations", s.campaign.n_realizations);
      if (s.campaign.n_realizations < 1)
        issues.push_back({"campaign.n_realizations", "must be >= 1"});
      r.optional("seed", s.campaign.seed);
      r.optional("schemes", s.campaign.schemes);
    }
  }

  detail::check_system(s.system, issues);
  if (s.system.n_rf > 0 && !s.users.fixed.empty() &&
      s.topology.kind == TtdConfig::kHfb && s.system.n_rf % 2 != 0)
    issues.push_back({"topology.kind", "hfb requires an even n_rf"});

  if (issues.empty()) result.scenario = std::move(s);
  return result;
}

inline ScenarioParse parse_scenario_text(const std::string& text) {
  ojson doc = ojson::parse(text, nullptr, false);
  if (doc.is_discarded()) {
    ScenarioParse bad;
    bad.issues.push_back({"", "not valid JSON"});
    return bad;
  }
  return parse_scenario_json(doc);
}

inline ScenarioParse parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    ScenarioParse bad;
    bad.issues.push_back({"", "cannot open file: " + path});
    return bad;
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str());
}

/// Normalized serialization: SI units, dB-valued fields tagged by suffix,
/// fixed key order. parse(serialize(s)) == s.
inline ojson scenario_to_json(const Scenario& s) {
  ojson doc;
  doc["system"] = {
      {"n_antennas", s.system.n_antennas},
      {"n_rf", s.system.n_rf},
      {"n_ttd_per_chain", s.system.n_ttd_per_chain},
      {"n_subcarriers", s.system.n_subcarriers},
      {"cp_length", s.system.cp_length},
      {"center_freq_hz", s.system.center_freq_hz},
      {"bandwidth_hz", s.system.bandwidth_hz},
      {"transmit_power_dbm", watts_to_dbm(s.system.transmit_power_w)},
      {"noise_density_dbm_hz", watts_to_dbm(s.system.noise_density_w_hz)},
      {"antenna_spacing_m", s.system.antenna_spacing_m},
      {"tx_gain_db", linear_to_db(s.system.tx_gain)},
      {"rx_gain_db", linear_to_db(s.system.rx_gain)},
      {"absorption_coeff_per_m", s.system.absorption_coeff},
      {"n_paths", s.system.n_paths},
      {"paths_include_los", s.system.paths_include_los},
      {"scatter_loss_db", linear_to_db(s.system.scatter_loss)},
  };
  doc["topology"] = {
      {"kind", to_string(s.topology.kind)},
      {"t_max_s", s.topology.t_max_s},
      {"eta_ttd_db", s.topology.eta_ttd_db},
      {"eta_splitter_db", s.topology.eta_splitter_db},
      {"equalized", s.topology.equalized},
  };
  if (!s.users.fixed.empty()) {
    ojson arr = ojson::array();
    for (const auto& u : s.users.fixed)
      arr.push_back({{"distance_m", u.distance_m},
                     {"angle_deg", rad_to_deg(u.angle_rad)}});
    doc["users"] = arr;
  } else {
    doc["users"] = {
        {"count", s.users.count},
        {"range_m", {s.users.ring.r_min_m, s.users.ring.r_max_m}},
        {"angle_deg_range",
         {rad_to_deg(s.users.ring.angle_min_rad),
          rad_to_deg(s.users.ring.angle_max_rad)}},
    };
  }
  doc["solver"] = {
      {"rho0", s.solver.rho0},
      {"epsilon", s.solver.epsilon},
      {"inner_tol", s.solver.inner_tol},
      {"xi_tol", s.solver.xi_tol},
      {"grid_points", s.solver.grid_points},
      {"cd_tol", s.solver.cd_tol},
      {"max_outer", s.solver.max_outer},
      {"max_inner", s.solver.max_inner},
  };
  doc["campaign"] = {
      {"axis", s.campaign.axis},
      {"n_realizations", s.campaign.n_realizations},
      {"seed", s.campaign.seed},
  };
  // The parser treats an explicitly empty grid as an error, so empty
  // optional lists are omitted rather than serialized.
  if (!s.campaign.grid.empty()) doc["campaign"]["grid"] = s.campaign.grid;
  if (!s.campaign.schemes.empty())
    doc["campaign"]["schemes"] = s.campaign.schemes;
  return doc;
}

}  // namespace ttdbeam
