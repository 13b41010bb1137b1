#include <catch2/catch.hpp>

#include "ttdbeam/scenario.hpp"

using namespace ttdbeam;

namespace {

ojson minimal_doc() {
  return ojson{{"system",
                {{"n_antennas", 512},
                 {"n_rf", 4},
                 {"n_ttd_per_chain", 32},
                 {"n_subcarriers", 10},
                 {"cp_length", 4},
                 {"center_freq_hz", 100e9},
                 {"bandwidth_hz", 10e9},
                 {"transmit_power_dbm", 20.0},
                 {"noise_density_dbm_hz", -174.0}}}};
}

bool has_issue(const ScenarioParse& parsed, const std::string& field) {
  for (const auto& issue : parsed.issues)
    if (issue.field == field) return true;
  return false;
}

}  // namespace

TEST_CASE("minimal scenario parses with defaults") {
  const auto parsed = parse_scenario_json(minimal_doc());
  REQUIRE(parsed.ok());
  CHECK(parsed.scenario->system.n_antennas == 512);
  CHECK(parsed.scenario->system.transmit_power_w ==
        Approx(dbm_to_watts(20.0)));
  CHECK(parsed.scenario->topology.kind == TtdConfig::kParallel);
  CHECK(parsed.scenario->solver.rho0 == Approx(1e4));
}

TEST_CASE("missing required field is reported by name") {
  auto doc = minimal_doc();
  doc["system"].erase("n_ttd_per_chain");
  const auto parsed = parse_scenario_json(doc);
  CHECK_FALSE(parsed.ok());
  CHECK(has_issue(parsed, "system.n_ttd_per_chain"));
}

TEST_CASE("divisibility violation is reported with the offending field") {
  auto doc = minimal_doc();
  doc["system"]["n_ttd_per_chain"] = 30;
  const auto parsed = parse_scenario_json(doc);
  CHECK_FALSE(parsed.ok());
  CHECK(has_issue(parsed, "system.n_ttd_per_chain"));
}

TEST_CASE("unknown keys are rejected") {
  auto doc = minimal_doc();
  doc["system"]["n_anntenas"] = 256;  // typo
  const auto parsed = parse_scenario_json(doc);
  CHECK_FALSE(parsed.ok());
  CHECK(has_issue(parsed, "system.n_anntenas"));
}

TEST_CASE("bad topology tag is rejected") {
  auto doc = minimal_doc();
  doc["topology"] = {{"kind", "serial"}};
  const auto parsed = parse_scenario_json(doc);
  CHECK_FALSE(parsed.ok());
  CHECK(has_issue(parsed, "topology.kind"));
}

TEST_CASE("explicit users are range-checked") {
  auto doc = minimal_doc();
  doc["users"] = ojson::array(
      {{{"distance_m", 10.0}, {"angle_deg", 90.0}},
       {{"distance_m", -1.0}, {"angle_deg", 200.0}}});
  const auto parsed = parse_scenario_json(doc);
  CHECK_FALSE(parsed.ok());
  CHECK(has_issue(parsed, "users[1].distance_m"));
  CHECK(has_issue(parsed, "users[1].angle_deg"));
}

TEST_CASE("empty sweep grid is rejected at parse") {
  auto doc = minimal_doc();
  doc["campaign"] = {{"axis", "t_max"}, {"grid", ojson::array()}};
  const auto parsed = parse_scenario_json(doc);
  CHECK_FALSE(parsed.ok());
  CHECK(has_issue(parsed, "campaign.grid"));
}

TEST_CASE("dB fields convert at the boundary") {
  auto doc = minimal_doc();
  doc["system"]["tx_gain_db"] = 15.0;
  doc["system"]["rx_gain_db"] = 5.0;
  doc["topology"] = {{"kind", "serial_f"},
                     {"eta_ttd_db", 0.4},
                     {"eta_splitter_db", 0.2}};
  const auto parsed = parse_scenario_json(doc);
  REQUIRE(parsed.ok());
  CHECK(parsed.scenario->system.tx_gain == Approx(db_to_linear(15.0)));
  CHECK(parsed.scenario->topology.eta_linear() ==
        Approx(db_to_linear(0.6)).epsilon(1e-12));
}

TEST_CASE("normalized form round-trips exactly") {
  auto doc = minimal_doc();
  doc["topology"] = {{"kind", "hybrid"}, {"t_max_s", 80e-12}};
  doc["users"] = {{"count", 4},
                  {"range_m", {5.0, 15.0}},
                  {"angle_deg_range", {5.0, 175.0}}};
  const auto first = parse_scenario_json(doc);
  REQUIRE(first.ok());
  const std::string serialized = scenario_to_json(*first.scenario).dump(2);

  const auto second = parse_scenario_text(serialized);
  REQUIRE(second.ok());
  CHECK(scenario_to_json(*second.scenario).dump(2) == serialized);
}

TEST_CASE("presets are self-consistent") {
  for (const char* name : {"paper", "desk"}) {
    const auto preset = preset_by_name(name);
    CHECK_NOTHROW(preset.system.validate());
    const std::string serialized = scenario_to_json(preset).dump(2);
    const auto parsed = parse_scenario_text(serialized);
    REQUIRE(parsed.ok());
    CHECK(parsed.scenario->system.n_antennas == preset.system.n_antennas);
    CHECK(parsed.scenario->system.n_subcarriers ==
          preset.system.n_subcarriers);
  }
  CHECK(preset_desk().system.n_subcarriers == 5);
  CHECK(preset_paper().system.n_subcarriers == 10);
  CHECK_THROWS_AS(preset_by_name("laptop"), std::invalid_argument);
}

TEST_CASE("non-JSON input yields a diagnostic, not a crash") {
  const auto parsed = parse_scenario_text("not json at all {");
  CHECK_FALSE(parsed.ok());
  REQUIRE_FALSE(parsed.issues.empty());
}
