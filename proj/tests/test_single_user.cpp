#include <catch2/catch.hpp>
#include <cmath>

#include "ttdbeam/channel.hpp"
#include "ttdbeam/single_user.hpp"

using namespace ttdbeam;

namespace {

SystemConfig baseline_config() {
  SystemConfig cfg;
  cfg.validate();
  return cfg;
}

// Full-aperture beamformed response computed from scratch: assemble the
// per-antenna analog weight and correlate against the response phases.
double gain_oracle(double f, const UserLocation& loc,
                   const SingleUserDesign& design, const SystemConfig& cfg) {
  const auto dist = propagation_distances(loc, cfg);
  const int n_sub = cfg.n_sub();
  cplx acc(0.0, 0.0);
  for (int n = 0; n < cfg.n_antennas; ++n) {
    const int q = n / n_sub;
    const cplx weight =
        design.ps[q][n % n_sub] *
        std::polar(1.0, -2.0 * kPi * f * design.cumulative[q]);
    acc += std::polar(1.0, -2.0 * kPi * f * dist[n] / kSpeedOfLight) * weight;
  }
  return std::abs(acc);
}

}  // namespace

TEST_CASE("subarray geometry is symmetric at broadside") {
  const auto cfg = baseline_config();
  const auto geo = subarray_geometry({10.0, kPi / 2}, cfg);
  const int q_total = cfg.n_ttd_per_chain;
  for (int q = 0; q < q_total / 2; ++q)
    CHECK(geo.r_sub[q] == Approx(geo.r_sub[q_total - 1 - q]).epsilon(1e-14));
}

TEST_CASE("degenerate one-element subarrays reproduce per-antenna distances") {
  SystemConfig cfg = baseline_config();
  cfg.n_antennas = 8;
  cfg.n_ttd_per_chain = 8;
  cfg.validate();
  const UserLocation loc{3.0, 1.0};
  const auto geo = subarray_geometry(loc, cfg);
  const auto dist = propagation_distances(loc, cfg);
  for (int q = 0; q < 8; ++q)
    CHECK(geo.r_sub[q] == Approx(dist[q]).epsilon(1e-14));
}

TEST_CASE("adjacent subarray distances differ by at most the subarray span") {
  const auto cfg = baseline_config();
  const auto geo = subarray_geometry({10.0, kPi / 3}, cfg);
  const double bound = cfg.n_sub() * cfg.spacing();
  for (std::size_t q = 1; q < geo.r_sub.size(); ++q)
    CHECK(std::abs(geo.r_sub[q] - geo.r_sub[q - 1]) <= bound * (1 + 1e-12));
}

TEST_CASE("equal subarray distances need no delays") {
  SubarrayGeometry geo;
  geo.r_sub.assign(8, 10.0);
  geo.r_sub_max = geo.r_sub_min = 10.0;
  geo.r_elem = Eigen::VectorXd::Constant(16, 10.0);
  SystemConfig cfg = baseline_config();
  cfg.n_antennas = 16;
  cfg.n_ttd_per_chain = 8;
  const auto prof = infinite_range_design(geo, cfg);
  for (double t : prof.t_inf) CHECK(t == 0.0);
}

TEST_CASE("ideal delay profile is nonnegative with a zero minimum") {
  const auto cfg = baseline_config();
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const UserLocation loc{rng.uniform(5.0, 15.0), rng.uniform(0.1, kPi - 0.1)};
    const auto prof =
        infinite_range_design(subarray_geometry(loc, cfg), cfg);
    double min_t = 1.0;
    for (double t : prof.t_inf) {
      CHECK(t >= 0.0);
      min_t = std::min(min_t, t);
    }
    CHECK(min_t == 0.0);
  }
}

TEST_CASE("endfire limit needs the full-aperture delay range") {
  const auto cfg = baseline_config();
  const auto prof = infinite_range_design(
      subarray_geometry({10.0, 1e-9}, cfg), cfg);
  double max_t = 0.0;
  for (double t : prof.t_inf) max_t = std::max(max_t, t);
  // (N - N_sub) d / c = 496 / (2 f_c) = 2480 ps.
  CHECK(max_t == Approx(2480e-12).epsilon(1e-6));
}

TEST_CASE("ideal design keeps nearly full gain across the band") {
  const auto cfg = baseline_config();
  const UserLocation loc{10.0, kPi / 2};
  const auto design = design_single_user_unbounded(loc, cfg);
  for (double f : subcarrier_frequencies(cfg)) {
    const double g = gain_oracle(f, loc, design, cfg);
    CHECK(g >= 0.95 * cfg.n_antennas);
    CHECK(g <= cfg.n_antennas * (1 + 1e-12));
    // Library gain agrees with the from-scratch evaluation.
    CHECK(array_gain(f, design.geometry, design.ps, design.cumulative, cfg) ==
          Approx(g).epsilon(1e-12));
  }
}

TEST_CASE("monotonicity classification") {
  const auto cfg = baseline_config();
  const double unit = cfg.n_sub() * cfg.spacing();
  const int q_total = cfg.n_ttd_per_chain;

  SECTION("broadside is unimodal with a centered turning point") {
    const auto region = classify_monotonicity({10.0, kPi / 2}, cfg);
    CHECK(region.kind == Monotonicity::kUnimodal);
    CHECK(region.j_value == Approx(0.0).margin(1e-9));
    CHECK(region.turning_index == q_total / 2 + 1);
  }

  SECTION("the increasing boundary is inclusive") {
    // With two delayers the thresholds collapse to zero, so broadside sits
    // exactly on the boundary and must classify as increasing.
    SystemConfig two = cfg;
    two.n_antennas = 32;
    two.n_ttd_per_chain = 2;
    two.validate();
    const auto on_boundary = classify_monotonicity({10.0, kPi / 2}, two);
    CHECK(on_boundary.j_value == Approx(0.0).margin(1e-12));
    CHECK(on_boundary.kind == Monotonicity::kIncreasing);

    // Just past the boundary on either side.
    const double target = (q_total - 2) * unit;
    const double a = target / (2.0 * 10.0);
    const double x = (-1.0 + std::sqrt(1.0 + 4 * a * a)) / (2 * a);
    const double theta = std::acos(x);
    const auto above = classify_monotonicity({10.0 * (1 + 1e-6), theta}, cfg);
    CHECK(above.kind == Monotonicity::kIncreasing);
    const auto below = classify_monotonicity({10.0 * (1 - 1e-6), theta}, cfg);
    CHECK(below.kind == Monotonicity::kUnimodal);
  }

  SECTION("classification depends only on the scaled functional") {
    SystemConfig wide = cfg;
    wide.antenna_spacing_m = cfg.spacing() * 2.0;  // doubles the unit
    const UserLocation loc{10.0, 1.0};
    const auto a = classify_monotonicity(loc, cfg);
    const UserLocation scaled{20.0, 1.0};  // J scales linearly in r
    const auto b = classify_monotonicity(scaled, wide);
    CHECK(a.kind == b.kind);
    if (a.kind == Monotonicity::kUnimodal)
      CHECK(a.turning_index == b.turning_index);
  }

  SECTION("degenerate angles are rejected") {
    CHECK_THROWS_AS(classify_monotonicity({10.0, 0.0}, cfg),
                    std::invalid_argument);
    CHECK_THROWS_AS(classify_monotonicity({10.0, kPi}, cfg),
                    std::invalid_argument);
  }
}

TEST_CASE("classification matches exact-distance delay signs away from edges") {
  const auto cfg = baseline_config();
  const double unit = cfg.n_sub() * cfg.spacing();
  const double boundary = (cfg.n_ttd_per_chain - 2);
  Rng rng(23);
  int tested = 0, matched = 0;
  while (tested < 1000) {
    const UserLocation loc{rng.uniform(5.0, 15.0),
                           rng.uniform(deg_to_rad(5.0), deg_to_rad(175.0))};
    const double jn = j_functional(loc) / unit;
    // Keep a 10% margin from the region boundaries.
    const bool inc = jn >= 1.1 * boundary;
    const bool dec = jn <= -1.1 * boundary;
    const bool uni = std::abs(jn) <= 0.9 * boundary;
    if (!inc && !dec && !uni) continue;
    ++tested;

    const auto prof = infinite_range_design(subarray_geometry(loc, cfg), cfg);
    bool nondecreasing = true, nonincreasing = true;
    int sign_flips = 0;
    double prev_step = 1.0;
    for (std::size_t q = 1; q < prof.t_inf.size(); ++q) {
      const double step = prof.t_inf[q] - prof.t_inf[q - 1];
      if (step < 0) nondecreasing = false;
      if (step > 0) nonincreasing = false;
      if (q > 1 && step * prev_step < 0) ++sign_flips;
      prev_step = step;
    }
    const auto region = classify_monotonicity(loc, cfg);
    bool ok = false;
    if (region.kind == Monotonicity::kIncreasing) ok = nondecreasing;
    if (region.kind == Monotonicity::kDecreasing) ok = nonincreasing;
    if (region.kind == Monotonicity::kUnimodal)
      ok = sign_flips <= 1 && !nondecreasing == !nonincreasing;
    if (ok) ++matched;
  }
  CHECK(matched >= 990);
}

TEST_CASE("range-limited designs per layout") {
  const auto cfg = baseline_config();
  const double big = 1.0;  // effectively unbounded

  SECTION("forward serial telescopes exactly in its preferred region") {
    const UserLocation loc{10.0, deg_to_rad(40.0)};  // strongly increasing
    REQUIRE(classify_monotonicity(loc, cfg).kind == Monotonicity::kIncreasing);
    const auto prof = infinite_range_design(subarray_geometry(loc, cfg), cfg);
    const auto raw = finite_range_design(prof, ChainRule::kForward, big);
    const auto cum = cumulative_delays(raw, ChainRule::kForward);
    for (std::size_t q = 0; q < cum.size(); ++q)
      CHECK(cum[q] == Approx(prof.t_inf[q]).margin(1e-22));
  }

  SECTION("backward serial telescopes exactly in its preferred region") {
    const UserLocation loc{10.0, deg_to_rad(140.0)};  // strongly decreasing
    REQUIRE(classify_monotonicity(loc, cfg).kind == Monotonicity::kDecreasing);
    const auto prof = infinite_range_design(subarray_geometry(loc, cfg), cfg);
    const auto raw = finite_range_design(prof, ChainRule::kBackward, big);
    const auto cum = cumulative_delays(raw, ChainRule::kBackward);
    for (std::size_t q = 0; q < cum.size(); ++q)
      CHECK(cum[q] == Approx(prof.t_inf[q]).margin(1e-22));
  }

  SECTION("forward serial parks at zero against the profile's direction") {
    const UserLocation loc{10.0, deg_to_rad(140.0)};
    const auto prof = infinite_range_design(subarray_geometry(loc, cfg), cfg);
    for (double t : finite_range_design(prof, ChainRule::kForward, 80e-12))
      CHECK(t == 0.0);
  }

  SECTION("outputs always stay inside the hardware range") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
      const UserLocation loc{rng.uniform(5.0, 15.0),
                             rng.uniform(0.1, kPi - 0.1)};
      const auto prof = infinite_range_design(subarray_geometry(loc, cfg), cfg);
      for (auto rule : {ChainRule::kParallel, ChainRule::kForward,
                        ChainRule::kBackward, ChainRule::kHybrid})
        for (double t : finite_range_design(prof, rule, 80e-12)) {
          CHECK(t >= 0.0);
          CHECK(t <= 80e-12);
        }
    }
  }

  SECTION("ample parallel range reproduces the ideal gain") {
    const UserLocation loc{10.0, deg_to_rad(60.0)};
    const auto ideal = design_single_user_unbounded(loc, cfg);
    const auto par = design_single_user(loc, cfg, TtdConfig::kParallel, 2480e-12);
    for (double f : subcarrier_frequencies(cfg)) {
      const double gi = array_gain(f, ideal.geometry, ideal.ps,
                                   ideal.cumulative, cfg);
      const double gp =
          array_gain(f, par.geometry, par.ps, par.cumulative, cfg);
      CHECK(gp == Approx(gi).epsilon(1e-9));
    }
  }

  SECTION("hybrid at broadside with the single-step budget stays near ideal") {
    const UserLocation loc{10.0, kPi / 2};
    const auto ideal = design_single_user_unbounded(loc, cfg);
    const auto hyb = design_single_user(loc, cfg, TtdConfig::kHybrid, 80e-12);
    for (double f : subcarrier_frequencies(cfg)) {
      const double gi =
          array_gain(f, ideal.geometry, ideal.ps, ideal.cumulative, cfg);
      const double gh =
          array_gain(f, hyb.geometry, hyb.ps, hyb.cumulative, cfg);
      CHECK(gh >= 0.98 * gi);
    }
  }

  SECTION("hybrid keeps half the chain on its matching rule") {
    const UserLocation loc{10.0, deg_to_rad(40.0)};  // increasing region
    const auto prof = infinite_range_design(subarray_geometry(loc, cfg), cfg);
    const auto hybrid = finite_range_design(prof, ChainRule::kHybrid, 80e-12);
    const auto forward = finite_range_design(prof, ChainRule::kForward, 80e-12);
    for (int q = 0; q < cfg.n_ttd_per_chain / 2; ++q)
      CHECK(hybrid[q] == forward[q]);
  }
}

TEST_CASE("single-user rate formula") {
  const auto cfg = baseline_config();
  const double beta2 = 1e-8;

  SECTION("zero gain gives zero rate") {
    CHECK(rate_from_gain(beta2, 0.0, cfg) == 0.0);
  }
  SECTION("full gain matches the closed form") {
    const double expected = std::log2(
        1.0 + beta2 * cfg.transmit_power_w * cfg.n_antennas / cfg.noise_power());
    CHECK(rate_from_gain(beta2, cfg.n_antennas, cfg) ==
          Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("rate via the LoS channel equals the gain shortcut") {
  // Two computation paths: the full received-signal expression on a pure
  // LoS channel versus the aperture-gain shortcut.
  const auto cfg = baseline_config();
  const UserLocation loc{10.0, deg_to_rad(75.0)};
  const auto design = design_single_user(loc, cfg, TtdConfig::kHybrid, 80e-12);
  const auto rates = single_user_rate(loc, design, cfg);

  const auto freqs = subcarrier_frequencies(cfg);
  const int n_sub = cfg.n_sub();
  for (int m = 0; m < cfg.n_subcarriers; ++m) {
    const double beta2 =
        cfg.tx_gain * cfg.rx_gain / pathloss(freqs[m], loc.distance_m, cfg);
    // h = beta * conj(response); x = analog weights * digital scalar.
    const Eigen::VectorXcd response = array_response(freqs[m], loc, cfg);
    Eigen::VectorXcd weights(cfg.n_antennas);
    for (int n = 0; n < cfg.n_antennas; ++n)
      weights[n] = design.ps[n / n_sub][n % n_sub] *
                   std::polar(1.0, -2.0 * kPi * freqs[m] *
                                       design.cumulative[n / n_sub]);
    const double d_scalar =
        std::sqrt(cfg.transmit_power_w / cfg.n_antennas);
    const cplx rx = std::sqrt(beta2) *
                    (response.conjugate().adjoint() * weights)(0, 0) * d_scalar;
    const double full = std::log2(1.0 + std::norm(rx) / cfg.noise_power());
    CHECK(rates.per_subcarrier[m] == Approx(full).epsilon(1e-10));
  }
}
