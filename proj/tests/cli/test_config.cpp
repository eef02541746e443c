#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "qnd/config.hpp"
#include "qnd/scenarios.hpp"

using namespace qnd;
using doctest::Approx;
using nlohmann::json;

namespace {

const std::filesystem::path kRoot = QND_SOURCE_DIR;

json default_json() {
  std::ifstream in(kRoot / "configs/reference.json");
  return json::parse(in);
}

std::vector<std::string> violations_of(const json& j) {
  try {
    parse_config(j, kRoot / "configs");
  } catch (const ConfigError& e) {
    return e.violations();
  }
  return {};
}

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
  return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("shipped default resolves to the reference parameters") {
    const auto c = load_config(kRoot / "configs/reference.json");
    CHECK(c.n_trials == 10000);
    CHECK(c.probe.quantum_efficiency == 0.43);
    CHECK(c.pulse.composite_pi_infidelity + c.mu_lock == Approx(0.02));
    const auto m = build_model(c);
    CHECK(m.coupling.antinode_cooperativity == Approx(0.203).epsilon(0.007 / 0.203));
    CHECK(m.coupling.domega_dn == Approx(4.5e-5).epsilon(0.2 / 4.5));
    CHECK(m.n0 == Approx(3.3e4).epsilon(0.01));
    CHECK(m.engine.total_mu() == Approx(0.02));
    CHECK(m.engine.prep.initial_contrast == 0.71);
    CHECK(m.engine.probe.photons_per_measurement == 6.4e5);
  }

  TEST_CASE("resolved config round-trips") {
    const auto c = load_config(kRoot / "configs/reference.json");
    const auto j = resolved_config(c);
    const auto again = parse_config(j, kRoot);
    CHECK(resolved_config(again) == j);
    CHECK(config_hash(again) == config_hash(c));
  }

  TEST_CASE("empty object takes defaults") {
    const auto c = parse_config(json::object(), kRoot);
    CHECK(c.resonator.probe.finesse == ResonatorParams::reference_setup().probe.finesse);
    CHECK(c.master_seed == 1);
  }

  TEST_CASE("missing linewidth is named") {
    auto j = default_json();
    j["resonator"]["probe"].erase("linewidth_hz");
    const auto v = violations_of(j);
    REQUIRE(v.size() == 1);
    CHECK(mentions(v, "resonator.probe.linewidth_hz"));
  }

  TEST_CASE("negative trial count is rejected") {
    auto j = default_json();
    j["run"]["n_trials"] = -5;
    CHECK(mentions(violations_of(j), "run.n_trials"));
  }

  TEST_CASE("all violations are collected") {
    auto j = default_json();
    j["run"]["n_trials"] = 1;
    j["probe"]["quantum_efficiency"] = "high";
    j["scenario"]["photon_grid"] = json::array();
    j["ensemble"]["colour"] = "blue";
    j["contrast"]["c0"] = 1.5;
    const auto v = violations_of(j);
    CHECK(v.size() >= 5);
    CHECK(mentions(v, "run.n_trials"));
    CHECK(mentions(v, "probe.quantum_efficiency"));
    CHECK(mentions(v, "scenario.photon_grid"));
    CHECK(mentions(v, "ensemble.colour: unknown key"));
    CHECK(mentions(v, "contrast.c0"));
  }

  TEST_CASE("referenced files must exist") {
    auto j = default_json();
    j["constants_file"] = "no_such_table.json";
    CHECK(mentions(violations_of(j), "constants_file: file not found"));
  }

  TEST_CASE("malformed file") {
    const auto p = std::filesystem::temp_directory_path() / "qnd_malformed.json";
    std::ofstream(p) << "{\"run\": ";
    CHECK_THROWS_AS(load_config(p), ConfigError);
    CHECK_THROWS_AS(load_config(p.string() + ".missing"), ConfigError);
  }

  TEST_CASE("effective atom number override and rescaling") {
    auto j = default_json();
    j["ensemble"]["effective_atom_number"] = 2e4;
    const auto m = build_model(parse_config(j, kRoot / "configs"));
    CHECK(m.n0 == 2e4);
    const auto e = engine_at(m, 3e5, 1e4);
    CHECK(e.n0 == 1e4);
    CHECK(e.probe.photons_per_measurement == 3e5);
    CHECK(e.domega_dn == m.engine.domega_dn);
  }

  TEST_CASE("contrast model") {
    ContrastSpec s;
    CHECK(s.at(0.0) == 0.69);
    CHECK(s.at(3e5) == Approx(0.69 * std::exp(-0.21 - 0.5 * 9e-13 * 9e10)));
  }
}
