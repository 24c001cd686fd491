#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "edgeshare/scenario.hpp"
#include "edgeshare/serialization.hpp"

using namespace edgeshare;

TEST_CASE("path_loss_gain basics") {
  // reference distance returns beta0 for any exponent
  CHECK(path_loss_gain(1.0, 1e-3, 1.0, 3.0) == doctest::Approx(1e-3));
  CHECK(path_loss_gain(1.0, 1e-3, 1.0, 7.5) == doctest::Approx(1e-3));
  // zero exponent returns beta0 for any distance
  CHECK(path_loss_gain(123.0, 0.5, 1.0, 0.0) == doctest::Approx(0.5));
  // 350 m, -30 dB at 1 m, exponent 3: 1e-3 / 350^3
  const double expected = 1e-3 / (350.0 * 350.0 * 350.0);
  CHECK(path_loss_gain(350.0, 1e-3, 1.0, 3.0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(2.332e-11).epsilon(1e-3));

  CHECK_THROWS_AS(path_loss_gain(0.0, 1e-3, 1.0, 3.0), std::domain_error);
  CHECK_THROWS_AS(path_loss_gain(-5.0, 1e-3, 1.0, 3.0), std::domain_error);
}

TEST_CASE("path_loss_gain strictly decreasing in distance for alpha > 0") {
  double prev = path_loss_gain(10.0, 1e-3, 1.0, 3.0);
  for (double d = 20.0; d <= 1000.0; d += 10.0) {
    const double g = path_loss_gain(d, 1e-3, 1.0, 3.0);
    CHECK(g < prev);
    prev = g;
  }
}

TEST_CASE("paper scenario parameters") {
  Scenario s = build_paper_scenario();
  CHECK(s.K() == 6);
  CHECK(s.params.sample_bits_a == 6276.0);
  CHECK(s.params.model_bits_Q == 3.2e9);
  CHECK(s.params.flops_per_sample_L == 6e9);
  CHECK(s.params.local_iters_N == 5);
  CHECK(s.params.bandwidth_B == 1e6);
  CHECK(s.params.noise_psd_n0 == doctest::Approx(1e-16));
  CHECK(s.params.server_power_Ps == doctest::Approx(19.95).epsilon(1e-3));
  for (const auto& d : s.devices) {
    CHECK(d.initial_samples == 5000);
    CHECK(d.tx_power_P == doctest::Approx(1.995).epsilon(1e-3));
    CHECK(d.gain_to_server_g == doctest::Approx(2.332e-11).epsilon(1e-3));
  }
  CHECK(s.devices[0].flops_per_cycle_C == 8);
  CHECK(s.devices[5].flops_per_cycle_C == 16);
  CHECK(s.devices[2].cpu_freq_f == doctest::Approx(1.95e9));
  // D2D gains valid and symmetric (same pairwise distances both ways)
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      if (i == j) continue;
      CHECK(s.d2d.at(i, j) > 0.0);
      CHECK(s.d2d.at(i, j) <= 1.0);
      CHECK(s.d2d.at(i, j) == doctest::Approx(s.d2d.at(j, i)));
    }
}

TEST_CASE("non-IID partition") {
  auto hists = make_noniid_partition(6, 10, 5000, 2, 42);
  REQUIRE(hists.size() == 6);
  for (const auto& h : hists) {
    int nonzero = 0;
    for (auto v : h)
      if (v > 0) {
        CHECK(v == 2500);
        ++nonzero;
      }
    CHECK(nonzero == 2);
  }

  SUBCASE("IID limit") {
    auto uniform = make_noniid_partition(4, 10, 5000, 10, 7);
    for (const auto& h : uniform)
      for (auto v : h) CHECK(v == 500);
  }

  SUBCASE("determinism") {
    auto again = make_noniid_partition(6, 10, 5000, 2, 42);
    CHECK(hists == again);
    auto other = make_noniid_partition(6, 10, 5000, 2, 43);
    CHECK(hists != other);
  }

  SUBCASE("sample conservation") {
    std::int64_t total = 0;
    for (const auto& h : hists)
      for (auto v : h) total += v;
    CHECK(total == 6 * 5000);
  }

  SUBCASE("infeasible divisibility") {
    CHECK_THROWS_AS(make_noniid_partition(6, 10, 5001, 2, 1), config_error);
    CHECK_THROWS_AS(make_noniid_partition(6, 10, 5000, 11, 1), config_error);
  }
}

TEST_CASE("scenario JSON round trip is exact") {
  Scenario s = build_paper_scenario();
  s.devices[0].label_histogram = std::vector<std::int64_t>(10, 500);
  const auto path = std::filesystem::temp_directory_path() / "edgeshare_roundtrip.json";
  save_scenario(s, path.string());
  Scenario loaded = load_scenario(path.string());
  CHECK(loaded == s);
  std::filesystem::remove(path);

  Scenario r = random_scenario(4, 99);
  save_scenario(r, path.string());
  CHECK(load_scenario(path.string()) == r);
  std::filesystem::remove(path);
}

TEST_CASE("scenario load rejects invariant violations with named fields") {
  Scenario s = build_paper_scenario();
  auto j = to_json(s);

  SUBCASE("K = 1") {
    j["devices"] = nlohmann::json::array({j["devices"][0]});
    j["d2d_gains"] = nlohmann::json::array({nlohmann::json::array({0.0})});
    CHECK_THROWS_WITH_AS(scenario_from_json(j), doctest::Contains("K >= 2"), config_error);
  }

  SUBCASE("negative bandwidth") {
    j["params"]["bandwidth_B"] = -1.0;
    CHECK_THROWS_WITH_AS(scenario_from_json(j), doctest::Contains("bandwidth_B"), config_error);
  }

  SUBCASE("dbm power forms accepted") {
    j["params"]["server_power_Ps"] = {{"dbm", 43.0}};
    j["devices"][0]["tx_power_P"] = {{"dbm", 33.0}};
    j["params"]["noise_psd_n0"] = {{"dbm_per_hz", -130.0}};
    Scenario parsed = scenario_from_json(j);
    CHECK(parsed.params.server_power_Ps == doctest::Approx(dbm_to_watts(43.0)));
    CHECK(parsed.devices[0].tx_power_P == doctest::Approx(dbm_to_watts(33.0)));
    CHECK(parsed.params.noise_psd_n0 == doctest::Approx(1e-16));
  }

  SUBCASE("histogram mismatch") {
    j["devices"][1]["label_histogram"] = {1, 2, 3};
    CHECK_THROWS_WITH_AS(scenario_from_json(j), doctest::Contains("label_histogram"), config_error);
  }
}
