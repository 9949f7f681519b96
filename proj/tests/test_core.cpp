#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "tiersim/core.hpp"
#include "tiersim/scenario_io.hpp"
#include "tiersim/scenarios.hpp"

using namespace tiersim;

namespace {

bool has_error(const std::vector<ValidationError>& errs, ValidationError::Kind kind,
               const std::string& subject) {
  for (const ValidationError& e : errs) {
    if (e.kind == kind && e.subject == subject) return true;
  }
  return false;
}

ScenarioSpec two_app_scenario() {
  ScenarioSpec sc;
  sc.name = "t";
  sc.apps.push_back({scenarios::ls_app("a", 3, 8.0, 1e7, 150.0), 0.0});
  sc.apps.push_back({scenarios::bi_app("b", 1, 16.0, 80.0, 40.0), 1.0});
  sc.horizon_s = 5.0;
  return sc;
}

}  // namespace

TEST_CASE("duplicate priorities are rejected and name the app") {
  ScenarioSpec sc = two_app_scenario();
  sc.apps[1].spec.priority = 3;
  auto errs = validate_scenario(sc);
  CHECK(has_error(errs, ValidationError::Kind::DuplicatePriority, "b"));
}

TEST_CASE("SLO kind must match the app class") {
  ScenarioSpec sc = two_app_scenario();
  sc.apps[0].spec.slo = {SloKind::BandwidthGBs, 40.0};
  auto errs = validate_scenario(sc);
  CHECK(has_error(errs, ValidationError::Kind::SloKindMismatch, "a"));
}

TEST_CASE("non-positive quantities are flagged per app") {
  ScenarioSpec sc = two_app_scenario();
  sc.apps[1].spec.wss_gb = 0.0;
  auto errs = validate_scenario(sc);
  CHECK(has_error(errs, ValidationError::Kind::NonPositiveQuantity, "b"));
}

TEST_CASE("the bundled long-run scenario validates with its stated SLOs") {
  ScenarioSpec sc = scenarios::fig13_longrun();
  REQUIRE(sc.apps.size() == 3);
  CHECK(sc.apps[0].spec.slo.value == 200.0);
  CHECK(sc.apps[0].spec.slo.kind == SloKind::LatencyNs);
  CHECK(sc.apps[1].spec.slo.value == 70.0);
  CHECK(sc.apps[1].spec.slo.kind == SloKind::BandwidthGBs);
  CHECK(sc.apps[2].spec.slo.value == 180.0);
  CHECK(validate_scenario(sc).empty());
}

TEST_CASE("all bundled scenarios validate") {
  for (const std::string& name : scenarios::bundled_names()) {
    INFO(name);
    CHECK(validate_scenario(scenarios::by_name(name)).empty());
  }
}

TEST_CASE("generated scenarios validate and round-trip through JSON") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> wss(1.0, 40.0);
  std::uniform_real_distribution<double> lat(110.0, 220.0);
  std::uniform_real_distribution<double> dmd(5.0, 180.0);
  std::uniform_int_distribution<int> nd(1, 5);
  for (int trial = 0; trial < 50; ++trial) {
    ScenarioSpec sc;
    sc.name = "gen";
    sc.horizon_s = 4.0;
    int n = nd(rng);
    std::vector<int> prios(static_cast<size_t>(n));
    std::iota(prios.begin(), prios.end(), 1);
    std::shuffle(prios.begin(), prios.end(), rng);
    for (int i = 0; i < n; ++i) {
      std::string id = "app" + std::to_string(i);
      if (rng() % 2 == 0) {
        sc.apps.push_back({scenarios::ls_app(id, prios[i], wss(rng), 1e7, lat(rng)), 0.5 * i});
      } else {
        double d = dmd(rng);
        sc.apps.push_back({scenarios::bi_app(id, prios[i], wss(rng), d, 0.5 * d), 0.5 * i});
      }
    }
    auto errs = validate_scenario(sc);
    REQUIRE(errs.empty());

    json j = scenario_to_json(sc);
    ScenarioSpec back = scenario_from_json(j, sc.name);
    CHECK(scenario_to_json(back) == j);
    CHECK(validate_scenario(back).empty());

    // Priorities form a strict total order across the admitted set.
    std::vector<int> ps;
    for (const ScenarioApp& sa : sc.apps) ps.push_back(sa.spec.priority);
    std::sort(ps.begin(), ps.end());
    for (size_t i = 1; i < ps.size(); ++i) CHECK(ps[i - 1] < ps[i]);
  }
}
