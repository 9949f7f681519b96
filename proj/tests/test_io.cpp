#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <unistd.h>

#include "tiersim/report.hpp"
#include "tiersim/scenario_io.hpp"
#include "tiersim/scenarios.hpp"

using namespace tiersim;
using Catch::Approx;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("tiersim_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("a scenario without a machine key is a parse error") {
  TempDir tmp;
  write_text_file(tmp.file("bad.json"), R"({"apps": [], "horizon_s": 1.0})");
  CHECK_THROWS_AS(load_scenario(tmp.file("bad.json")), ParseError);
}

TEST_CASE("malformed JSON reports the line") {
  TempDir tmp;
  write_text_file(tmp.file("bad.json"), "{\n  \"machine\": {\n  oops\n}\n");
  try {
    load_scenario(tmp.file("bad.json"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("duplicate priorities surface as an aggregated validation failure") {
  TempDir tmp;
  ScenarioSpec sc = scenarios::fig03_sweep();
  sc.apps[1].spec.priority = sc.apps[0].spec.priority;
  write_text_file(tmp.file("dup.json"), scenario_to_json(sc).dump(2));
  try {
    load_scenario(tmp.file("dup.json"));
    FAIL("expected ValidationFailure");
  } catch (const ValidationFailure& e) {
    REQUIRE_FALSE(e.errors.empty());
    CHECK(e.errors[0].kind == ValidationError::Kind::DuplicatePriority);
  }
}

TEST_CASE("the bundled long-run file loads with its three SLOs") {
  TempDir tmp;
  write_text_file(tmp.file("fig13_longrun.json"),
                  scenario_to_json(scenarios::fig13_longrun()).dump(2));
  ScenarioSpec sc = load_scenario(tmp.file("fig13_longrun.json"));
  CHECK(sc.name == "fig13_longrun");
  REQUIRE(sc.apps.size() == 3);
  CHECK(sc.apps[0].spec.slo.value == 200.0);
  CHECK(sc.apps[1].spec.slo.value == 70.0);
  CHECK(sc.apps[2].spec.slo.value == 180.0);
}

TEST_CASE("scenario files in the repository match their builders") {
  // Keeps scenarios/*.json in sync with the programmatic definitions.
  std::filesystem::path dir = std::filesystem::path(__FILE__).parent_path().parent_path() /
                              "scenarios";
  for (const std::string& name : scenarios::bundled_names()) {
    std::filesystem::path file = dir / (name + ".json");
    INFO(file.string());
    REQUIRE(std::filesystem::exists(file));
    json on_disk = json::parse(read_text_file(file.string()));
    CHECK(on_disk == scenario_to_json(scenarios::by_name(name)));
  }
}

TEST_CASE("action log lines carry the exact schema") {
  ActionLogEntry e{7, "mercury", "set_mem_limit", "a", "local_mem_limit_gb", 4.0, 3.5,
                   "yield_mem:for=b"};
  json j = action_log_entry_to_json(e);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"tick", "actor", "action", "app", "field", "old",
                                         "new", "reason"});
}

TEST_CASE("run_compare writes traces, logs, and a versioned report") {
  TempDir tmp;
  ScenarioSpec sc = scenarios::fig03_sweep();
  sc.horizon_s = 4.0;
  CompareResult res = run_compare(sc, {"mercury", "tpp"}, tmp.file("out"), 1);
  CHECK(res.report.schema == 1);
  REQUIRE(res.report.runs.size() == 2);
  CHECK(std::filesystem::exists(tmp.file("out/trace_mercury.csv")));
  CHECK(std::filesystem::exists(tmp.file("out/actions_tpp.jsonl")));
  CHECK(std::filesystem::exists(tmp.file("out/report.json")));
  json j = json::parse(read_text_file(tmp.file("out/report.json")));
  CHECK(j.at("schema") == 1);
  CHECK(j.at("runs").size() == 2);
  // Deltas compare against the first controller.
  for (const ComparisonDelta& d : res.report.deltas) {
    CHECK(d.versus == "mercury");
  }
  std::string csv = report_to_csv_summary(res.report);
  size_t rows = std::count(csv.begin(), csv.end(), '\n');
  CHECK(rows == 1 + 2 * sc.apps.size());
}

TEST_CASE("comparison runs are deterministic across repeats and thread counts") {
  ScenarioSpec sc = scenarios::fig03_sweep();
  sc.horizon_s = 4.0;
  std::vector<std::string> ctrls = {"mercury", "tpp", "colloid", "fcfs"};
  CompareResult a = run_compare(sc, ctrls, "", 1);
  CompareResult b = run_compare(sc, ctrls, "", 4);
  REQUIRE(a.traces.size() == b.traces.size());
  for (size_t i = 0; i < a.traces.size(); ++i) {
    CHECK(trace_to_csv(a.traces[i]) == trace_to_csv(b.traces[i]));
  }
  // Reports agree on everything except wall time.
  json ja = report_to_json(a.report);
  json jb = report_to_json(b.report);
  for (auto& run : ja.at("runs")) run["wall_time_ms"] = 0.0;
  for (auto& run : jb.at("runs")) run["wall_time_ms"] = 0.0;
  CHECK(ja == jb);
}
