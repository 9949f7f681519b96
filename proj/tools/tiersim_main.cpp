#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tiersim/tiersim.hpp"

namespace {

using namespace tiersim;

/// --scenario accepts a file path or a bundled scenario name.
ScenarioSpec resolve_scenario(const std::string& ref) {
  if (std::filesystem::exists(ref)) {
    return load_scenario(ref);
  }
  ScenarioSpec sc = scenarios::by_name(ref);
  std::vector<ValidationError> errs = validate_scenario(sc);
  if (!errs.empty()) throw ValidationFailure(std::move(errs));
  return sc;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

int cmd_validate(const std::string& ref) {
  ScenarioSpec sc = resolve_scenario(ref);
  std::cout << "ok: " << sc.name << " (" << sc.apps.size() << " apps, horizon " << sc.horizon_s
            << " s, tick " << sc.tick_s << " s)\n";
  return 0;
}

int cmd_profile(const std::string& ref, std::string app_id) {
  ScenarioSpec sc = resolve_scenario(ref);
  if (app_id.empty()) {
    if (sc.apps.size() != 1) {
      std::cerr << "scenario has " << sc.apps.size() << " apps; pick one with --app\n";
      return 2;
    }
    app_id = sc.apps[0].spec.id;
  }
  const AppSpec* spec = nullptr;
  for (const ScenarioApp& sa : sc.apps) {
    if (sa.spec.id == app_id) spec = &sa.spec;
  }
  if (!spec) {
    std::cerr << "no app '" << app_id << "' in scenario\n";
    return 2;
  }
  ProfileResult r = profile_app(*spec, sc.machine);
  json j;
  j["admissible"] = r.admissible;
  if (r.mem_limit_gb) j["mem_limit_gb"] = *r.mem_limit_gb;
  if (r.bw_gbs) j["bw_gbs"] = *r.bw_gbs;
  if (r.cpu_util) j["cpu_util"] = *r.cpu_util;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_calibrate(const std::string& ref) {
  MachineSpec machine = ref.empty() ? MachineSpec{} : resolve_scenario(ref).machine;
  Thresholds t = calibrate_thresholds(machine);
  json j;
  j["thresh_local_bw_gbs"] = t.thresh_local_bw_gbs;
  j["thresh_numa"] = t.thresh_numa;
  std::cout << j.dump(2) << "\n";
  return 0;
}

void print_report(const Report& report) {
  for (const RunReport& run : report.runs) {
    std::printf("%-8s", run.controller.c_str());
    for (const AppReport& ar : run.apps) {
      std::printf("  %s slo=%.3f %s=%.4g", ar.app.c_str(), ar.slo_fraction, ar.metric.c_str(),
                  ar.mean);
    }
    std::printf("\n");
  }
}

int cmd_run(const std::string& ref, const std::string& controllers_csv, std::uint64_t seed,
            bool seed_set, const std::string& out, double tick, bool tick_set, unsigned jobs) {
  ScenarioSpec sc = resolve_scenario(ref);
  if (seed_set) sc.seed = seed;
  if (tick_set) sc.tick_s = tick;
  std::vector<std::string> controllers = split_list(controllers_csv);
  if (controllers.empty()) controllers = {"mercury"};
  CompareResult res = run_compare(sc, controllers, out, jobs);
  print_report(res.report);
  if (!out.empty()) std::cout << "wrote " << out << "/report.json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-tier memory QoS simulator"};
  app.require_subcommand(1);

  std::string scenario_ref, app_id, controllers = "mercury", out_dir;
  std::uint64_t seed = 0;
  double tick = 0.2;
  unsigned jobs = 1;
  std::string format = "json";

  auto* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("--scenario", scenario_ref, "Scenario path or bundled name")->required();

  auto* profile = app.add_subcommand("profile", "Profile one app in isolation");
  profile->add_option("--scenario", scenario_ref)->required();
  profile->add_option("--app", app_id, "App id (defaults to the only app)");

  auto* calibrate = app.add_subcommand("calibrate", "Derive the interference thresholds");
  calibrate->add_option("--scenario", scenario_ref, "Machine source (defaults built in)");

  auto* run = app.add_subcommand("run", "Run one scenario under one controller");
  run->add_option("--scenario", scenario_ref)->required();
  CLI::Option* run_ctrl = run->add_option("--controller", controllers, "Controller name");
  CLI::Option* run_seed = run->add_option("--seed", seed);
  run->add_option("--out", out_dir, "Output directory for trace/log/report");
  CLI::Option* run_tick = run->add_option("--tick", tick, "Tick length in seconds");

  auto* compare = app.add_subcommand("compare", "Run several controllers on one scenario");
  compare->add_option("--scenario", scenario_ref)->required();
  CLI::Option* cmp_ctrl =
      compare->add_option("--controller", controllers, "Comma-separated controller names");
  CLI::Option* cmp_seed = compare->add_option("--seed", seed);
  compare->add_option("--out", out_dir)->required();
  CLI::Option* cmp_tick = compare->add_option("--tick", tick);
  compare->add_option("--jobs", jobs, "Parallel runs");
  compare->add_option("--report-format", format, "json or csv-summary")
      ->check(CLI::IsMember({"json", "csv-summary"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return cmd_validate(scenario_ref);
    if (profile->parsed()) return cmd_profile(scenario_ref, app_id);
    if (calibrate->parsed()) return cmd_calibrate(scenario_ref);
    if (run->parsed()) {
      return cmd_run(scenario_ref, run_ctrl->count() ? controllers : "mercury", seed,
                     run_seed->count() > 0, out_dir, tick, run_tick->count() > 0, 1);
    }
    if (compare->parsed()) {
      int rc = cmd_run(scenario_ref, cmp_ctrl->count() ? controllers : "mercury,tpp", seed,
                       cmp_seed->count() > 0, out_dir, tick, cmp_tick->count() > 0, jobs);
      if (rc == 0 && format == "csv-summary") {
        std::cout << "summary: " << out_dir << "/report.csv\n";
      }
      return rc;
    }
  } catch (const tiersim::ValidationFailure& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
