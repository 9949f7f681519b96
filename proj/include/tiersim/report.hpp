#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "tiersim/baselines.hpp"
#include "tiersim/mercury.hpp"
#include "tiersim/scenario_io.hpp"
#include "tiersim/sim.hpp"

namespace tiersim {

struct AppReport {
  std::string app;
  std::string metric;  // "latency_ns" or "bandwidth_gbs"
  double slo_fraction = 0.0;
  double mean = 0.0;
  double p50 = 0.0;
  double p99 = 0.0;
  double migrated_gb = 0.0;
};

struct RunReport {
  std::string controller;
  double wall_time_ms = 0.0;
  std::vector<AppReport> apps;
};

struct ComparisonDelta {
  std::string controller;
  std::string versus;
  std::string app;
  double slo_fraction_delta = 0.0;
};

struct Report {
  int schema = 1;
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<RunReport> runs;
  std::vector<ComparisonDelta> deltas;
};

namespace detail {

inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  size_t rank = static_cast<size_t>(std::ceil(q * static_cast<double>(v.size())));
  rank = std::clamp<size_t>(rank, 1, v.size());
  return v[rank - 1];
}

}  // namespace detail

/// Per-app SLO satisfaction fraction over [from_s, horizon], used by the
/// evaluation harness for warm-up-aware measurements.
inline double slo_satisfaction(const Trace& t, const std::string& app, double from_s = 0.0) {
  std::int64_t met = 0, total = 0;
  for (const TickRecord& rec : t.records) {
    if (rec.time_s < from_s) continue;
    for (const AppTick& at : rec.apps) {
      if (at.app != app) continue;
      ++total;
      if (at.slo_met) ++met;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(met) / static_cast<double>(total);
}

/// Seconds of SLO-satisfying operation for an app.
inline double slo_satisfaction_time(const Trace& t, const std::string& app, double tick_s) {
  double s = 0.0;
  for (const TickRecord& rec : t.records) {
    for (const AppTick& at : rec.apps) {
      if (at.app == app && at.slo_met) s += tick_s;
    }
  }
  return s;
}

inline RunReport summarize_run(const ScenarioSpec& sc, const Trace& trace) {
  RunReport run;
  run.controller = trace.controller;
  for (const ScenarioApp& sa : sc.apps) {
    const AppSpec& spec = sa.spec;
    AppReport ar;
    ar.app = spec.id;
    ar.metric = to_string(spec.slo.kind);
    std::vector<double> series;
    double prev_local = -1.0;
    std::int64_t met = 0, total = 0;
    for (const TickRecord& rec : trace.records) {
      for (const AppTick& at : rec.apps) {
        if (at.app != spec.id) continue;
        ++total;
        if (at.slo_met) ++met;
        series.push_back(spec.slo.kind == SloKind::LatencyNs ? at.latency_ns : at.bw_gbs);
        if (prev_local >= 0.0) ar.migrated_gb += std::abs(at.resident_local_gb - prev_local);
        prev_local = at.resident_local_gb;
      }
    }
    ar.slo_fraction = total == 0 ? 0.0 : static_cast<double>(met) / static_cast<double>(total);
    if (!series.empty()) {
      double sum = 0.0;
      for (double v : series) sum += v;
      ar.mean = sum / static_cast<double>(series.size());
      ar.p50 = detail::percentile(series, 0.50);
      ar.p99 = detail::percentile(series, 0.99);
    }
    run.apps.push_back(std::move(ar));
  }
  return run;
}

inline json report_to_json(const Report& r) {
  json j;
  j["schema"] = r.schema;
  j["scenario"] = r.scenario;
  j["seed"] = r.seed;
  j["runs"] = json::array();
  for (const RunReport& run : r.runs) {
    json jr;
    jr["controller"] = run.controller;
    jr["wall_time_ms"] = run.wall_time_ms;
    jr["apps"] = json::array();
    for (const AppReport& ar : run.apps) {
      json ja;
      ja["app"] = ar.app;
      ja["metric"] = ar.metric;
      ja["slo_fraction"] = ar.slo_fraction;
      ja["mean"] = ar.mean;
      ja["p50"] = ar.p50;
      ja["p99"] = ar.p99;
      ja["migrated_gb"] = ar.migrated_gb;
      jr["apps"].push_back(std::move(ja));
    }
    j["runs"].push_back(std::move(jr));
  }
  j["deltas"] = json::array();
  for (const ComparisonDelta& d : r.deltas) {
    j["deltas"].push_back(json{{"controller", d.controller},
                               {"versus", d.versus},
                               {"app", d.app},
                               {"slo_fraction_delta", d.slo_fraction_delta}});
  }
  return j;
}

/// One row per (app, controller).
inline std::string report_to_csv_summary(const Report& r) {
  std::string out = "controller,app,metric,slo_fraction,mean,p50,p99,migrated_gb\n";
  char buf[256];
  for (const RunReport& run : r.runs) {
    for (const AppReport& ar : run.apps) {
      std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                    run.controller.c_str(), ar.app.c_str(), ar.metric.c_str(), ar.slo_fraction,
                    ar.mean, ar.p50, ar.p99, ar.migrated_gb);
      out += buf;
    }
  }
  return out;
}

enum class ReportFormat { Json, CsvSummary };

inline void emit_report(const Report& r, ReportFormat fmt, const std::string& path) {
  if (fmt == ReportFormat::Json) {
    write_text_file(path, report_to_json(r).dump(2) + "\n");
  } else {
    write_text_file(path, report_to_csv_summary(r));
  }
}

inline std::vector<std::string> known_controllers() {
  return {"mercury", "tpp", "colloid", "fcfs"};
}

inline std::unique_ptr<Controller> make_controller(const std::string& name,
                                                   const MachineSpec& machine) {
  if (name == "mercury") {
    return std::make_unique<MercuryController>(MercuryController::make(machine));
  }
  if (name == "tpp") return std::make_unique<TppController>();
  if (name == "colloid") return std::make_unique<ColloidController>();
  if (name == "fcfs") return std::make_unique<FcfsController>();
  throw SimError("unknown controller: " + name);
}

struct CompareResult {
  Report report;
  std::vector<Trace> traces;  // one per controller, input order
};

/// Runs every controller on the same scenario and seed. Runs execute in up
/// to `jobs` threads; outputs are deterministic regardless of thread count.
/// When out_dir is non-empty, writes trace_<controller>.csv and
/// actions_<controller>.jsonl per run plus report.json and report.csv.
inline CompareResult run_compare(const ScenarioSpec& sc,
                                 const std::vector<std::string>& controllers,
                                 const std::string& out_dir = "", unsigned jobs = 1) {
  if (controllers.empty()) throw SimError("run_compare needs at least one controller");
  struct Slot {
    Trace trace;
    std::vector<ActionLogEntry> log;
    double wall_ms = 0.0;
    std::string error;
  };
  std::vector<Slot> slots(controllers.size());

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= controllers.size()) return;
      auto t0 = std::chrono::steady_clock::now();
      try {
        std::unique_ptr<Controller> ctrl = make_controller(controllers[i], sc.machine);
        slots[i].trace = run_scenario(sc, *ctrl, sc.seed);
        slots[i].log = ctrl->action_log();
      } catch (const std::exception& e) {
        slots[i].error = std::string(controllers[i]) + ": " + e.what();
      }
      auto t1 = std::chrono::steady_clock::now();
      slots[i].wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
  };
  unsigned n_threads = std::max(1u, std::min<unsigned>(jobs, controllers.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  for (const Slot& s : slots) {
    if (!s.error.empty()) throw SimError(s.error);
  }

  CompareResult out;
  out.report.scenario = sc.name;
  out.report.seed = sc.seed;
  for (size_t i = 0; i < controllers.size(); ++i) {
    RunReport run = summarize_run(sc, slots[i].trace);
    run.wall_time_ms = slots[i].wall_ms;
    out.report.runs.push_back(std::move(run));
    out.traces.push_back(slots[i].trace);
  }
  const RunReport& base = out.report.runs.front();
  for (size_t i = 1; i < out.report.runs.size(); ++i) {
    const RunReport& run = out.report.runs[i];
    for (size_t a = 0; a < run.apps.size() && a < base.apps.size(); ++a) {
      out.report.deltas.push_back({run.controller, base.controller, run.apps[a].app,
                                   run.apps[a].slo_fraction - base.apps[a].slo_fraction});
    }
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    for (size_t i = 0; i < controllers.size(); ++i) {
      write_text_file(out_dir + "/trace_" + controllers[i] + ".csv",
                      trace_to_csv(slots[i].trace));
      write_text_file(out_dir + "/actions_" + controllers[i] + ".jsonl",
                      action_log_to_jsonl(slots[i].log));
    }
    emit_report(out.report, ReportFormat::Json, out_dir + "/report.json");
    emit_report(out.report, ReportFormat::CsvSummary, out_dir + "/report.csv");
  }
  return out;
}

}  // namespace tiersim
