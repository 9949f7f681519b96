#pragma once

#include <string>
#include <vector>

#include "tiersim/core.hpp"

namespace tiersim::scenarios {

inline double access_rate_for_bw(double bw_gbs) {
  return bw_gbs / (kBytesPerAccess * kGbPerByte);
}

inline AppSpec ls_app(std::string id, int priority, double wss_gb, double access_rate,
                      double slo_latency_ns) {
  AppSpec a;
  a.id = std::move(id);
  a.cls = AppClass::LS;
  a.priority = priority;
  a.wss_gb = wss_gb;
  a.demand_bw_gbs = 0.0;
  a.access_rate = access_rate;
  a.slo = {SloKind::LatencyNs, slo_latency_ns};
  return a;
}

inline AppSpec bi_app(std::string id, int priority, double wss_gb, double demand_bw_gbs,
                      double slo_bw_gbs) {
  AppSpec a;
  a.id = std::move(id);
  a.cls = AppClass::BI;
  a.priority = priority;
  a.wss_gb = wss_gb;
  a.demand_bw_gbs = demand_bw_gbs;
  a.access_rate = access_rate_for_bw(demand_bw_gbs);
  a.slo = {SloKind::BandwidthGBs, slo_bw_gbs};
  return a;
}

inline WorkloadPhase bi_phase(double start_s, double demand_bw_gbs, double wss_gb) {
  return {start_s, demand_bw_gbs, wss_gb, access_rate_for_bw(demand_bw_gbs)};
}

/// A latency probe pinned local while a bandwidth generator roams the slow
/// tier: the interference dip-then-spike setup.
inline ScenarioSpec fig03_sweep() {
  ScenarioSpec sc;
  sc.name = "fig03_sweep";
  sc.machine = MachineSpec{};
  ScenarioApp probe{ls_app("probe", 2, 4.0, 1e7, 250.0), 0.0};
  ScenarioApp streamer{bi_app("streamer", 1, 40.0, 150.0, 40.0), 0.0};
  sc.apps = {probe, streamer};
  sc.horizon_s = 10.0;
  sc.tick_s = 0.2;
  sc.seed = 1;
  return sc;
}

/// The self-migration setup: the generator holds the fast tier while the
/// probe would have to move itself to the slow tier.
inline ScenarioSpec fig05_sweep() {
  ScenarioSpec sc;
  sc.name = "fig05_sweep";
  sc.machine = MachineSpec{};
  ScenarioApp streamer{bi_app("streamer", 2, 40.0, 150.0, 140.0), 0.0};
  ScenarioApp probe{ls_app("probe", 1, 4.0, 1e7, 200.0), 0.0};
  sc.apps = {streamer, probe};
  sc.horizon_s = 10.0;
  sc.tick_s = 0.2;
  sc.seed = 1;
  return sc;
}

/// Three-tenant adaptation drill: a batch generator surges under two
/// latency-sensitive tenants of different priorities.
inline ScenarioSpec fig07_adaptation() {
  ScenarioSpec sc;
  sc.name = "fig07_adaptation";
  sc.machine = MachineSpec{};
  sc.machine.local_capacity_gb = 30.0;
  sc.machine.cxl_capacity_gb = 120.0;
  AppSpec batch = bi_app("batch", 1, 20.0, 40.0, 35.0);
  batch.phases = {bi_phase(8.0, 120.0, 20.0), bi_phase(20.0, 40.0, 20.0)};
  ScenarioApp a1{batch, 0.0};
  ScenarioApp a2{ls_app("cache", 2, 10.0, 5e7, 170.0), 0.0};
  ScenarioApp a3{ls_app("frontend", 3, 12.0, 1e8, 130.0), 2.0};
  sc.apps = {a1, a2, a3};
  sc.horizon_s = 30.0;
  sc.tick_s = 0.2;
  sc.seed = 3;
  return sc;
}

/// Mixed contention: memory pressure and bandwidth interference at once on a
/// 40 GB fast tier (working sets 40/40/20). The generator streams at high
/// bandwidth but touches pages rarely, so hotness tiering favors the
/// latency tenants' pages instead of its own.
inline ScenarioSpec fig10_mixed() {
  ScenarioSpec sc;
  sc.name = "fig10_mixed";
  sc.machine = MachineSpec{};
  sc.machine.local_capacity_gb = 40.0;
  sc.machine.cxl_capacity_gb = 160.0;
  ScenarioApp redis{ls_app("redis", 3, 40.0, 1e8, 180.0), 0.0};
  AppSpec llama = bi_app("llama", 2, 40.0, 110.0, 20.0);
  llama.access_rate = 5e7;  // streaming: high bandwidth, cool pages
  ScenarioApp vectordb{ls_app("vectordb", 1, 20.0, 1e7, 150.0), 0.4};
  sc.apps = {redis, ScenarioApp{llama, 0.2}, vectordb};
  sc.horizon_s = 60.0;
  sc.tick_s = 0.2;
  sc.seed = 5;
  return sc;
}

/// A bandwidth surge against a latency tenant: demote the generator, trip
/// the remote-fault guard, throttle its CPU, then restore it after the
/// surge.
inline ScenarioSpec fig12_dynamic_bw() {
  ScenarioSpec sc;
  sc.name = "fig12_dynamic_bw";
  sc.machine = MachineSpec{};
  sc.machine.local_capacity_gb = 70.0;
  sc.machine.cxl_capacity_gb = 280.0;
  sc.machine.migration_rate_gbs = 4.0;
  ScenarioApp redis{ls_app("redis", 2, 20.0, 1e8, 120.0), 0.0};
  AppSpec llama = bi_app("llama", 1, 40.0, 40.0, 30.0);
  llama.phases = {bi_phase(25.0, 150.0, 40.0), bi_phase(35.0, 40.0, 40.0)};
  sc.apps = {redis, ScenarioApp{llama, 0.0}};
  sc.horizon_s = 45.0;
  sc.tick_s = 0.2;
  sc.seed = 12;
  return sc;
}

/// Long-running mix: a bandwidth surge, a departure, a late arrival, and a
/// growing working set on a 70 GB fast tier.
inline ScenarioSpec fig13_longrun() {
  ScenarioSpec sc;
  sc.name = "fig13_longrun";
  sc.machine = MachineSpec{};
  sc.machine.local_capacity_gb = 70.0;
  sc.machine.cxl_capacity_gb = 280.0;
  AppSpec redis = ls_app("redis", 3, 30.0, 1e8, 200.0);
  for (int i = 1; i <= 10; ++i) {
    // Working set climbs 30 -> 60 GB shortly after the surge ends.
    redis.phases.push_back({112.0 + i, 0.0, 30.0 + 3.0 * i, 1e8});
  }
  AppSpec llama = bi_app("llama", 2, 40.0, 70.0, 70.0);
  llama.phases = {bi_phase(10.0, 150.0, 40.0)};
  AppSpec vectordb = ls_app("vectordb", 1, 40.0, 2e8, 180.0);
  sc.apps = {ScenarioApp{redis, 0.0}, ScenarioApp{llama, 0.0}, ScenarioApp{vectordb, 110.0}};
  sc.events = {{110.0, EventSpec::Kind::Departure, "llama", std::nullopt}};
  sc.horizon_s = 125.0;
  sc.tick_s = 0.2;
  sc.seed = 13;
  return sc;
}

inline std::vector<std::string> bundled_names() {
  return {"fig03_sweep", "fig05_sweep",     "fig07_adaptation",
          "fig10_mixed", "fig12_dynamic_bw", "fig13_longrun"};
}

inline ScenarioSpec by_name(const std::string& name) {
  if (name == "fig03_sweep") return fig03_sweep();
  if (name == "fig05_sweep") return fig05_sweep();
  if (name == "fig07_adaptation") return fig07_adaptation();
  if (name == "fig10_mixed") return fig10_mixed();
  if (name == "fig12_dynamic_bw") return fig12_dynamic_bw();
  if (name == "fig13_longrun") return fig13_longrun();
  throw SimError("unknown bundled scenario: " + name);
}

}  // namespace tiersim::scenarios
