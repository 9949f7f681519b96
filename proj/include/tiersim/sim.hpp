#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tiersim/controller.hpp"
#include "tiersim/core.hpp"
#include "tiersim/perfmodel.hpp"

namespace tiersim {

struct AppTick {
  std::string app;
  double latency_ns = 0.0;  // EMA of the sampled latency
  double bw_gbs = 0.0;      // EMA of the achieved bandwidth
  double resident_local_gb = 0.0;
  double resident_cxl_gb = 0.0;
  double cpu_cap = 1.0;
  bool slo_met = false;
  double numa_fault_rate = 0.0;  // faults/s for this app
};

struct TickRecord {
  std::int64_t tick = 0;
  double time_s = 0.0;
  std::vector<AppTick> apps;
  double local_bw_total_gbs = 0.0;  // granted fast-tier bandwidth this tick
  double cxl_bw_total_gbs = 0.0;
  double offered_cxl_gbs = 0.0;
  double rho_local = 0.0;
  double rho_cxl = 0.0;
};

/// Live per-app simulation state.
struct AppRuntime {
  AppSpec spec;        // current-phase demand/wss/access_rate
  double arrival_s = 0.0;
  Allocation alloc;    // controlled resources
  double resident_local_gb = 0.0;
  double resident_cxl_gb = 0.0;
  double ema_latency_ns = std::numeric_limits<double>::quiet_NaN();
  double ema_bw_gbs = std::numeric_limits<double>::quiet_NaN();
  std::vector<WorkloadPhase> pending_phases;  // absolute at_s, sorted

  double wss() const { return spec.wss_gb; }
  double p_now() const { return cxl_fraction(spec.wss_gb, resident_local_gb); }
  double p_target() const {
    return cxl_fraction(spec.wss_gb, std::min(spec.wss_gb, alloc.local_mem_limit_gb));
  }
  double placement_target() const { return std::min(spec.wss_gb, alloc.local_mem_limit_gb); }
  bool demoting() const { return resident_local_gb > placement_target() + kEps; }
  bool promoting() const { return resident_local_gb < placement_target() - kEps; }
  bool migrating() const { return demoting() || promoting(); }
};

inline constexpr double kEmaAlpha = 0.5;

/// Discrete-time engine: placement dynamics under per-app limits, arrival /
/// departure / phase events, and per-tick metric sampling.
class SimState {
 public:
  SimState(const MachineSpec& machine, double tick_s, std::uint64_t seed)
      : machine_(machine), tick_s_(tick_s), seed_(seed) {}

  const MachineSpec& machine() const { return machine_; }
  double tick_s() const { return tick_s_; }
  std::uint64_t seed() const { return seed_; }
  std::int64_t tick_index() const { return tick_index_; }
  double clock_s() const { return static_cast<double>(tick_index_) * tick_s_; }

  const std::vector<AppRuntime>& apps() const { return apps_; }
  std::vector<AppRuntime>& apps() { return apps_; }

  const std::optional<Thresholds>& thresholds() const { return thresholds_; }
  void set_thresholds(const Thresholds& t) { thresholds_ = t; }

  AppRuntime* find(const std::string& id) {
    for (AppRuntime& a : apps_)
      if (a.spec.id == id) return &a;
    return nullptr;
  }
  const AppRuntime* find(const std::string& id) const {
    return const_cast<SimState*>(this)->find(id);
  }
  AppRuntime& require(const std::string& id) {
    AppRuntime* a = find(id);
    if (!a) throw UnknownAppError(id);
    return *a;
  }

  double free_local_capacity() const {
    double used = 0.0;
    for (const AppRuntime& a : apps_) used += a.resident_local_gb;
    return std::max(0.0, machine_.local_capacity_gb - used);
  }
  double free_cxl_capacity() const {
    double used = 0.0;
    for (const AppRuntime& a : apps_) used += a.resident_cxl_gb;
    return std::max(0.0, machine_.cxl_capacity_gb - used);
  }

  /// Schedules arrivals, departures and phase changes of a scenario.
  void load_events(const ScenarioSpec& sc) {
    for (const ScenarioApp& sa : sc.apps) {
      push_event({sa.arrival_s, SimEvent::Kind::Arrival, sa.spec.id, sa.spec, std::nullopt});
      for (const WorkloadPhase& ph : sa.spec.phases) {
        push_event({sa.arrival_s + ph.start_s, SimEvent::Kind::PhaseChange, sa.spec.id,
                    std::nullopt, ph});
      }
    }
    for (const EventSpec& ev : sc.events) {
      if (ev.kind == EventSpec::Kind::Departure) {
        push_event({ev.at_s, SimEvent::Kind::Departure, ev.app, std::nullopt, std::nullopt});
      } else if (ev.phase) {
        push_event({ev.at_s, SimEvent::Kind::PhaseChange, ev.app, std::nullopt, *ev.phase});
      }
    }
    sort_events();
  }

  /// Registers an app mid-run (used for arrival events). Placement happens
  /// after the controller had the chance to set an allocation.
  AppRuntime& add_app(const AppSpec& spec, double arrival_s) {
    if (find(spec.id)) throw SimError("app already present: " + spec.id);
    AppRuntime rt;
    rt.spec = spec;
    rt.spec.phases.clear();
    rt.arrival_s = arrival_s;
    rt.alloc = Allocation{spec.wss_gb, 1.0};
    apps_.push_back(std::move(rt));
    return apps_.back();
  }

  /// Fast-tier-first initial placement under the current limit.
  void init_placement(const std::string& id) {
    AppRuntime& a = require(id);
    double want_local = std::min(a.wss(), a.alloc.local_mem_limit_gb);
    a.resident_local_gb = std::min(want_local, free_local_capacity());
    a.resident_cxl_gb = a.wss() - a.resident_local_gb;
  }

  void remove_app(const std::string& id) {
    for (auto it = apps_.begin(); it != apps_.end(); ++it) {
      if (it->spec.id == id) {
        apps_.erase(it);
        return;
      }
    }
    throw UnknownAppError(id);
  }

  /// Applies a new allocation. A lower memory limit queues demotion of the
  /// excess; a higher one lets promotion refill as capacity allows. The CPU
  /// cap takes effect on the next tick's offered load.
  void apply_allocation(const std::string& id, const Allocation& alloc) {
    AppRuntime& a = require(id);
    Allocation v = alloc;
    // The limit may exceed the current working set (it caps, not sizes,
    // residency); the effective target is min(wss, limit).
    v.local_mem_limit_gb = std::max(v.local_mem_limit_gb, 0.0);
    v.cpu_util_cap = std::clamp(v.cpu_util_cap, 0.0, 1.0);
    a.alloc = v;
  }

  double numa_fault_rate(const std::string& id) const {
    const AppRuntime* a = find(id);
    if (!a) throw UnknownAppError(id);
    return machine_.fault_coeff * a->p_now() * a->spec.access_rate;
  }

  /// Fault rate that counts against the inter-tier threshold: accesses to
  /// slow-tier memory of apps whose pages are being demoted right now.
  double system_numa_fault_rate() const {
    double sum = 0.0;
    for (const AppRuntime& a : apps_) {
      if (a.demoting()) sum += machine_.fault_coeff * a.p_now() * a.spec.access_rate;
    }
    return sum;
  }

  bool any_migration_in_flight() const {
    for (const AppRuntime& a : apps_) {
      if (a.migrating()) return true;
    }
    return false;
  }

  /// One simulation step: fire due events, drain migrations, evaluate the
  /// performance model, update EMAs and emit the tick record. `ctrl` handles
  /// admission for arrivals; nullptr admits everything at full allocation.
  TickRecord advance_tick(double dt, Controller* ctrl = nullptr) {
    if (!(dt > 0.0)) throw SimError("tick dt must be > 0");
    ++tick_index_;
    double now = clock_s();

    fire_due_events(now, ctrl);
    drain_migrations(dt);

    std::vector<AppLoad> loads;
    loads.reserve(apps_.size());
    for (const AppRuntime& a : apps_) {
      loads.push_back({a.spec.cls, a.p_now(), a.alloc.cpu_util_cap, a.spec.demand_bw_gbs,
                       a.spec.access_rate});
    }
    PerfSample sample = solve_system(loads, machine_);

    TickRecord rec;
    rec.tick = tick_index_;
    rec.time_s = now;
    rec.local_bw_total_gbs = sample.granted_local_total_gbs;
    rec.cxl_bw_total_gbs = sample.granted_cxl_total_gbs;
    rec.offered_cxl_gbs = sample.offered_cxl_total_gbs;
    rec.rho_local = sample.rho_local;
    rec.rho_cxl = sample.rho_cxl;
    for (size_t i = 0; i < apps_.size(); ++i) {
      AppRuntime& a = apps_[i];
      a.ema_latency_ns = ema(a.ema_latency_ns, sample.apps[i].latency_ns);
      a.ema_bw_gbs = ema(a.ema_bw_gbs, sample.apps[i].achieved_bw_gbs);
      AppTick at;
      at.app = a.spec.id;
      at.latency_ns = a.ema_latency_ns;
      at.bw_gbs = a.ema_bw_gbs;
      at.resident_local_gb = a.resident_local_gb;
      at.resident_cxl_gb = a.resident_cxl_gb;
      at.cpu_cap = a.alloc.cpu_util_cap;
      at.numa_fault_rate = machine_.fault_coeff * a.p_now() * a.spec.access_rate;
      at.slo_met = a.spec.slo.kind == SloKind::LatencyNs ? a.ema_latency_ns <= a.spec.slo.value
                                                         : a.ema_bw_gbs >= a.spec.slo.value;
      rec.apps.push_back(std::move(at));
    }
    return rec;
  }

 private:
  struct SimEvent {
    double at_s = 0.0;
    enum class Kind { Departure = 0, PhaseChange = 1, Arrival = 2 } kind = Kind::Arrival;
    std::string app;
    std::optional<AppSpec> spec;       // Arrival
    std::optional<WorkloadPhase> phase;  // PhaseChange
    std::size_t seq = 0;
  };

  static double ema(double prev, double sample) {
    return std::isnan(prev) ? sample : prev + kEmaAlpha * (sample - prev);
  }

  void push_event(SimEvent ev) {
    ev.seq = events_.size();
    events_.push_back(std::move(ev));
  }

  void sort_events() {
    std::stable_sort(events_.begin(), events_.end(), [](const SimEvent& a, const SimEvent& b) {
      if (a.at_s != b.at_s) return a.at_s < b.at_s;
      if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
      return a.seq < b.seq;
    });
  }

  void fire_due_events(double now, Controller* ctrl) {
    while (next_event_ < events_.size() && events_[next_event_].at_s <= now + kEps) {
      const SimEvent& ev = events_[next_event_];
      ++next_event_;
      switch (ev.kind) {
        case SimEvent::Kind::Arrival: {
          if (!ev.spec) break;
          add_app(*ev.spec, ev.at_s);
          bool admitted = ctrl ? ctrl->on_arrival(*this, ev.app) : true;
          if (!admitted) {
            remove_app(ev.app);
          } else {
            init_placement(ev.app);
          }
          break;
        }
        case SimEvent::Kind::Departure: {
          if (find(ev.app)) {
            if (ctrl) ctrl->on_departure(*this, ev.app);
            remove_app(ev.app);
          }
          break;
        }
        case SimEvent::Kind::PhaseChange: {
          AppRuntime* a = find(ev.app);
          if (!a || !ev.phase) break;
          apply_phase(*a, *ev.phase);
          if (ctrl) ctrl->on_phase_change(*this, ev.app);
          break;
        }
      }
    }
  }

  /// New working-set pages allocate fast-tier first; freed pages come off the
  /// slow tier first.
  void apply_phase(AppRuntime& a, const WorkloadPhase& ph) {
    double old_wss = a.spec.wss_gb;
    a.spec.demand_bw_gbs = ph.demand_bw_gbs;
    a.spec.access_rate = ph.access_rate;
    a.spec.wss_gb = ph.wss_gb;
    double delta = ph.wss_gb - old_wss;
    if (delta > 0.0) {
      double head = std::max(0.0, std::min(a.wss(), a.alloc.local_mem_limit_gb) -
                                      a.resident_local_gb);
      double add_local = std::min({delta, head, free_local_capacity()});
      a.resident_local_gb += add_local;
      a.resident_cxl_gb += delta - add_local;
    } else if (delta < 0.0) {
      double shed = -delta;
      double from_cxl = std::min(shed, a.resident_cxl_gb);
      a.resident_cxl_gb -= from_cxl;
      a.resident_local_gb = std::max(0.0, a.resident_local_gb - (shed - from_cxl));
    }
  }

  /// Demotions first (they free fast-tier room), then promotions in hotness
  /// order; each app moves at most migration_rate * dt per tick.
  void drain_migrations(double dt) {
    double budget = machine_.migration_rate_gbs * dt;
    for (AppRuntime& a : apps_) {
      if (!a.demoting()) continue;
      double excess = a.resident_local_gb - a.placement_target();
      double move = std::min({budget, excess, free_cxl_capacity()});
      a.resident_local_gb -= move;
      a.resident_cxl_gb += move;
    }
    std::vector<AppRuntime*> promoters;
    for (AppRuntime& a : apps_) {
      if (a.promoting()) promoters.push_back(&a);
    }
    std::stable_sort(promoters.begin(), promoters.end(), [](const AppRuntime* x,
                                                            const AppRuntime* y) {
      return x->spec.access_rate > y->spec.access_rate;
    });
    for (AppRuntime* a : promoters) {
      double want = a->placement_target() - a->resident_local_gb;
      double move = std::min({budget, want, free_local_capacity()});
      if (move <= 0.0) continue;
      a->resident_local_gb += move;
      a->resident_cxl_gb -= move;
    }
  }

  MachineSpec machine_;
  double tick_s_;
  std::uint64_t seed_;
  std::int64_t tick_index_ = 0;
  std::optional<Thresholds> thresholds_;
  std::vector<AppRuntime> apps_;
  std::vector<SimEvent> events_;
  std::size_t next_event_ = 0;
};

struct Trace {
  std::string scenario;
  std::string controller;
  std::uint64_t seed = 0;
  std::vector<TickRecord> records;
};

inline constexpr const char* kTraceCsvHeader =
    "time,app,latency_ns,bw_gbs,local_gb,cxl_gb,cpu_cap,slo_met,numa_faults";

namespace detail {
inline void append_num(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  out += buf;
}
}  // namespace detail

/// One row per (tick, app), fields in the exact header order.
inline std::string trace_to_csv(const Trace& trace) {
  std::string out = kTraceCsvHeader;
  out += '\n';
  for (const TickRecord& rec : trace.records) {
    for (const AppTick& at : rec.apps) {
      detail::append_num(out, rec.time_s);
      out += ',';
      out += at.app;
      out += ',';
      detail::append_num(out, at.latency_ns);
      out += ',';
      detail::append_num(out, at.bw_gbs);
      out += ',';
      detail::append_num(out, at.resident_local_gb);
      out += ',';
      detail::append_num(out, at.resident_cxl_gb);
      out += ',';
      detail::append_num(out, at.cpu_cap);
      out += ',';
      out += at.slo_met ? '1' : '0';
      out += ',';
      detail::append_num(out, at.numa_fault_rate);
      out += '\n';
    }
  }
  return out;
}

/// Runs a full scenario under a controller. The trace is a pure function of
/// (scenario, controller, seed).
inline Trace run_scenario(const ScenarioSpec& sc, Controller& ctrl, std::uint64_t seed) {
  SimState state(sc.machine, sc.tick_s, seed);
  state.load_events(sc);
  Trace trace;
  trace.scenario = sc.name;
  trace.controller = ctrl.name();
  trace.seed = seed;
  auto n_ticks = static_cast<std::int64_t>(std::llround(sc.horizon_s / sc.tick_s));
  trace.records.reserve(static_cast<size_t>(n_ticks));
  for (std::int64_t i = 0; i < n_ticks; ++i) {
    TickRecord rec;
    try {
      rec = state.advance_tick(sc.tick_s, &ctrl);
    } catch (const SimError& e) {
      throw SimError("t=" + std::to_string(state.clock_s()) + ": " + e.what());
    }
    ctrl.on_tick(state, rec);
    trace.records.push_back(std::move(rec));
  }
  return trace;
}

}  // namespace tiersim
