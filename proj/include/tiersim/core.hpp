#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace tiersim {

// Cache-line granularity used to convert access rates into bandwidth.
inline constexpr double kBytesPerAccess = 64.0;
inline constexpr double kGbPerByte = 1e-9;

// Search grids shared by the profiler and the controllers.
inline constexpr double kMemGridGb = 0.25;
inline constexpr double kCpuGrid = 0.01;

inline constexpr double kEps = 1e-9;

enum class AppClass { LS, BI };

inline const char* to_string(AppClass c) { return c == AppClass::LS ? "LS" : "BI"; }

enum class SloKind { LatencyNs, BandwidthGBs };

inline const char* to_string(SloKind k) {
  return k == SloKind::LatencyNs ? "latency_ns" : "bandwidth_gbs";
}

struct SloTarget {
  SloKind kind = SloKind::LatencyNs;
  double value = 0.0;
};

/// One workload phase. The fields on AppSpec describe the phase active at
/// arrival; later phases override them at arrival-relative times.
struct WorkloadPhase {
  double start_s = 0.0;  // relative to app arrival, > 0 for non-initial phases
  double demand_bw_gbs = 0.0;
  double wss_gb = 0.0;
  double access_rate = 0.0;  // memory accesses per second
};

struct AppSpec {
  std::string id;
  AppClass cls = AppClass::LS;
  int priority = 0;  // unique per scenario, larger = more important
  double wss_gb = 0.0;
  double demand_bw_gbs = 0.0;  // bandwidth offered at full CPU utilization
  double access_rate = 0.0;    // accesses/s; drives LS tier load and fault rate
  SloTarget slo;
  std::vector<WorkloadPhase> phases;  // subsequent phases, sorted by start_s
};

/// Two-tier machine description plus the calibrated model coefficients.
struct MachineSpec {
  double local_capacity_gb = 100.0;
  double cxl_capacity_gb = 400.0;
  double local_bw_cap_gbs = 200.0;
  double cxl_bw_cap_gbs = 50.0;
  double lat_local_base_ns = 100.0;
  double lat_cxl_base_ns = 200.0;
  double kq_local_ns = 40.0;  // local queue-delay coefficient
  double kq_cxl_ns = 80.0;    // remote queue-delay coefficient
  double coupling_c_ns = 20.0;  // inter-tier coupling coefficient
  int interleave_m = 1;  // hardware interleave ratio m:n, metadata only
  int interleave_n = 1;
  double migration_rate_gbs = 2.0;
  double fault_coeff = 1e-6;  // remote hint faults per slow-tier access
};

/// The two controlled resources of an app.
struct Allocation {
  double local_mem_limit_gb = 0.0;
  double cpu_util_cap = 1.0;
};

/// Machine-wide interference thresholds produced by calibration.
struct Thresholds {
  double thresh_local_bw_gbs = 0.0;  // healthy fast-tier bandwidth
  double thresh_numa = 0.0;          // remote hint fault rate, faults/s
};

/// Bandwidth an app offers at full CPU utilization. LS apps load the tiers
/// through their access stream; BI apps through their demand figure.
inline double offered_bw_full(AppClass cls, double demand_bw_gbs, double access_rate) {
  double access_bw = access_rate * kBytesPerAccess * kGbPerByte;
  return cls == AppClass::BI ? demand_bw_gbs : demand_bw_gbs + access_bw;
}

/// Slow-tier share of an app's accesses given its current placement.
inline double cxl_fraction(double wss_gb, double resident_local_gb) {
  if (wss_gb <= 0.0) return 0.0;
  return std::max(0.0, (wss_gb - resident_local_gb) / wss_gb);
}

struct ScenarioApp {
  AppSpec spec;
  double arrival_s = 0.0;
};

struct EventSpec {
  enum class Kind { Departure, PhaseChange };
  double at_s = 0.0;
  Kind kind = Kind::Departure;
  std::string app;
  std::optional<WorkloadPhase> phase;  // PhaseChange only; start_s ignored
};

struct ScenarioSpec {
  std::string name;  // derived from file name or builder, not serialized
  MachineSpec machine;
  std::vector<ScenarioApp> apps;
  std::vector<EventSpec> events;
  double horizon_s = 10.0;
  double tick_s = 0.2;
  std::uint64_t seed = 0;
};

struct ValidationError {
  enum class Kind {
    DuplicatePriority,
    SloKindMismatch,
    NonPositiveQuantity,
    PhaseOrder,
    UnknownApp,
    CapacityExceeded,
  };
  Kind kind;
  std::string subject;  // offending app id, or "machine"/"scenario"
  std::string message;
};

inline const char* to_string(ValidationError::Kind k) {
  switch (k) {
    case ValidationError::Kind::DuplicatePriority: return "DuplicatePriority";
    case ValidationError::Kind::SloKindMismatch: return "SloKindMismatch";
    case ValidationError::Kind::NonPositiveQuantity: return "NonPositiveQuantity";
    case ValidationError::Kind::PhaseOrder: return "PhaseOrder";
    case ValidationError::Kind::UnknownApp: return "UnknownApp";
    case ValidationError::Kind::CapacityExceeded: return "CapacityExceeded";
  }
  return "?";
}

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownAppError : SimError {
  explicit UnknownAppError(const std::string& id) : SimError("unknown app: " + id) {}
};
struct NoConvergenceError : SimError {
  using SimError::SimError;
};
struct CalibrationError : SimError {
  using SimError::SimError;
};
struct ParseError : SimError {
  using SimError::SimError;
};
struct IoError : SimError {
  using SimError::SimError;
};

namespace detail {

inline void require_positive(std::vector<ValidationError>& errs, const std::string& subject,
                             const char* field, double v) {
  if (!(v > 0.0)) {
    errs.push_back({ValidationError::Kind::NonPositiveQuantity, subject,
                    std::string(field) + " must be > 0, got " + std::to_string(v)});
  }
}

inline void require_non_negative(std::vector<ValidationError>& errs, const std::string& subject,
                                 const char* field, double v) {
  if (v < 0.0) {
    errs.push_back({ValidationError::Kind::NonPositiveQuantity, subject,
                    std::string(field) + " must be >= 0, got " + std::to_string(v)});
  }
}

}  // namespace detail

/// Validates every domain invariant of a scenario. Returns the aggregated
/// error list; empty means the scenario is well formed.
inline std::vector<ValidationError> validate_scenario(const ScenarioSpec& sc) {
  using detail::require_non_negative;
  using detail::require_positive;
  std::vector<ValidationError> errs;

  const MachineSpec& m = sc.machine;
  require_positive(errs, "machine", "local_capacity_gb", m.local_capacity_gb);
  require_positive(errs, "machine", "cxl_capacity_gb", m.cxl_capacity_gb);
  require_positive(errs, "machine", "local_bw_cap_gbs", m.local_bw_cap_gbs);
  require_positive(errs, "machine", "cxl_bw_cap_gbs", m.cxl_bw_cap_gbs);
  require_positive(errs, "machine", "lat_local_base_ns", m.lat_local_base_ns);
  require_positive(errs, "machine", "lat_cxl_base_ns", m.lat_cxl_base_ns);
  require_non_negative(errs, "machine", "kq_local_ns", m.kq_local_ns);
  require_non_negative(errs, "machine", "kq_cxl_ns", m.kq_cxl_ns);
  require_non_negative(errs, "machine", "coupling_c_ns", m.coupling_c_ns);
  require_positive(errs, "machine", "migration_rate_gbs", m.migration_rate_gbs);
  require_non_negative(errs, "machine", "fault_coeff", m.fault_coeff);
  if (m.lat_cxl_base_ns < m.lat_local_base_ns) {
    errs.push_back({ValidationError::Kind::NonPositiveQuantity, "machine",
                    "lat_cxl_base_ns must be >= lat_local_base_ns"});
  }
  if (m.interleave_m <= 0 || m.interleave_n <= 0) {
    errs.push_back({ValidationError::Kind::NonPositiveQuantity, "machine",
                    "interleave ratio terms must be positive integers"});
  }

  require_positive(errs, "scenario", "horizon_s", sc.horizon_s);
  require_positive(errs, "scenario", "tick_s", sc.tick_s);

  std::set<int> seen_prio;
  std::set<std::string> ids;
  double total_wss = 0.0;
  for (const ScenarioApp& sa : sc.apps) {
    const AppSpec& a = sa.spec;
    const std::string& id = a.id.empty() ? std::string("<unnamed>") : a.id;
    if (!ids.insert(id).second) {
      errs.push_back({ValidationError::Kind::UnknownApp, id, "duplicate app id"});
    }
    if (!seen_prio.insert(a.priority).second) {
      errs.push_back({ValidationError::Kind::DuplicatePriority, id,
                      "priority " + std::to_string(a.priority) + " already assigned"});
    }
    require_positive(errs, id, "wss_gb", a.wss_gb);
    require_non_negative(errs, id, "demand_bw_gbs", a.demand_bw_gbs);
    require_non_negative(errs, id, "access_rate", a.access_rate);
    require_non_negative(errs, id, "arrival_s", sa.arrival_s);
    require_positive(errs, id, "slo.value", a.slo.value);
    if ((a.cls == AppClass::LS) != (a.slo.kind == SloKind::LatencyNs)) {
      errs.push_back({ValidationError::Kind::SloKindMismatch, id,
                      std::string(to_string(a.cls)) + " app carries " + to_string(a.slo.kind) +
                          " SLO"});
    }
    double last = 0.0;
    double peak_wss = a.wss_gb;
    for (const WorkloadPhase& ph : a.phases) {
      if (ph.start_s <= last) {
        errs.push_back({ValidationError::Kind::PhaseOrder, id,
                        "phases must have strictly increasing start_s > 0"});
        break;
      }
      last = ph.start_s;
      require_positive(errs, id, "phase.wss_gb", ph.wss_gb);
      require_non_negative(errs, id, "phase.demand_bw_gbs", ph.demand_bw_gbs);
      require_non_negative(errs, id, "phase.access_rate", ph.access_rate);
      peak_wss = std::max(peak_wss, ph.wss_gb);
    }
    total_wss += peak_wss;
  }

  for (const EventSpec& ev : sc.events) {
    if (ids.find(ev.app) == ids.end()) {
      errs.push_back({ValidationError::Kind::UnknownApp, ev.app, "event references unknown app"});
    }
    require_non_negative(errs, ev.app, "event.at_s", ev.at_s);
    if (ev.kind == EventSpec::Kind::PhaseChange) {
      if (!ev.phase) {
        errs.push_back({ValidationError::Kind::PhaseOrder, ev.app,
                        "phase_change event carries no phase"});
      } else {
        require_positive(errs, ev.app, "event.phase.wss_gb", ev.phase->wss_gb);
      }
    }
  }

  if (total_wss > m.local_capacity_gb + m.cxl_capacity_gb + kEps) {
    errs.push_back({ValidationError::Kind::CapacityExceeded, "scenario",
                    "peak working sets exceed total machine capacity"});
  }
  return errs;
}

}  // namespace tiersim
