#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "tiersim/core.hpp"
#include "tiersim/perfmodel.hpp"

namespace tiersim {

struct ProfileResult {
  bool admissible = false;
  std::optional<double> mem_limit_gb;  // minimal limit meeting the SLO in isolation
  std::optional<double> bw_gbs;        // BI: bandwidth achieved at the profiled point
  std::optional<double> cpu_util;      // BI: minimal CPU cap, 1.0 if memory sufficed
};

namespace detail {

/// Isolation metric at a (limit, cpu) point: latency for LS apps, achieved
/// bandwidth for BI apps. Evaluated through the same system solve the
/// simulator uses, with the app alone on the machine.
inline double isolated_metric(const AppSpec& app, double mem_limit_gb, double cpu,
                              const MachineSpec& m) {
  double p = cxl_fraction(app.wss_gb, std::min(app.wss_gb, mem_limit_gb));
  std::vector<AppLoad> loads{{app.cls, p, cpu, app.demand_bw_gbs, app.access_rate}};
  PerfSample s = solve_system(loads, m);
  return app.cls == AppClass::LS ? s.apps[0].latency_ns : s.apps[0].achieved_bw_gbs;
}

inline bool isolated_slo_met(const AppSpec& app, double mem_limit_gb, double cpu,
                             const MachineSpec& m) {
  double v = isolated_metric(app, mem_limit_gb, cpu, m);
  return app.cls == AppClass::LS ? v <= app.slo.value : v >= app.slo.value;
}

/// Memory grid for an app: 0, 0.25, ..., wss (wss always included).
inline std::vector<double> mem_grid(double wss_gb) {
  std::vector<double> g;
  for (double v = 0.0; v < wss_gb - kEps; v += kMemGridGb) g.push_back(v);
  g.push_back(wss_gb);
  return g;
}

}  // namespace detail

/// Finds the minimal resources meeting an app's SLO when it runs alone:
/// start fully local at full CPU; walk the local memory limit down to the
/// smallest grid point that still meets the SLO; for BI apps whose bandwidth
/// still exceeds the SLO at limit zero, walk the CPU cap down the same way.
inline ProfileResult profile_app(const AppSpec& app, const MachineSpec& m) {
  ProfileResult r;
  if (!detail::isolated_slo_met(app, app.wss_gb, 1.0, m)) {
    return r;  // inadmissible
  }
  r.admissible = true;

  std::vector<double> grid = detail::mem_grid(app.wss_gb);
  // The metric is monotone in the limit, so binary-search the smallest
  // grid index that meets the SLO.
  size_t lo = 0, hi = grid.size() - 1;  // hi always meets
  if (detail::isolated_slo_met(app, grid[0], 1.0, m)) {
    lo = hi = 0;
  }
  while (lo < hi) {
    size_t mid = (lo + hi) / 2;
    if (detail::isolated_slo_met(app, grid[mid], 1.0, m)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  double limit = grid[lo];
  r.mem_limit_gb = limit;
  if (app.cls == AppClass::LS) {
    return r;
  }

  double cpu = 1.0;
  if (limit <= 0.0 && detail::isolated_metric(app, 0.0, 1.0, m) > app.slo.value) {
    // Bandwidth still above target with everything remote: throttle the CPU.
    int clo = 1, chi = 100;  // cpu = index * kCpuGrid
    while (clo < chi) {
      int mid = (clo + chi) / 2;
      if (detail::isolated_slo_met(app, 0.0, mid * kCpuGrid, m)) {
        chi = mid;
      } else {
        clo = mid + 1;
      }
    }
    cpu = clo * kCpuGrid;
  }
  r.cpu_util = cpu;
  r.bw_gbs = detail::isolated_metric(app, limit, cpu, m);
  return r;
}

inline constexpr double kCalibrationDegradation = 0.10;  // 10% latency growth
inline constexpr double kCalibrationBwStepGbs = 1.0;
inline constexpr double kCalibrationPStep = 0.05;

namespace detail {

/// Latency of a fast-tier-resident probe while a load generator offers
/// `bw_gbs` split `1-p` local / `p` remote.
inline double probe_latency(double bw_gbs, double p, const MachineSpec& m) {
  std::vector<AppLoad> loads{
      {AppClass::LS, 0.0, 1.0, 0.0, 0.0},       // latency probe, negligible load
      {AppClass::BI, p, 1.0, bw_gbs, 0.0},      // bandwidth generator
  };
  return solve_system(loads, m).apps[0].latency_ns;
}

}  // namespace detail

/// One-time machine calibration with the two microbenchmark archetypes: a
/// fast-tier random-access latency probe and a saturating bandwidth
/// generator.
///
/// thresh_local_bw: both archetypes on the fast tier; raise the generator's
/// bandwidth in 1 GB/s steps until the probe latency degrades 10%.
/// thresh_numa: run the generator at the largest still-healthy bandwidth and
/// sweep its slow-tier fraction in 0.05 steps until the probe degrades 10%;
/// record the remote fault rate at that point.
inline Thresholds calibrate_thresholds(const MachineSpec& m) {
  double base = detail::probe_latency(0.0, 0.0, m);
  double degraded = (1.0 + kCalibrationDegradation) * base;

  double thresh_bw = -1.0;
  for (double b = kCalibrationBwStepGbs; b <= m.local_bw_cap_gbs + kEps;
       b += kCalibrationBwStepGbs) {
    if (detail::probe_latency(b, 0.0, m) >= degraded) {
      thresh_bw = b;
      break;
    }
  }
  if (thresh_bw < 0.0) {
    throw CalibrationError("no fast-tier bandwidth level degrades the probe 10%");
  }

  double healthy_bw = thresh_bw - kCalibrationBwStepGbs;
  if (healthy_bw <= 0.0) {
    throw CalibrationError("no healthy fast-tier bandwidth below the degradation point");
  }
  double generator_access_rate = healthy_bw / (kBytesPerAccess * kGbPerByte);
  double thresh_numa = -1.0;
  for (int k = 1; k * kCalibrationPStep <= 1.0 + kEps; ++k) {
    double p = k * kCalibrationPStep;
    if (detail::probe_latency(healthy_bw, p, m) >= degraded) {
      thresh_numa = m.fault_coeff * p * generator_access_rate;
      break;
    }
  }
  if (thresh_numa < 0.0) {
    throw CalibrationError("no slow-tier fraction degrades the fast-tier probe 10%");
  }
  return Thresholds{thresh_bw, thresh_numa};
}

}  // namespace tiersim
