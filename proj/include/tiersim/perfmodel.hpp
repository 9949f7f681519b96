#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "tiersim/core.hpp"

namespace tiersim {

/// Queue delay of a tier at utilization rho. Quadratic numerator keeps the
/// onset gentle; the denominator is clamped at rho = 0.99 so the function
/// stays finite while remaining strictly increasing.
inline double queue_delay(double rho, double k_ns) {
  if (rho <= 0.0) return 0.0;
  return k_ns * rho * rho / (1.0 - std::min(rho, 0.99));
}

/// Slowdown that slow-tier traffic imposes on fast-tier requests. Grows with
/// the *offered* slow-tier load, so backlog beyond the cap keeps hurting.
inline double inter_tier_pressure(double offered_cxl_gbs, const MachineSpec& m) {
  if (offered_cxl_gbs <= 0.0) return 0.0;
  double x = offered_cxl_gbs / m.cxl_bw_cap_gbs;
  return m.coupling_c_ns * x * x;
}

/// Max-min fair (water-filling) split of one tier's capacity.
inline std::vector<double> tier_share(const std::vector<double>& demands, double capacity_gbs) {
  std::vector<double> grants(demands.size(), 0.0);
  double total = std::accumulate(demands.begin(), demands.end(), 0.0);
  if (total <= capacity_gbs) {
    return demands;
  }
  std::vector<size_t> order(demands.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return demands[a] < demands[b]; });
  double remaining = capacity_gbs;
  size_t left = demands.size();
  for (size_t idx : order) {
    double fair = remaining / static_cast<double>(left);
    double g = std::min(demands[idx], fair);
    grants[idx] = g;
    remaining -= g;
    --left;
  }
  return grants;
}

/// Offered load per tier (sums over all apps).
struct TierLoad {
  double offered_local_gbs = 0.0;
  double offered_cxl_gbs = 0.0;
};

/// Access latency seen by an app whose slow-tier fraction is p, under the
/// given system-wide offered loads.
inline double ls_access_latency(double p, const TierLoad& loads, const MachineSpec& m) {
  double granted_local = std::min(loads.offered_local_gbs, m.local_bw_cap_gbs);
  double granted_cxl = std::min(loads.offered_cxl_gbs, m.cxl_bw_cap_gbs);
  double rho_local = granted_local / m.local_bw_cap_gbs;
  double rho_cxl = granted_cxl / m.cxl_bw_cap_gbs;
  double local_side = m.lat_local_base_ns + queue_delay(rho_local, m.kq_local_ns) +
                      inter_tier_pressure(loads.offered_cxl_gbs, m);
  double cxl_side = m.lat_cxl_base_ns + queue_delay(rho_cxl, m.kq_cxl_ns);
  return (1.0 - p) * local_side + p * cxl_side;
}

/// Bandwidth a lone app achieves at slow-tier fraction p and CPU cap u.
/// With company, use solve_system; this is the isolated closed form the
/// profiler and the controller plan with.
inline double bi_achieved_bandwidth(double demand_bw_gbs, double p, double u,
                                    const MachineSpec& m) {
  double offered_local = u * (1.0 - p) * demand_bw_gbs;
  double offered_cxl = u * p * demand_bw_gbs;
  return std::min(offered_local, m.local_bw_cap_gbs) + std::min(offered_cxl, m.cxl_bw_cap_gbs);
}

/// Per-app inputs to the system solve.
struct AppLoad {
  AppClass cls = AppClass::BI;
  double p = 0.0;        // slow-tier fraction of its accesses
  double cpu_cap = 1.0;  // utilization throttle
  double demand_bw_gbs = 0.0;
  double access_rate = 0.0;
};

struct AppPerf {
  double latency_ns = 0.0;
  double achieved_bw_gbs = 0.0;
  double granted_local_gbs = 0.0;
  double granted_cxl_gbs = 0.0;
};

struct PerfSample {
  std::vector<AppPerf> apps;
  double offered_local_total_gbs = 0.0;
  double offered_cxl_total_gbs = 0.0;
  double granted_local_total_gbs = 0.0;
  double granted_cxl_total_gbs = 0.0;
  double rho_local = 0.0;
  double rho_cxl = 0.0;
  int iterations = 0;
};

inline constexpr double kSolveDamping = 0.5;
inline constexpr double kSolveRelTol = 1e-6;
inline constexpr int kSolveMaxIters = 100;

/// Routes every app's offered bandwidth per tier, arbitrates contention with
/// tier_share, and evaluates per-app latency and achieved bandwidth. Grants
/// are relaxed to a fixed point with damping 0.5 and relative tolerance 1e-6.
inline PerfSample solve_system(const std::vector<AppLoad>& apps, const MachineSpec& m) {
  size_t n = apps.size();
  std::vector<double> off_local(n, 0.0), off_cxl(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double full = offered_bw_full(apps[i].cls, apps[i].demand_bw_gbs, apps[i].access_rate);
    double offered = apps[i].cpu_cap * full;
    off_local[i] = (1.0 - apps[i].p) * offered;
    off_cxl[i] = apps[i].p * offered;
  }

  std::vector<double> g_local = tier_share(off_local, m.local_bw_cap_gbs);
  std::vector<double> g_cxl = tier_share(off_cxl, m.cxl_bw_cap_gbs);
  int iters = 0;
  bool converged = n == 0;
  for (; iters < kSolveMaxIters && !converged; ++iters) {
    std::vector<double> t_local = tier_share(off_local, m.local_bw_cap_gbs);
    std::vector<double> t_cxl = tier_share(off_cxl, m.cxl_bw_cap_gbs);
    converged = true;
    for (size_t i = 0; i < n; ++i) {
      double nl = g_local[i] + kSolveDamping * (t_local[i] - g_local[i]);
      double nc = g_cxl[i] + kSolveDamping * (t_cxl[i] - g_cxl[i]);
      double scale_l = std::max(1.0, std::abs(nl));
      double scale_c = std::max(1.0, std::abs(nc));
      if (std::abs(nl - g_local[i]) > kSolveRelTol * scale_l ||
          std::abs(nc - g_cxl[i]) > kSolveRelTol * scale_c) {
        converged = false;
      }
      g_local[i] = nl;
      g_cxl[i] = nc;
    }
  }
  if (!converged) {
    throw NoConvergenceError("solve_system did not converge within " +
                             std::to_string(kSolveMaxIters) + " iterations");
  }

  PerfSample out;
  out.iterations = iters;
  out.offered_local_total_gbs = std::accumulate(off_local.begin(), off_local.end(), 0.0);
  out.offered_cxl_total_gbs = std::accumulate(off_cxl.begin(), off_cxl.end(), 0.0);
  out.granted_local_total_gbs = std::accumulate(g_local.begin(), g_local.end(), 0.0);
  out.granted_cxl_total_gbs = std::accumulate(g_cxl.begin(), g_cxl.end(), 0.0);
  out.rho_local = std::min(out.granted_local_total_gbs / m.local_bw_cap_gbs, 1.0);
  out.rho_cxl = std::min(out.granted_cxl_total_gbs / m.cxl_bw_cap_gbs, 1.0);

  TierLoad loads{out.offered_local_total_gbs, out.offered_cxl_total_gbs};
  out.apps.resize(n);
  for (size_t i = 0; i < n; ++i) {
    AppPerf& ap = out.apps[i];
    ap.granted_local_gbs = g_local[i];
    ap.granted_cxl_gbs = g_cxl[i];
    ap.achieved_bw_gbs = g_local[i] + g_cxl[i];
    ap.latency_ns = ls_access_latency(apps[i].p, loads, m);
  }
  return out;
}

}  // namespace tiersim
