#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tiersim/controller.hpp"
#include "tiersim/core.hpp"
#include "tiersim/perfmodel.hpp"
#include "tiersim/profiler.hpp"
#include "tiersim/sim.hpp"

namespace tiersim {

enum class BaselineKind { TppLike, ColloidLike, Fcfs };

/// Weighted max-min water-filling: raise a common level so each app gets
/// min(cap_i, level * weight_i); zero-weight apps split any leftover.
inline std::vector<double> weighted_water_fill(const std::vector<double>& weights,
                                               const std::vector<double>& caps, double total) {
  size_t n = weights.size();
  std::vector<double> alloc(n, 0.0);
  std::vector<bool> done(n, false);
  double remaining = total;
  while (true) {
    double wsum = 0.0;
    for (size_t i = 0; i < n; ++i)
      if (!done[i] && weights[i] > 0.0) wsum += weights[i];
    if (wsum <= 0.0 || remaining <= kEps) break;
    double level = remaining / wsum;
    bool saturated_any = false;
    for (size_t i = 0; i < n; ++i) {
      if (done[i] || weights[i] <= 0.0) continue;
      if (caps[i] <= level * weights[i] + kEps) {
        alloc[i] = caps[i];
        remaining -= caps[i];
        done[i] = true;
        saturated_any = true;
      }
    }
    if (!saturated_any) {
      for (size_t i = 0; i < n; ++i) {
        if (!done[i] && weights[i] > 0.0) {
          alloc[i] = level * weights[i];
          done[i] = true;
        }
      }
      remaining = 0.0;
      break;
    }
  }
  // Leftovers go to zero-weight apps (and any unsaturated remainder), plain
  // max-min on the residual caps.
  if (remaining > kEps) {
    std::vector<double> res_caps;
    std::vector<size_t> idx;
    for (size_t i = 0; i < n; ++i) {
      if (caps[i] - alloc[i] > kEps) {
        res_caps.push_back(caps[i] - alloc[i]);
        idx.push_back(i);
      }
    }
    std::vector<double> extra = tier_share(res_caps, remaining);
    for (size_t k = 0; k < idx.size(); ++k) alloc[idx[k]] += extra[k];
  }
  return alloc;
}

/// Hotness tiering: fast-tier memory split by access-rate-weighted
/// water-filling, blind to priorities and SLOs; no CPU caps.
inline std::vector<double> tpp_allocations(const std::vector<double>& access_rates,
                                           const std::vector<double>& wss, double capacity_gb) {
  return weighted_water_fill(access_rates, wss, capacity_gb);
}

class TppController : public Controller {
 public:
  std::string name() const override { return "tpp"; }

  bool on_arrival(SimState& sim, const std::string& app_id) override {
    rebalance(sim);
    log(sim.tick_index(), "admit", app_id, "", 0.0, 0.0, "hotness_tiering");
    return true;
  }

  void on_tick(SimState& sim, const TickRecord&) override { rebalance(sim); }

 private:
  void rebalance(SimState& sim) {
    std::vector<double> rates, wss;
    for (const AppRuntime& a : sim.apps()) {
      rates.push_back(a.spec.access_rate);
      wss.push_back(a.spec.wss_gb);
    }
    std::vector<double> limits =
        tpp_allocations(rates, wss, sim.machine().local_capacity_gb);
    size_t i = 0;
    for (AppRuntime& a : sim.apps()) {
      double v = limits[i++];
      if (std::abs(v - a.alloc.local_mem_limit_gb) > kEps) {
        log(sim.tick_index(), "set_mem_limit", a.spec.id, "local_mem_limit_gb",
            a.alloc.local_mem_limit_gb, v, "tpp_waterfill");
        sim.apply_allocation(a.spec.id, Allocation{v, 1.0});
      }
    }
  }
};

enum class BalanceMove { Demote, Promote, Hold };

/// Latency balancing: compare the effective per-access latency of the two
/// tiers and migrate toward the cheaper one.
inline BalanceMove colloid_decision(double rho_local, double rho_cxl, double offered_cxl_gbs,
                                    const MachineSpec& m, double eps_ns = 1e-6) {
  double eff_local = m.lat_local_base_ns + queue_delay(rho_local, m.kq_local_ns) +
                     inter_tier_pressure(offered_cxl_gbs, m);
  double eff_cxl = m.lat_cxl_base_ns + queue_delay(rho_cxl, m.kq_cxl_ns);
  if (eff_local > eff_cxl + eps_ns) return BalanceMove::Demote;
  if (eff_cxl > eff_local + eps_ns) return BalanceMove::Promote;
  return BalanceMove::Hold;
}

class ColloidController : public Controller {
 public:
  std::string name() const override { return "colloid"; }

  bool on_arrival(SimState& sim, const std::string& app_id) override {
    AppRuntime& a = sim.require(app_id);
    sim.apply_allocation(app_id, Allocation{a.spec.wss_gb, 1.0});
    log(sim.tick_index(), "admit", app_id, "", 0.0, 0.0, "latency_balancing");
    return true;
  }

  void on_tick(SimState& sim, const TickRecord& rec) override {
    BalanceMove move = colloid_decision(rec.rho_local, rec.rho_cxl, rec.offered_cxl_gbs,
                                        sim.machine());
    if (move == BalanceMove::Hold) return;
    double step = sim.machine().migration_rate_gbs * sim.tick_s();
    if (move == BalanceMove::Demote) {
      for (AppRuntime& a : sim.apps()) {
        double v = std::max(0.0, a.alloc.local_mem_limit_gb - step);
        if (std::abs(v - a.alloc.local_mem_limit_gb) > kEps) {
          log(sim.tick_index(), "set_mem_limit", a.spec.id, "local_mem_limit_gb",
              a.alloc.local_mem_limit_gb, v, "colloid_demote");
          sim.apply_allocation(a.spec.id, Allocation{v, 1.0});
        }
      }
    } else {
      double ledger = sim.machine().local_capacity_gb;
      for (const AppRuntime& a : sim.apps()) ledger -= a.alloc.local_mem_limit_gb;
      for (AppRuntime& a : sim.apps()) {
        double v = std::min(a.spec.wss_gb,
                            a.alloc.local_mem_limit_gb + std::min(step, std::max(0.0, ledger)));
        double inc = v - a.alloc.local_mem_limit_gb;
        if (inc > kEps) {
          ledger -= inc;
          log(sim.tick_index(), "set_mem_limit", a.spec.id, "local_mem_limit_gb",
              a.alloc.local_mem_limit_gb, v, "colloid_promote");
          sim.apply_allocation(a.spec.id, Allocation{v, 1.0});
        }
      }
    }
  }
};

struct FcfsDecision {
  bool admitted = false;
  Allocation allocation;
  double allocated_bw_gbs = 0.0;
};

/// First-come-first-serve: grant profiled resources from whatever is left,
/// reject once the fast tier is exhausted, never evict, never adapt.
inline FcfsDecision fcfs_admit(const AppSpec& app, const ProfileResult& profile,
                               double free_mem_gb, double free_bw_gbs) {
  FcfsDecision d;
  if (!profile.admissible) return d;
  if (free_mem_gb < kMemGridGb) return d;  // capacity ran out
  d.admitted = true;
  d.allocation.local_mem_limit_gb = std::min(profile.mem_limit_gb.value_or(app.wss_gb),
                                             free_mem_gb);
  d.allocation.cpu_util_cap = app.cls == AppClass::BI ? profile.cpu_util.value_or(1.0) : 1.0;
  if (app.cls == AppClass::BI) {
    d.allocated_bw_gbs = std::min(profile.bw_gbs.value_or(0.0), std::max(0.0, free_bw_gbs));
  }
  return d;
}

class FcfsController : public Controller {
 public:
  std::string name() const override { return "fcfs"; }

  bool on_arrival(SimState& sim, const std::string& app_id) override {
    AppRuntime& rt = sim.require(app_id);
    ProfileResult profile = profile_app(rt.spec, sim.machine());
    double free_mem = sim.machine().local_capacity_gb - granted_mem_;
    double free_bw = sim.machine().local_bw_cap_gbs - granted_bw_;
    FcfsDecision d = fcfs_admit(rt.spec, profile, free_mem, free_bw);
    if (!d.admitted) {
      log(sim.tick_index(), "reject", app_id, "", 0.0, 0.0,
          profile.admissible ? "no_capacity" : "inadmissible");
      return false;
    }
    granted_mem_ += d.allocation.local_mem_limit_gb;
    granted_bw_ += d.allocated_bw_gbs;
    sim.apply_allocation(app_id, d.allocation);
    log(sim.tick_index(), "admit", app_id, "local_mem_limit_gb", 0.0,
        d.allocation.local_mem_limit_gb, "fcfs_grant");
    return true;
  }

  void on_departure(SimState& sim, const std::string& app_id) override {
    const AppRuntime* rt = sim.find(app_id);
    if (rt) granted_mem_ -= rt->alloc.local_mem_limit_gb;
  }

  void on_tick(SimState&, const TickRecord&) override {}  // never adapts

 private:
  double granted_mem_ = 0.0;
  double granted_bw_ = 0.0;
};

}  // namespace tiersim
