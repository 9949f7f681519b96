#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tiersim/controller.hpp"
#include "tiersim/core.hpp"
#include "tiersim/perfmodel.hpp"
#include "tiersim/profiler.hpp"
#include "tiersim/sim.hpp"

namespace tiersim {

struct MercuryPolicy {
  // One comfort band: apps yield resources above it, pull free memory to
  // reach it, and victims may only restore themselves while every
  // higher-priority app sits at or above it.
  double yield_hyst = 0.10;
  double mem_step_gb = 0.5;  // actuation per victim per adaptation tick
  double cpu_step = 0.05;
  double cpu_floor = 0.05;   // victims keep running best-effort
};

/// Registry entry for an admitted app.
struct MercuryEntry {
  std::string id;
  int priority = 0;
  AppClass cls = AppClass::LS;
  double wss_gb = 0.0;
  double demand_bw_gbs = 0.0;
  double access_rate = 0.0;
  double slo_value = 0.0;
  ProfileResult profile;
  Allocation alloc;
  double allocated_bw_gbs = 0.0;  // admission-time bandwidth ledger (BI)
  double mem_floor_gb = 0.0;      // profiled minimum, raised by work conservation
  // Set when a yield takes memory away; the app may not re-grow past it
  // until every higher-priority app is comfortably met again.
  double forced_cap_gb = std::numeric_limits<double>::infinity();

  // Refreshed from the tick record.
  bool has_measurement = false;
  double measured_latency_ns = 0.0;
  double measured_bw_gbs = 0.0;
  double resident_local_gb = 0.0;

  double p_target() const {
    return cxl_fraction(wss_gb, std::min(wss_gb, alloc.local_mem_limit_gb));
  }
  bool demoting() const {
    return has_measurement &&
           resident_local_gb > std::min(wss_gb, alloc.local_mem_limit_gb) + 1e-6;
  }
  /// Fast-tier bandwidth this app will offer at its current allocation.
  double planned_local_bw() const {
    double full = offered_bw_full(cls, demand_bw_gbs, access_rate);
    return (1.0 - p_target()) * alloc.cpu_util_cap * full;
  }
};

/// One journaled mutation; drained into the action log by the controller.
struct MercuryAction {
  enum class Kind { SetMemLimit, SetCpuCap, NumaSwitch };
  Kind kind;
  std::string app;
  double old_value = 0.0;
  double new_value = 0.0;
  std::string reason;
};

/// Controller-side view of the machine: the priority-ordered registry, the
/// calibrated thresholds, and the resource ledgers.
class ControllerState {
 public:
  ControllerState(const MachineSpec& machine, const Thresholds& thresholds,
                  MercuryPolicy policy = {})
      : machine_(machine), thresholds_(thresholds), policy_(policy) {}

  const MachineSpec& machine() const { return machine_; }
  const Thresholds& thresholds() const { return thresholds_; }
  const MercuryPolicy& policy() const { return policy_; }

  std::vector<MercuryEntry>& entries() { return entries_; }
  const std::vector<MercuryEntry>& entries() const { return entries_; }
  std::vector<MercuryAction>& journal() { return journal_; }

  MercuryEntry* find(const std::string& id) {
    for (MercuryEntry& e : entries_)
      if (e.id == id) return &e;
    return nullptr;
  }

  /// Keeps the registry sorted by descending priority.
  MercuryEntry& insert(MercuryEntry e) {
    auto it = entries_.begin();
    while (it != entries_.end() && it->priority > e.priority) ++it;
    return *entries_.insert(it, std::move(e));
  }

  void erase(const std::string& id) {
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
      if (it->id == id) {
        entries_.erase(it);
        return;
      }
    }
  }

  double free_local_mem() const {
    double used = 0.0;
    for (const MercuryEntry& e : entries_) used += e.alloc.local_mem_limit_gb;
    return std::max(0.0, machine_.local_capacity_gb - used);
  }

  bool higher_priority_ls_exists(int priority) const {
    for (const MercuryEntry& e : entries_) {
      if (e.priority > priority && e.cls == AppClass::LS) return true;
    }
    return false;
  }

  /// Fast-tier bandwidth accounted to BI apps under current allocations.
  double accounted_local_bw(const std::string& exclude = "") const {
    double sum = 0.0;
    for (const MercuryEntry& e : entries_) {
      if (e.cls == AppClass::BI && e.id != exclude) sum += e.planned_local_bw();
    }
    return sum;
  }

  double fault_rate_at(const MercuryEntry& e, double p) const {
    return machine_.fault_coeff * p * e.access_rate;
  }

  /// Remote-fault pressure from demotions already in flight, evaluated at
  /// their target placements (an upper bound on the draining rate).
  double demotion_rate_sum(const std::string& exclude = "") const {
    double sum = 0.0;
    for (const MercuryEntry& e : entries_) {
      if (e.id != exclude && e.demoting()) sum += fault_rate_at(e, e.p_target());
    }
    return sum;
  }

  /// True when lowering `e`'s limit to `candidate_gb` keeps the system
  /// remote-fault rate within the calibrated threshold.
  bool demotion_allowed(const MercuryEntry& e, double candidate_gb) const {
    double p_cand = cxl_fraction(e.wss_gb, std::min(e.wss_gb, candidate_gb));
    double projected = demotion_rate_sum(e.id) + fault_rate_at(e, p_cand);
    return projected <= thresholds_.thresh_numa + kEps;
  }

  void set_mem_limit(MercuryEntry& e, double v, const std::string& reason) {
    v = std::clamp(v, 0.0, e.wss_gb);
    if (std::abs(v - e.alloc.local_mem_limit_gb) < kEps) return;
    journal_.push_back({MercuryAction::Kind::SetMemLimit, e.id, e.alloc.local_mem_limit_gb, v,
                        reason});
    if (v < e.alloc.local_mem_limit_gb) e.mem_floor_gb = std::min(e.mem_floor_gb, v);
    e.alloc.local_mem_limit_gb = v;
  }

  void set_cpu(MercuryEntry& e, double v, const std::string& reason) {
    v = std::clamp(v, 0.0, 1.0);
    if (std::abs(v - e.alloc.cpu_util_cap) < kEps) return;
    journal_.push_back({MercuryAction::Kind::SetCpuCap, e.id, e.alloc.cpu_util_cap, v, reason});
    e.alloc.cpu_util_cap = v;
  }

  void mark_numa_switch(const MercuryEntry& e, const std::string& reason) {
    journal_.push_back({MercuryAction::Kind::NumaSwitch, e.id, e.p_target(), e.p_target(),
                        reason});
  }

 private:
  MachineSpec machine_;
  Thresholds thresholds_;
  MercuryPolicy policy_;
  std::vector<MercuryEntry> entries_;
  std::vector<MercuryAction> journal_;
};

struct YieldResult {
  double gathered = 0.0;
  std::vector<std::pair<std::string, Allocation>> side_effects;  // victim, new allocation
};

namespace detail {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

inline void collect_side_effects(ControllerState& st, size_t journal_from, YieldResult& out) {
  for (size_t i = journal_from; i < st.journal().size(); ++i) {
    const MercuryAction& a = st.journal()[i];
    if (a.kind == MercuryAction::Kind::NumaSwitch) continue;
    MercuryEntry* e = st.find(a.app);
    if (!e) continue;
    bool seen = false;
    for (auto& [id, alloc] : out.side_effects) {
      if (id == a.app) {
        alloc = e->alloc;
        seen = true;
      }
    }
    if (!seen) out.side_effects.emplace_back(a.app, e->alloc);
  }
}

/// Victims strictly below the requester, in ascending priority.
inline std::vector<MercuryEntry*> victims_below(ControllerState& st, int requester_priority,
                                                bool bi_only) {
  std::vector<MercuryEntry*> v;
  auto& es = st.entries();
  for (auto it = es.rbegin(); it != es.rend(); ++it) {  // registry is descending
    if (it->priority >= requester_priority) break;
    if (bi_only && it->cls != AppClass::BI) continue;
    v.push_back(&*it);
  }
  return v;
}

}  // namespace detail

/// Takes local memory from strictly-lower-priority apps, lowest priority
/// first, draining each victim before moving to the next. Demotions stay
/// within the remote-fault threshold.
inline YieldResult yield_mem(ControllerState& st, int requester_priority, double amount_gb,
                             double per_victim_cap = detail::kUnbounded,
                             const std::string& beneficiary = "") {
  YieldResult out;
  size_t j0 = st.journal().size();
  std::string reason = beneficiary.empty() ? "yield_mem" : "yield_mem:for=" + beneficiary;
  for (MercuryEntry* v : detail::victims_below(st, requester_priority, false)) {
    if (out.gathered >= amount_gb - kEps) break;
    double limit = v->alloc.local_mem_limit_gb;
    if (limit <= kEps) continue;
    double take_cap = std::min({amount_gb - out.gathered, per_victim_cap, limit});
    // Walk down the grid so the stop point honors the fault-rate guard.
    double taken = 0.0;
    while (taken + kEps < take_cap) {
      double step = std::min(kMemGridGb, take_cap - taken);
      double cand = limit - taken - step;
      if (!st.demotion_allowed(*v, cand)) break;
      taken += step;
    }
    if (taken <= kEps) continue;
    st.set_mem_limit(*v, limit - taken, reason);
    v->forced_cap_gb = v->alloc.local_mem_limit_gb;
    out.gathered += taken;
  }
  detail::collect_side_effects(st, j0, out);
  return out;
}

/// Takes fast-tier bandwidth from strictly-lower-priority BI apps, lowest
/// priority first: lower the victim's memory limit while the remote-fault
/// rate stays healthy, then switch to its CPU cap.
inline YieldResult yield_bw(ControllerState& st, int requester_priority, double amount_gbs,
                            double mem_cap_per_victim = detail::kUnbounded,
                            double cpu_cap_per_victim = detail::kUnbounded,
                            const std::string& beneficiary = "") {
  YieldResult out;
  size_t j0 = st.journal().size();
  std::string suffix = beneficiary.empty() ? "" : ":for=" + beneficiary;
  const MercuryPolicy& pol = st.policy();
  for (MercuryEntry* v : detail::victims_below(st, requester_priority, true)) {
    if (out.gathered >= amount_gbs - kEps) break;
    double full = offered_bw_full(v->cls, v->demand_bw_gbs, v->access_rate);

    auto bw_at = [&](double limit, double cpu) {
      double p = cxl_fraction(v->wss_gb, std::min(v->wss_gb, limit));
      return bi_achieved_bandwidth(full, p, cpu, st.machine());
    };

    double mem_used = 0.0;
    bool numa_tripped = false;
    while (out.gathered < amount_gbs - kEps && v->alloc.local_mem_limit_gb > kEps &&
           mem_used + kEps < mem_cap_per_victim) {
      double step = std::min({kMemGridGb, mem_cap_per_victim - mem_used,
                              v->alloc.local_mem_limit_gb});
      double cand = v->alloc.local_mem_limit_gb - step;
      if (!st.demotion_allowed(*v, cand)) {
        numa_tripped = true;
        break;
      }
      double before = bw_at(v->alloc.local_mem_limit_gb, v->alloc.cpu_util_cap);
      double after = bw_at(cand, v->alloc.cpu_util_cap);
      st.set_mem_limit(*v, cand, "yield_bw" + suffix);
      v->forced_cap_gb = v->alloc.local_mem_limit_gb;
      mem_used += step;
      out.gathered += std::max(0.0, before - after);
    }
    if (numa_tripped) {
      st.mark_numa_switch(*v, "yield_bw_numa_guard" + suffix);
    }

    // The CPU path engages only once the memory path is exhausted (the
    // limit hit zero or the fault-rate guard tripped), not merely because
    // this tick's memory budget ran out.
    double cpu_used = 0.0;
    while (out.gathered < amount_gbs - kEps && v->alloc.cpu_util_cap > pol.cpu_floor + kEps &&
           cpu_used + kEps < cpu_cap_per_victim &&
           (numa_tripped || v->alloc.local_mem_limit_gb <= kEps)) {
      double step = std::min({kCpuGrid, cpu_cap_per_victim - cpu_used,
                              v->alloc.cpu_util_cap - pol.cpu_floor});
      double cand = v->alloc.cpu_util_cap - step;
      double before = bw_at(v->alloc.local_mem_limit_gb, v->alloc.cpu_util_cap);
      double after = bw_at(v->alloc.local_mem_limit_gb, cand);
      st.set_cpu(*v, cand, "yield_bw_cpu" + suffix);
      cpu_used += step;
      out.gathered += std::max(0.0, before - after);
    }
  }
  detail::collect_side_effects(st, j0, out);
  return out;
}

struct AdmitDecision {
  enum class Outcome { Admitted, RejectedInadmissible, RejectedUnprofiled };
  Outcome outcome = Outcome::RejectedUnprofiled;
  Allocation allocation;
  double allocated_bw_gbs = 0.0;
  std::vector<std::pair<std::string, Allocation>> side_effects;

  bool admitted() const { return outcome == Outcome::Admitted; }
};

/// Admission control. Local memory: grant the profiled limit from free
/// memory, else yield from lower-priority apps and grant what was gathered.
/// BI apps additionally get bandwidth against the fast-tier budget, which
/// shrinks to thresh_local_bw while a higher-priority LS app is present.
inline AdmitDecision admit(ControllerState& st, const AppSpec& app,
                           const std::optional<ProfileResult>& profile) {
  AdmitDecision d;
  if (st.find(app.id)) throw SimError("app already admitted: " + app.id);
  if (!profile) {
    d.outcome = AdmitDecision::Outcome::RejectedUnprofiled;
    return d;
  }
  if (!profile->admissible) {
    d.outcome = AdmitDecision::Outcome::RejectedInadmissible;
    return d;
  }
  size_t j0 = st.journal().size();

  double want_mem = profile->mem_limit_gb.value_or(app.wss_gb);
  double free = st.free_local_mem();
  double granted_mem;
  YieldResult ym;
  if (free >= want_mem - kEps) {
    granted_mem = want_mem;
  } else {
    ym = yield_mem(st, app.priority, want_mem - free, detail::kUnbounded, app.id);
    granted_mem = std::min(want_mem, free + ym.gathered);
  }
  double cpu = app.cls == AppClass::BI ? profile->cpu_util.value_or(1.0) : 1.0;

  double granted_bw = 0.0;
  if (app.cls == AppClass::BI) {
    double want_bw = profile->bw_gbs.value_or(0.0);
    bool guard = st.higher_priority_ls_exists(app.priority);
    double budget = guard ? std::min(st.thresholds().thresh_local_bw_gbs,
                                     st.machine().local_bw_cap_gbs)
                          : st.machine().local_bw_cap_gbs;
    double avail = std::max(0.0, budget - st.accounted_local_bw());
    if (avail < want_bw - kEps) {
      yield_bw(st, app.priority, want_bw - avail, detail::kUnbounded, detail::kUnbounded,
               app.id);
      avail = std::max(0.0, budget - st.accounted_local_bw());
    }
    granted_bw = std::min(want_bw, avail);
    if (guard) {
      // Intra-tier guard: the newcomer's own fast-tier share must fit the
      // healthy budget; shrink its local memory until it does.
      double full = offered_bw_full(app.cls, app.demand_bw_gbs, app.access_rate);
      double planned = cpu * full * (app.wss_gb <= 0.0 ? 0.0
                                     : std::min(app.wss_gb, granted_mem) / app.wss_gb);
      if (planned > avail + kEps && cpu * full > kEps) {
        double max_local_frac = std::clamp(avail / (cpu * full), 0.0, 1.0);
        double max_limit = std::floor(app.wss_gb * max_local_frac / kMemGridGb) * kMemGridGb;
        granted_mem = std::min(granted_mem, std::max(0.0, max_limit));
      }
    }
  }

  MercuryEntry e;
  e.id = app.id;
  e.priority = app.priority;
  e.cls = app.cls;
  e.wss_gb = app.wss_gb;
  e.demand_bw_gbs = app.demand_bw_gbs;
  e.access_rate = app.access_rate;
  e.slo_value = app.slo.value;
  e.profile = *profile;
  e.alloc = Allocation{granted_mem, cpu};
  e.allocated_bw_gbs = granted_bw;
  e.mem_floor_gb = std::min(granted_mem, profile->mem_limit_gb.value_or(0.0));
  st.insert(std::move(e));

  d.outcome = AdmitDecision::Outcome::Admitted;
  d.allocation = Allocation{granted_mem, cpu};
  d.allocated_bw_gbs = granted_bw;
  YieldResult fx;
  detail::collect_side_effects(st, j0, fx);
  for (auto& [id, alloc] : fx.side_effects) {
    if (id != app.id) d.side_effects.emplace_back(id, alloc);
  }
  return d;
}

namespace detail {

inline bool slo_met(const MercuryEntry& e) {
  if (!e.has_measurement) return true;
  return e.cls == AppClass::LS ? e.measured_latency_ns <= e.slo_value
                               : e.measured_bw_gbs >= e.slo_value;
}

inline double slo_margin(const MercuryEntry& e) {
  if (e.slo_value <= 0.0) return 0.0;
  return e.cls == AppClass::LS ? (e.slo_value - e.measured_latency_ns) / e.slo_value
                               : (e.measured_bw_gbs - e.slo_value) / e.slo_value;
}

inline bool higher_all_comfortable(const ControllerState& st, const MercuryEntry& e) {
  for (const MercuryEntry& h : st.entries()) {
    if (h.priority <= e.priority) break;  // descending order
    if (!h.has_measurement) continue;
    if (!slo_met(h) || slo_margin(h) < st.policy().yield_hyst) return false;
  }
  return true;
}

/// Whether the app's achieved bandwidth is clipped by tier contention, i.e.
/// additional fast-tier memory could actually raise it.
inline bool bw_clipped(const MercuryEntry& e) {
  if (e.cls != AppClass::BI || !e.has_measurement) return false;
  double offered = e.alloc.cpu_util_cap * offered_bw_full(e.cls, e.demand_bw_gbs, e.access_rate);
  return e.measured_bw_gbs < 0.98 * offered;
}

/// Largest memory limit a BI app may hold without its fast-tier bandwidth
/// busting the healthy budget while a higher-priority LS app exists.
inline double max_bi_limit_under_intra(const ControllerState& st, const MercuryEntry& e) {
  if (e.cls != AppClass::BI || !st.higher_priority_ls_exists(e.priority)) {
    return e.wss_gb;
  }
  double budget = std::min(st.thresholds().thresh_local_bw_gbs, st.machine().local_bw_cap_gbs);
  double headroom = budget - st.accounted_local_bw(e.id);
  double own = e.alloc.cpu_util_cap * offered_bw_full(e.cls, e.demand_bw_gbs, e.access_rate);
  if (own <= kEps) return e.wss_gb;
  double frac = std::clamp(headroom / own, 0.0, 1.0);
  return e.wss_gb * frac;
}

/// Ceiling for any memory growth of this app: its working set, the fast-tier
/// bandwidth budget, and the cap left behind by a foregoing yield.
inline double growth_ceiling(const ControllerState& st, const MercuryEntry& e) {
  return std::min({e.wss_gb, max_bi_limit_under_intra(st, e), e.forced_cap_gb});
}

/// Isolated metric deltas used to predict whether a voluntary yield keeps a
/// comfortable margin.
inline double predicted_latency_after(const ControllerState& st, const MercuryEntry& e,
                                      double new_limit) {
  double p_now = e.p_target();
  double p_new = cxl_fraction(e.wss_gb, std::min(e.wss_gb, new_limit));
  TierLoad unloaded{0.0, 0.0};
  double delta = ls_access_latency(p_new, unloaded, st.machine()) -
                 ls_access_latency(p_now, unloaded, st.machine());
  return e.measured_latency_ns + delta;
}

inline double predicted_bw_after(const ControllerState& st, const MercuryEntry& e,
                                 double new_limit, double new_cpu) {
  double full = offered_bw_full(e.cls, e.demand_bw_gbs, e.access_rate);
  double p_now = e.p_target();
  double p_new = cxl_fraction(e.wss_gb, std::min(e.wss_gb, new_limit));
  double delta = bi_achieved_bandwidth(full, p_new, new_cpu, st.machine()) -
                 bi_achieved_bandwidth(full, p_now, e.alloc.cpu_util_cap, st.machine());
  return e.measured_bw_gbs + delta;
}

/// Voluntary resource release for an app running well above its SLO: shrink
/// the memory limit toward its floor, then (BI) lower the CPU cap, keeping
/// the remote-fault guard and a comfortable predicted margin.
inline void self_yield(ControllerState& st, MercuryEntry& e) {
  const MercuryPolicy& pol = st.policy();
  double floor = std::max(e.mem_floor_gb, 0.0);
  if (e.alloc.local_mem_limit_gb > floor + kEps) {
    double step = std::min(pol.mem_step_gb, e.alloc.local_mem_limit_gb - floor);
    double cand = e.alloc.local_mem_limit_gb - step;
    if (!st.demotion_allowed(e, cand)) return;
    if (e.cls == AppClass::LS) {
      double lat = predicted_latency_after(st, e, cand);
      if (lat > e.slo_value * (1.0 - pol.yield_hyst)) return;
    } else {
      double bw = predicted_bw_after(st, e, cand, e.alloc.cpu_util_cap);
      if (bw < e.slo_value * (1.0 + pol.yield_hyst)) return;
    }
    st.set_mem_limit(e, cand, "self_yield_mem");
    return;
  }
  if (e.cls == AppClass::BI && e.alloc.cpu_util_cap > pol.cpu_floor + kEps) {
    double cand = std::max(pol.cpu_floor, e.alloc.cpu_util_cap - pol.cpu_step);
    double bw = predicted_bw_after(st, e, e.alloc.local_mem_limit_gb, cand);
    if (bw < e.slo_value * (1.0 + pol.yield_hyst)) return;
    st.set_cpu(e, cand, "self_yield_cpu");
  }
}

/// A satisfied app below the comfort band tops itself up from free memory
/// only; building margin never victimizes anyone. Grants raise the yield
/// floor so the margin is not immediately handed back.
inline void comfort_pull(ControllerState& st, MercuryEntry& e) {
  if (e.alloc.local_mem_limit_gb + kEps >= e.wss_gb) return;
  if (e.cls == AppClass::BI && !bw_clipped(e)) return;
  // Like any restoration, building margin must not squeeze a tight
  // higher-priority app; otherwise yields and pulls chase each other.
  if (!higher_all_comfortable(st, e)) return;
  double ceiling = growth_ceiling(st, e);
  double want = std::min({st.policy().mem_step_gb, e.wss_gb - e.alloc.local_mem_limit_gb,
                          std::max(0.0, ceiling - e.alloc.local_mem_limit_gb)});
  double got = std::min(want, st.free_local_mem());
  if (got <= kEps) return;
  st.set_mem_limit(e, e.alloc.local_mem_limit_gb + got, "comfort_mem");
  e.mem_floor_gb = std::max(e.mem_floor_gb, e.alloc.local_mem_limit_gb);
}

/// Remediation chain for a violated app:
///   (1) a throttled BI raises its own CPU, if every higher-priority app is
///       comfortably met and the fast-tier budget allows;
///   (2) squeeze bandwidth out of lower-priority BI apps;
///   (3) grow the local memory limit from free memory, then from
///       lower-priority victims in ascending priority.
inline void remediate(ControllerState& st, MercuryEntry& e) {
  const MercuryPolicy& pol = st.policy();

  if (e.cls == AppClass::BI && e.alloc.cpu_util_cap < 1.0 - kEps &&
      higher_all_comfortable(st, e)) {
    double cand = std::min(1.0, e.alloc.cpu_util_cap + pol.cpu_step);
    bool allowed = true;
    if (st.higher_priority_ls_exists(e.priority)) {
      double budget = std::min(st.thresholds().thresh_local_bw_gbs,
                               st.machine().local_bw_cap_gbs);
      double full = offered_bw_full(e.cls, e.demand_bw_gbs, e.access_rate);
      double planned = (1.0 - e.p_target()) * cand * full;
      allowed = st.accounted_local_bw(e.id) + planned <= budget + kEps;
    }
    if (allowed) {
      st.set_cpu(e, cand, "increase_cpu");
      return;
    }
  }

  size_t j0 = st.journal().size();
  yield_bw(st, e.priority, detail::kUnbounded, pol.mem_step_gb, pol.cpu_step, e.id);
  bool reduced_bw = false;
  for (size_t k = j0; k < st.journal().size(); ++k) {
    if (st.journal()[k].kind != MercuryAction::Kind::NumaSwitch) reduced_bw = true;
  }
  if (reduced_bw) return;

  if (e.alloc.local_mem_limit_gb + kEps < e.wss_gb) {
    // For a BI app more fast-tier memory only helps while contention clips
    // its bandwidth; an unclipped one is CPU-bound and must not hoard.
    if (e.cls == AppClass::BI && !bw_clipped(e)) return;
    double ceiling = growth_ceiling(st, e);
    double want = std::min({pol.mem_step_gb, e.wss_gb - e.alloc.local_mem_limit_gb,
                            std::max(0.0, ceiling - e.alloc.local_mem_limit_gb)});
    if (want <= kEps) return;
    double from_free = std::min(want, st.free_local_mem());
    double got = from_free;
    if (got + kEps < want) {
      YieldResult ym = yield_mem(st, e.priority, want - got, pol.mem_step_gb, e.id);
      got += ym.gathered;
    }
    if (got > kEps) {
      st.set_mem_limit(e, e.alloc.local_mem_limit_gb + got, "grant_mem");
    }
  }
}

}  // namespace detail

/// One adaptation pass, apps in descending priority: violated apps walk the
/// remediation chain; satisfied apps above the comfort band yield resources,
/// those below it top up from free memory. On a quiet pass (no allocation
/// changed), leftover fast-tier memory is handed out by descending priority
/// (work conservation); grants raise the recipient's yield floor so they are
/// not immediately handed back.
inline void adapt_tick(ControllerState& st) {
  size_t j0 = st.journal().size();
  bool any_violated = false;
  // Index-based loop: remediation never reorders entries. A satisfied app
  // does not self-yield while a higher-priority app is violated; that app's
  // own yield path is already draining victims in the proper order.
  for (size_t i = 0; i < st.entries().size(); ++i) {
    MercuryEntry& e = st.entries()[i];
    if (!e.has_measurement) continue;
    if (detail::higher_all_comfortable(st, e)) {
      e.forced_cap_gb = std::numeric_limits<double>::infinity();  // lift the yield cap
    }
    if (detail::slo_met(e)) {
      if (detail::slo_margin(e) > st.policy().yield_hyst) {
        if (!any_violated) detail::self_yield(st, e);
      } else {
        detail::comfort_pull(st, e);
      }
    } else {
      any_violated = true;
      detail::remediate(st, e);
    }
  }
  for (size_t k = j0; k < st.journal().size(); ++k) {
    if (st.journal()[k].kind != MercuryAction::Kind::NumaSwitch) return;  // not quiet
  }
  double free = st.free_local_mem();
  if (free <= kMemGridGb) return;
  for (MercuryEntry& e : st.entries()) {
    // Never hand memory back to an app whose seniors are still tight; that
    // would undo the yield that freed it and start a limit cycle.
    if (!detail::higher_all_comfortable(st, e)) continue;
    double ceiling = detail::growth_ceiling(st, e);
    double grant = std::min(free, ceiling - e.alloc.local_mem_limit_gb);
    if (grant <= kEps) continue;
    st.set_mem_limit(e, e.alloc.local_mem_limit_gb + grant, "work_conservation");
    e.mem_floor_gb = std::max(e.mem_floor_gb, e.alloc.local_mem_limit_gb);
    free -= grant;
    if (free <= kEps) break;
  }
}

/// Ties the admission/adaptation state machine to the simulation: profiles
/// arrivals, applies decisions and journal entries, and writes the action
/// log.
class MercuryController : public Controller {
 public:
  MercuryController(const MachineSpec& machine, const Thresholds& thresholds,
                    MercuryPolicy policy = {})
      : state_(machine, thresholds, policy) {}

  /// Calibrates thresholds from the machine spec.
  static MercuryController make(const MachineSpec& machine, MercuryPolicy policy = {}) {
    return MercuryController(machine, calibrate_thresholds(machine), policy);
  }

  std::string name() const override { return "mercury"; }
  ControllerState& state() { return state_; }

  bool on_arrival(SimState& sim, const std::string& app_id) override {
    AppRuntime& rt = sim.require(app_id);
    ProfileResult profile = profile_app(rt.spec, sim.machine());
    AdmitDecision d = admit(state_, rt.spec, profile);
    if (!d.admitted()) {
      log(sim.tick_index(), "reject", app_id, "", 0.0, 0.0,
          d.outcome == AdmitDecision::Outcome::RejectedInadmissible ? "inadmissible"
                                                                    : "unprofiled");
      return false;
    }
    sim.apply_allocation(app_id, d.allocation);
    log(sim.tick_index(), "admit", app_id, "local_mem_limit_gb", 0.0,
        d.allocation.local_mem_limit_gb, "admission_grant");
    if (rt.spec.cls == AppClass::BI) {
      log(sim.tick_index(), "admit", app_id, "cpu_util_cap", 1.0, d.allocation.cpu_util_cap,
          "admission_grant");
      log(sim.tick_index(), "admit", app_id, "allocated_bw_gbs", 0.0, d.allocated_bw_gbs,
          "admission_grant");
    }
    flush_journal(sim);
    return true;
  }

  void on_departure(SimState& sim, const std::string& app_id) override {
    state_.erase(app_id);
    log(sim.tick_index(), "depart", app_id, "", 0.0, 0.0, "departure");
  }

  void on_phase_change(SimState& sim, const std::string& app_id) override {
    MercuryEntry* e = state_.find(app_id);
    AppRuntime* rt = sim.find(app_id);
    if (!e || !rt) return;
    e->wss_gb = rt->spec.wss_gb;
    e->demand_bw_gbs = rt->spec.demand_bw_gbs;
    e->access_rate = rt->spec.access_rate;
    if (e->alloc.local_mem_limit_gb > e->wss_gb) {
      st_clamp(sim, *e);
    }
    e->mem_floor_gb = std::min(e->mem_floor_gb, e->wss_gb);
  }

  void on_tick(SimState& sim, const TickRecord& rec) override {
    for (const AppTick& at : rec.apps) {
      MercuryEntry* e = state_.find(at.app);
      if (!e) continue;
      e->has_measurement = true;
      e->measured_latency_ns = at.latency_ns;
      e->measured_bw_gbs = at.bw_gbs;
      e->resident_local_gb = at.resident_local_gb;
    }
    adapt_tick(state_);
    flush_journal(sim);
  }

 private:
  void st_clamp(SimState& sim, MercuryEntry& e) {
    state_.set_mem_limit(e, e.wss_gb, "phase_clamp");
    flush_journal(sim);
  }

  /// Applies journaled mutations to the simulation and logs them.
  void flush_journal(SimState& sim) {
    for (const MercuryAction& a : state_.journal()) {
      switch (a.kind) {
        case MercuryAction::Kind::SetMemLimit:
          log(sim.tick_index(), "set_mem_limit", a.app, "local_mem_limit_gb", a.old_value,
              a.new_value, a.reason);
          break;
        case MercuryAction::Kind::SetCpuCap:
          log(sim.tick_index(), "set_cpu_cap", a.app, "cpu_util_cap", a.old_value, a.new_value,
              a.reason);
          break;
        case MercuryAction::Kind::NumaSwitch:
          log(sim.tick_index(), "numa_guard", a.app, "target_p", a.old_value, a.new_value,
              a.reason);
          break;
      }
    }
    state_.journal().clear();
    for (const MercuryEntry& e : state_.entries()) {
      if (sim.find(e.id)) {
        const AppRuntime& rt = *sim.find(e.id);
        if (std::abs(rt.alloc.local_mem_limit_gb - e.alloc.local_mem_limit_gb) > kEps ||
            std::abs(rt.alloc.cpu_util_cap - e.alloc.cpu_util_cap) > kEps) {
          sim.apply_allocation(e.id, e.alloc);
        }
      }
    }
  }

  ControllerState state_;
};

}  // namespace tiersim
