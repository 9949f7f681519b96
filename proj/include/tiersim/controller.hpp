#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tiersim/core.hpp"

namespace tiersim {

class SimState;
struct TickRecord;

/// One audited controller action, serialized as a JSON line.
struct ActionLogEntry {
  std::int64_t tick = 0;
  std::string actor;
  std::string action;  // "admit", "reject", "set_mem_limit", "set_cpu_cap", ...
  std::string app;
  std::string field;
  double old_value = 0.0;
  double new_value = 0.0;
  std::string reason;
};

/// Per-tick policy driving a simulation. on_arrival returns false to drop
/// the app (admission rejection); on_tick reacts to the freshly sampled
/// TickRecord and mutates allocations through SimState.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  virtual bool on_arrival(SimState& state, const std::string& app_id) = 0;
  virtual void on_departure(SimState& /*state*/, const std::string& /*app_id*/) {}
  virtual void on_phase_change(SimState& /*state*/, const std::string& /*app_id*/) {}
  virtual void on_tick(SimState& state, const TickRecord& record) = 0;

  const std::vector<ActionLogEntry>& action_log() const { return log_; }

 protected:
  void log(std::int64_t tick, const std::string& action, const std::string& app,
           const std::string& field, double oldv, double newv, const std::string& reason) {
    log_.push_back({tick, name(), action, app, field, oldv, newv, reason});
  }

  std::vector<ActionLogEntry> log_;
};

}  // namespace tiersim
