#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tiersim/controller.hpp"
#include "tiersim/core.hpp"
#include "tiersim/sim.hpp"

namespace tiersim {

using json = nlohmann::ordered_json;

/// Validation failures carried out of load_scenario as an aggregated list.
struct ValidationFailure : SimError {
  explicit ValidationFailure(std::vector<ValidationError> errs)
      : SimError(format(errs)), errors(std::move(errs)) {}
  std::vector<ValidationError> errors;

 private:
  static std::string format(const std::vector<ValidationError>& errs) {
    std::ostringstream os;
    os << "scenario validation failed:";
    for (const ValidationError& e : errs) {
      os << "\n  " << to_string(e.kind) << " [" << e.subject << "] " << e.message;
    }
    return os.str();
  }
};

namespace detail {

inline std::size_t line_of_offset(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) {
    throw ParseError("missing key '" + std::string(key) + "' in " + ctx);
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError("bad value for '" + std::string(key) + "' in " + ctx + ": " + e.what());
  }
}

template <typename T>
T get_field_or(const json& j, const char* key, const std::string& ctx, T fallback) {
  if (!j.contains(key)) return fallback;
  return get_field<T>(j, key, ctx);
}

}  // namespace detail

inline json machine_to_json(const MachineSpec& m) {
  json j;
  j["local_capacity_gb"] = m.local_capacity_gb;
  j["cxl_capacity_gb"] = m.cxl_capacity_gb;
  j["local_bw_cap_gbs"] = m.local_bw_cap_gbs;
  j["cxl_bw_cap_gbs"] = m.cxl_bw_cap_gbs;
  j["lat_local_base_ns"] = m.lat_local_base_ns;
  j["lat_cxl_base_ns"] = m.lat_cxl_base_ns;
  j["kq_local_ns"] = m.kq_local_ns;
  j["kq_cxl_ns"] = m.kq_cxl_ns;
  j["coupling_c_ns"] = m.coupling_c_ns;
  j["interleave_ratio"] = json::array({m.interleave_m, m.interleave_n});
  j["migration_rate_gbs"] = m.migration_rate_gbs;
  j["fault_coeff"] = m.fault_coeff;
  return j;
}

inline MachineSpec machine_from_json(const json& j) {
  using detail::get_field;
  using detail::get_field_or;
  MachineSpec d;  // field defaults double as schema defaults
  MachineSpec m;
  const std::string ctx = "machine";
  m.local_capacity_gb = get_field<double>(j, "local_capacity_gb", ctx);
  m.cxl_capacity_gb = get_field<double>(j, "cxl_capacity_gb", ctx);
  m.local_bw_cap_gbs = get_field_or(j, "local_bw_cap_gbs", ctx, d.local_bw_cap_gbs);
  m.cxl_bw_cap_gbs = get_field_or(j, "cxl_bw_cap_gbs", ctx, d.cxl_bw_cap_gbs);
  m.lat_local_base_ns = get_field_or(j, "lat_local_base_ns", ctx, d.lat_local_base_ns);
  m.lat_cxl_base_ns = get_field_or(j, "lat_cxl_base_ns", ctx, d.lat_cxl_base_ns);
  m.kq_local_ns = get_field_or(j, "kq_local_ns", ctx, d.kq_local_ns);
  m.kq_cxl_ns = get_field_or(j, "kq_cxl_ns", ctx, d.kq_cxl_ns);
  m.coupling_c_ns = get_field_or(j, "coupling_c_ns", ctx, d.coupling_c_ns);
  m.migration_rate_gbs = get_field_or(j, "migration_rate_gbs", ctx, d.migration_rate_gbs);
  m.fault_coeff = get_field_or(j, "fault_coeff", ctx, d.fault_coeff);
  if (j.contains("interleave_ratio")) {
    const json& r = j.at("interleave_ratio");
    if (!r.is_array() || r.size() != 2) {
      throw ParseError("machine.interleave_ratio must be a [m, n] pair");
    }
    m.interleave_m = r[0].get<int>();
    m.interleave_n = r[1].get<int>();
  }
  return m;
}

inline json phase_to_json(const WorkloadPhase& p) {
  json j;
  j["start_s"] = p.start_s;
  j["demand_bw_gbs"] = p.demand_bw_gbs;
  j["wss_gb"] = p.wss_gb;
  j["access_rate"] = p.access_rate;
  return j;
}

inline WorkloadPhase phase_from_json(const json& j, const std::string& ctx) {
  using detail::get_field;
  WorkloadPhase p;
  p.start_s = detail::get_field_or(j, "start_s", ctx, 0.0);
  p.demand_bw_gbs = get_field<double>(j, "demand_bw_gbs", ctx);
  p.wss_gb = get_field<double>(j, "wss_gb", ctx);
  p.access_rate = get_field<double>(j, "access_rate", ctx);
  return p;
}

inline json scenario_to_json(const ScenarioSpec& sc) {
  json j;
  j["machine"] = machine_to_json(sc.machine);
  j["apps"] = json::array();
  for (const ScenarioApp& sa : sc.apps) {
    const AppSpec& a = sa.spec;
    json ja;
    ja["id"] = a.id;
    ja["class"] = to_string(a.cls);
    ja["priority"] = a.priority;
    ja["wss_gb"] = a.wss_gb;
    ja["demand_bw_gbs"] = a.demand_bw_gbs;
    ja["access_rate"] = a.access_rate;
    ja["arrival_s"] = sa.arrival_s;
    ja["slo"] = json{{"kind", to_string(a.slo.kind)}, {"value", a.slo.value}};
    ja["phases"] = json::array();
    for (const WorkloadPhase& p : a.phases) ja["phases"].push_back(phase_to_json(p));
    j["apps"].push_back(std::move(ja));
  }
  j["events"] = json::array();
  for (const EventSpec& ev : sc.events) {
    json je;
    je["at_s"] = ev.at_s;
    je["kind"] = ev.kind == EventSpec::Kind::Departure ? "departure" : "phase_change";
    je["app"] = ev.app;
    if (ev.phase) je["phase"] = phase_to_json(*ev.phase);
    j["events"].push_back(std::move(je));
  }
  j["horizon_s"] = sc.horizon_s;
  j["tick_s"] = sc.tick_s;
  j["seed"] = sc.seed;
  return j;
}

inline ScenarioSpec scenario_from_json(const json& j, const std::string& name) {
  using detail::get_field;
  using detail::get_field_or;
  ScenarioSpec sc;
  sc.name = name;
  if (!j.contains("machine")) throw ParseError("missing key 'machine'");
  sc.machine = machine_from_json(j.at("machine"));
  if (!j.contains("apps")) throw ParseError("missing key 'apps'");
  for (const json& ja : j.at("apps")) {
    ScenarioApp sa;
    AppSpec& a = sa.spec;
    a.id = get_field<std::string>(ja, "id", "app");
    std::string ctx = "app '" + a.id + "'";
    std::string cls = get_field<std::string>(ja, "class", ctx);
    if (cls == "LS") {
      a.cls = AppClass::LS;
    } else if (cls == "BI") {
      a.cls = AppClass::BI;
    } else {
      throw ParseError("unknown class '" + cls + "' in " + ctx);
    }
    a.priority = get_field<int>(ja, "priority", ctx);
    a.wss_gb = get_field<double>(ja, "wss_gb", ctx);
    a.demand_bw_gbs = get_field_or(ja, "demand_bw_gbs", ctx, 0.0);
    a.access_rate = get_field_or(ja, "access_rate", ctx, 0.0);
    sa.arrival_s = get_field_or(ja, "arrival_s", ctx, 0.0);
    if (!ja.contains("slo")) throw ParseError("missing key 'slo' in " + ctx);
    const json& js = ja.at("slo");
    std::string kind = get_field<std::string>(js, "kind", ctx + ".slo");
    if (kind == "latency_ns") {
      a.slo.kind = SloKind::LatencyNs;
    } else if (kind == "bandwidth_gbs") {
      a.slo.kind = SloKind::BandwidthGBs;
    } else {
      throw ParseError("unknown slo kind '" + kind + "' in " + ctx);
    }
    a.slo.value = get_field<double>(js, "value", ctx + ".slo");
    if (ja.contains("phases")) {
      for (const json& jp : ja.at("phases")) {
        a.phases.push_back(phase_from_json(jp, ctx + ".phase"));
      }
    }
    sc.apps.push_back(std::move(sa));
  }
  if (j.contains("events")) {
    for (const json& je : j.at("events")) {
      EventSpec ev;
      ev.at_s = get_field<double>(je, "at_s", "event");
      ev.app = get_field<std::string>(je, "app", "event");
      std::string kind = get_field<std::string>(je, "kind", "event");
      if (kind == "departure") {
        ev.kind = EventSpec::Kind::Departure;
      } else if (kind == "phase_change") {
        ev.kind = EventSpec::Kind::PhaseChange;
        if (!je.contains("phase")) throw ParseError("phase_change event without phase");
        ev.phase = phase_from_json(je.at("phase"), "event.phase");
      } else {
        throw ParseError("unknown event kind '" + kind + "'");
      }
      sc.events.push_back(std::move(ev));
    }
  }
  sc.horizon_s = get_field<double>(j, "horizon_s", "scenario");
  sc.tick_s = get_field_or(j, "tick_s", "scenario", 0.2);
  sc.seed = get_field_or<std::uint64_t>(j, "seed", "scenario", 0);
  return sc;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

/// Parses and validates a scenario file. JSON problems raise ParseError with
/// the line number; invariant problems raise ValidationFailure with the full
/// error list.
inline ScenarioSpec load_scenario(const std::string& path) {
  std::string text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("parse error in " + path + " at line " +
                     std::to_string(detail::line_of_offset(text, e.byte)) + ": " + e.what());
  }
  std::string name = path;
  if (auto pos = name.find_last_of('/'); pos != std::string::npos) name = name.substr(pos + 1);
  if (auto pos = name.rfind(".json"); pos != std::string::npos) name = name.substr(0, pos);
  ScenarioSpec sc = scenario_from_json(j, name);
  std::vector<ValidationError> errs = validate_scenario(sc);
  if (!errs.empty()) throw ValidationFailure(std::move(errs));
  return sc;
}

inline json action_log_entry_to_json(const ActionLogEntry& a) {
  json j;
  j["tick"] = a.tick;
  j["actor"] = a.actor;
  j["action"] = a.action;
  j["app"] = a.app;
  j["field"] = a.field;
  j["old"] = a.old_value;
  j["new"] = a.new_value;
  j["reason"] = a.reason;
  return j;
}

inline std::string action_log_to_jsonl(const std::vector<ActionLogEntry>& log) {
  std::string out;
  for (const ActionLogEntry& a : log) {
    out += action_log_entry_to_json(a).dump();
    out += '\n';
  }
  return out;
}

}  // namespace tiersim
