#include "forestnav/flight_log.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace forestnav {

using nlohmann::json;

json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

namespace {

json state_json(const DroneState& s) { return {{"p", vec_to_json(s.p)}, {"v", vec_to_json(s.v)}, {"a", vec_to_json(s.a)}}; }

DroneState state_from(const json& j) {
  return DroneState{vec_from_json(j.at("p")), vec_from_json(j.at("v")), vec_from_json(j.at("a"))};
}

json tick_json(const TickRecord& r) {
  json j;
  j["type"] = "tick";
  j["t"] = r.t;
  j["truth"] = state_json(r.truth);
  j["estimate"] = state_json(r.estimate);
  j["command"] = {{"jerk", vec_to_json(r.command.jerk)},
                  {"source", r.command.source},
                  {"replay_age", r.command.replay_age},
                  {"solver", r.command.solver_status},
                  {"iterations", r.command.iterations},
                  {"primal_residual", r.command.primal_residual},
                  {"dual_residual", r.command.dual_residual}};
  j["plan"] = {{"status", r.plan_status}, {"expansions", r.expansions}};
  if (!r.geometry.is_null()) j["geometry"] = r.geometry;
  auto& ev = j["events"] = json::array();
  for (const auto& e : r.events) ev.push_back({{"type", e.type}, {"t", e.t}, {"data", e.data}});
  return j;
}

TickRecord tick_from(const json& j) {
  TickRecord r;
  r.t = j.at("t").get<double>();
  r.truth = state_from(j.at("truth"));
  r.estimate = state_from(j.at("estimate"));
  const auto& c = j.at("command");
  r.command.jerk = vec_from_json(c.at("jerk"));
  r.command.source = c.at("source").get<std::string>();
  r.command.replay_age = c.at("replay_age").get<int>();
  r.command.solver_status = c.at("solver").get<std::string>();
  r.command.iterations = c.at("iterations").get<int>();
  r.command.primal_residual = c.at("primal_residual").get<double>();
  r.command.dual_residual = c.at("dual_residual").get<double>();
  r.plan_status = j.at("plan").at("status").get<std::string>();
  r.expansions = j.at("plan").at("expansions").get<std::uint64_t>();
  if (j.contains("geometry")) r.geometry = j.at("geometry");
  for (const auto& e : j.at("events")) r.events.push_back(LogEvent{e.at("type"), e.at("t"), e.at("data")});
  return r;
}

}  // namespace

std::vector<LogEvent> FlightLog::events() const {
  std::vector<LogEvent> out;
  for (const auto& tick : ticks) out.insert(out.end(), tick.events.begin(), tick.events.end());
  return out;
}

void FlightLog::write_jsonl(std::ostream& os) const {
  json h = header;
  h["type"] = "header";
  os << h.dump() << '\n';
  for (const auto& tick : ticks) os << tick_json(tick).dump() << '\n';
  if (end) {
    json e;
    e["type"] = "end";
    e["t"] = end->t;
    e["reason"] = end->reason;
    e["terminal_truth"] = vec_to_json(end->terminal_truth);
    e["terminal_estimate"] = vec_to_json(end->terminal_estimate);
    e["goal"] = vec_to_json(end->goal);
    os << e.dump() << '\n';
  }
}

std::string FlightLog::to_jsonl() const {
  std::ostringstream os;
  write_jsonl(os);
  return os.str();
}

FlightLog FlightLog::read_jsonl(std::istream& is) {
  FlightLog log;
  std::string line;
  bool have_header = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("flight log line " + std::to_string(lineno) + ": " + e.what());
    }
    const std::string type = j.at("type").get<std::string>();
    if (type == "header") {
      j.erase("type");
      log.header = std::move(j);
      have_header = true;
    } else if (type == "tick") {
      log.ticks.push_back(tick_from(j));
    } else if (type == "end") {
      EndRecord e;
      e.t = j.at("t").get<double>();
      e.reason = j.at("reason").get<std::string>();
      e.terminal_truth = vec_from_json(j.at("terminal_truth"));
      e.terminal_estimate = vec_from_json(j.at("terminal_estimate"));
      e.goal = vec_from_json(j.at("goal"));
      log.end = e;
    } else {
      throw std::runtime_error("flight log line " + std::to_string(lineno) + ": unknown record type " + type);
    }
  }
  if (!have_header) throw std::runtime_error("flight log has no header record");
  return log;
}

FlightLog FlightLog::parse_jsonl(const std::string& text) {
  std::istringstream is(text);
  return read_jsonl(is);
}

}  // namespace forestnav
