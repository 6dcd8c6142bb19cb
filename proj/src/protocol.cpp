#include "flighttutor/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "flighttutor/error.hpp"
#include "json_io.hpp"

namespace ftutor {

namespace {

json line_json(const LineGeometry& g) {
  return json{{"center_x", g.center_x}, {"center_y", g.center_y}, {"slope_angle", g.slope_angle}};
}

LineGeometry line_from(const json& j) {
  return {field<double>(j, "center_x"), field<double>(j, "center_y"),
          field<double>(j, "slope_angle")};
}

}  // namespace

void to_json(json& j, const FeedbackEvent& e) {
  json flags = json::array();
  for (const ErrorFlag& f : e.flags)
    flags.push_back({{"kind", to_string(f.kind)},
                     {"t", f.t},
                     {"magnitude", f.magnitude},
                     {"threshold", f.threshold}});
  json raised = json::array();
  for (ErrorKind k : e.raised_now) raised.push_back(to_string(k));
  j = json{{"t", e.t},
           {"verification", to_string(e.verification)},
           {"flags", flags},
           {"raised", raised},
           {"hint", e.hint},
           {"agent_line", line_json(e.agent_line)},
           {"student_line", line_json(e.student_line)},
           {"active", e.active}};
}

void from_json(const json& j, FeedbackEvent& e) {
  e.t = field<double>(j, "t");
  e.verification = parse_verification(field<std::string>(j, "verification"));
  e.flags.clear();
  for (const json& f : j.at("flags"))
    e.flags.push_back({parse_error_kind(field<std::string>(f, "kind")), field<double>(f, "t"),
                       field<double>(f, "magnitude"), field<double>(f, "threshold")});
  e.raised_now.clear();
  if (auto it = j.find("raised"); it != j.end())
    for (const json& k : *it) e.raised_now.push_back(parse_error_kind(k.get<std::string>()));
  e.hint = field<std::string>(j, "hint");
  e.agent_line = line_from(j.at("agent_line"));
  e.student_line = line_from(j.at("student_line"));
  e.active = field<bool>(j, "active");
}

namespace protocol {
namespace {

template <class T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

template <class T>
std::optional<T> get_optional(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return field<T>(j, key);
}

struct Encoder {
  json operator()(const Control& m) const {
    json j{{"type", "control"}, {"t", m.t}, {"yp", m.yp}, {"yr", m.yr}};
    if (!m.warning.empty()) j["warning"] = m.warning;
    return j;
  }
  json operator()(const Start& m) const {
    json j{{"type", "start"}};
    put_optional(j, "initial_heading", m.initial_heading);
    put_optional(j, "target_heading", m.target_heading);
    put_optional(j, "target_altitude", m.target_altitude);
    put_optional(j, "target_airspeed", m.target_airspeed);
    put_optional(j, "duration", m.duration);
    put_optional(j, "seed", m.seed);
    return j;
  }
  json operator()(const Stop&) const { return json{{"type", "stop"}}; }
  json operator()(const State& m) const {
    return json{{"type", "state"},          {"t", m.t},
                {"heading", m.heading},     {"altitude", m.altitude},
                {"airspeed", m.airspeed},   {"pitch_att", m.pitch_att},
                {"roll_att", m.roll_att},   {"target_heading", m.target_heading}};
  }
  json operator()(const Feedback& m) const {
    json j = m.event;
    j["type"] = "feedback";
    return j;
  }
  json operator()(const End& m) const {
    const Summary& s = m.summary;
    return json{{"type", "end"},
                {"summary",
                 {{"ticks", s.ticks},
                  {"duration", s.duration},
                  {"final_heading_error", s.final_heading_error},
                  {"mean_abs_altitude_error", s.mean_abs_altitude_error},
                  {"mean_abs_airspeed_error", s.mean_abs_airspeed_error},
                  {"pitch_flags", s.pitch_flags},
                  {"roll_flags", s.roll_flags},
                  {"dropped_events", s.dropped_events},
                  {"reason", s.reason}}}};
  }
  json operator()(const ErrorMessage& m) const {
    return json{{"type", "error"}, {"message", m.message}};
  }
};

double clamp_yoke(double v, std::string& warning) {
  if (!std::isfinite(v)) throw Error(ErrorCode::Parse, "control: non-finite yoke value");
  if (v > 1.0 || v < -1.0) {
    warning = "yoke value out of range; clamped to [-1, 1]";
    return std::clamp(v, -1.0, 1.0);
  }
  return v;
}

}  // namespace

std::string encode(const Message& message) {
  return std::visit(Encoder{}, message).dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string type_name(const Message& message) {
  return std::visit(Encoder{}, message).at("type").get<std::string>();
}

namespace {

Message decode_object(const json& j, const std::string& type);

}  // namespace

Message decode(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error&) {
    throw Error(ErrorCode::Parse, "malformed message: not a JSON object");
  }
  if (!j.is_object()) throw Error(ErrorCode::Parse, "malformed message: not a JSON object");
  auto type_it = j.find("type");
  if (type_it == j.end() || !type_it->is_string())
    throw Error(ErrorCode::Parse, "malformed message: missing \"type\"");
  const std::string type = type_it->get<std::string>();
  static const std::set<std::string> known = {"control", "start", "stop",  "state",
                                              "feedback", "end",  "error"};
  if (!known.count(type)) throw Error(ErrorCode::Parse, "unknown message type '" + type + "'");
  try {
    return decode_object(j, type);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, "malformed " + type + " message: " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::Parse, "malformed " + type + " message: " + e.what());
  }
}

namespace {

Message decode_object(const json& j, const std::string& type) {
  if (type == "control") {
    Control c;
    c.t = field<double>(j, "t");
    c.yp = clamp_yoke(field<double>(j, "yp"), c.warning);
    c.yr = clamp_yoke(field<double>(j, "yr"), c.warning);
    if (c.warning.empty()) {
      if (auto w = get_optional<std::string>(j, "warning")) c.warning = *w;
    }
    return c;
  }
  if (type == "start") {
    Start s;
    s.initial_heading = get_optional<double>(j, "initial_heading");
    s.target_heading = get_optional<double>(j, "target_heading");
    s.target_altitude = get_optional<double>(j, "target_altitude");
    s.target_airspeed = get_optional<double>(j, "target_airspeed");
    s.duration = get_optional<double>(j, "duration");
    s.seed = get_optional<std::uint64_t>(j, "seed");
    return s;
  }
  if (type == "stop") return Stop{};
  if (type == "state") {
    return State{field<double>(j, "t"),         field<double>(j, "heading"),
                 field<double>(j, "altitude"),  field<double>(j, "airspeed"),
                 field<double>(j, "pitch_att"), field<double>(j, "roll_att"),
                 field<double>(j, "target_heading")};
  }
  if (type == "feedback") return Feedback{j.get<FeedbackEvent>()};
  if (type == "end") {
    const json& s = j.at("summary");
    Summary out;
    out.ticks = field<std::uint64_t>(s, "ticks");
    out.duration = field<double>(s, "duration");
    out.final_heading_error = field<double>(s, "final_heading_error");
    out.mean_abs_altitude_error = field<double>(s, "mean_abs_altitude_error");
    out.mean_abs_airspeed_error = field<double>(s, "mean_abs_airspeed_error");
    out.pitch_flags = field<std::uint64_t>(s, "pitch_flags");
    out.roll_flags = field<std::uint64_t>(s, "roll_flags");
    out.dropped_events = field<std::uint64_t>(s, "dropped_events");
    out.reason = field<std::string>(s, "reason");
    return End{out};
  }
  return ErrorMessage{field<std::string>(j, "message")};
}

}  // namespace

}  // namespace protocol
}  // namespace ftutor
