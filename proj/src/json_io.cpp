#include "json_io.hpp"

namespace ftutor {

void to_json(json& j, const SimParams& p) {
  j = json{{"dt", p.dt},
           {"g", p.g},
           {"pitch_rate_gain", p.pitch_rate_gain},
           {"roll_rate_gain", p.roll_rate_gain},
           {"pitch_limit", p.pitch_limit},
           {"roll_limit", p.roll_limit},
           {"v_trim", p.v_trim},
           {"v_min", p.v_min},
           {"v_max", p.v_max},
           {"drag_coeff", p.drag_coeff},
           {"thrust_accel", p.thrust_accel}};
}

void from_json(const json& j, SimParams& p) {
  p.dt = field<double>(j, "dt");
  p.g = field<double>(j, "g");
  p.pitch_rate_gain = field<double>(j, "pitch_rate_gain");
  p.roll_rate_gain = field<double>(j, "roll_rate_gain");
  p.pitch_limit = field<double>(j, "pitch_limit");
  p.roll_limit = field<double>(j, "roll_limit");
  p.v_trim = field<double>(j, "v_trim");
  p.v_min = field<double>(j, "v_min");
  p.v_max = field<double>(j, "v_max");
  p.drag_coeff = field<double>(j, "drag_coeff");
  p.thrust_accel = field<double>(j, "thrust_accel");
}

void to_json(json& j, const TaskSpec& t) {
  j = json{{"initial_heading", t.initial_heading},
           {"target_heading", t.target_heading},
           {"target_altitude", t.target_altitude},
           {"target_airspeed", t.target_airspeed},
           {"duration", t.duration},
           {"seed", t.seed}};
}

void from_json(const json& j, TaskSpec& t) {
  t.initial_heading = field<double>(j, "initial_heading");
  t.target_heading = field<double>(j, "target_heading");
  t.target_altitude = field<double>(j, "target_altitude");
  t.target_airspeed = field<double>(j, "target_airspeed");
  t.duration = field<double>(j, "duration");
  t.seed = field<std::uint64_t>(j, "seed");
}

void to_json(json& j, const AircraftState& s) {
  j = json{{"t", s.t},
           {"x", s.x},
           {"y", s.y},
           {"altitude", s.altitude},
           {"airspeed", s.airspeed},
           {"heading", s.heading},
           {"pitch_att", s.pitch_att},
           {"roll_att", s.roll_att},
           {"pitch_rate", s.pitch_rate},
           {"roll_rate", s.roll_rate}};
}

void from_json(const json& j, AircraftState& s) {
  s.t = field<double>(j, "t");
  s.x = field<double>(j, "x");
  s.y = field<double>(j, "y");
  s.altitude = field<double>(j, "altitude");
  s.airspeed = field<double>(j, "airspeed");
  s.heading = field<double>(j, "heading");
  s.pitch_att = field<double>(j, "pitch_att");
  s.roll_att = field<double>(j, "roll_att");
  s.pitch_rate = field<double>(j, "pitch_rate");
  s.roll_rate = field<double>(j, "roll_rate");
}

json parse_line(const std::string& line, std::size_t line_no) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) +
                                      ": malformed record (" + e.what() + ")");
  }
}

}  // namespace ftutor
