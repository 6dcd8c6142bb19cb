// Session wire protocol: one JSON object per line, discriminated by "type".
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "flighttutor/tutor.hpp"

namespace ftutor::protocol {

// Client -> server.
struct Control {
  double t = 0.0;
  double yp = 0.0;
  double yr = 0.0;
  std::string warning;  // set when an out-of-range yoke value was clamped

  bool operator==(const Control&) const = default;
};

struct Start {
  std::optional<double> initial_heading;
  std::optional<double> target_heading;
  std::optional<double> target_altitude;
  std::optional<double> target_airspeed;
  std::optional<double> duration;
  std::optional<std::uint64_t> seed;

  bool operator==(const Start&) const = default;
};

struct Stop {
  bool operator==(const Stop&) const = default;
};

// Server -> client.
struct State {
  double t = 0.0;
  double heading = 0.0;
  double altitude = 0.0;
  double airspeed = 0.0;
  double pitch_att = 0.0;
  double roll_att = 0.0;
  double target_heading = 0.0;

  bool operator==(const State&) const = default;
};

struct Feedback {
  FeedbackEvent event;

  bool operator==(const Feedback&) const = default;
};

struct Summary {
  std::uint64_t ticks = 0;
  double duration = 0.0;  // simulated seconds
  double final_heading_error = 0.0;
  double mean_abs_altitude_error = 0.0;
  double mean_abs_airspeed_error = 0.0;
  std::uint64_t pitch_flags = 0;  // raise count
  std::uint64_t roll_flags = 0;
  std::uint64_t dropped_events = 0;
  std::string reason;

  bool operator==(const Summary&) const = default;
};

struct End {
  Summary summary;

  bool operator==(const End&) const = default;
};

struct ErrorMessage {
  std::string message;

  bool operator==(const ErrorMessage&) const = default;
};

using Message = std::variant<Control, Start, Stop, State, Feedback, End, ErrorMessage>;

/// Single line, no trailing newline.
std::string encode(const Message& message);

/// Throws Error(Parse) for malformed JSON, a missing or unknown "type", or a
/// missing required field. Unknown fields are ignored. Control yoke values
/// outside [-1, 1] are clamped and `warning` is set.
Message decode(const std::string& line);

std::string type_name(const Message& message);

}  // namespace ftutor::protocol
