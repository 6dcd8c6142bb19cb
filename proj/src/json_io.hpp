// nlohmann adapters for the value types that appear in files and messages.
#pragma once

#include <json.hpp>

#include "flighttutor/dataset.hpp"
#include "flighttutor/error.hpp"
#include "flighttutor/expert.hpp"
#include "flighttutor/flightdyn.hpp"
#include "flighttutor/tutor.hpp"

namespace ftutor {

using nlohmann::json;

void to_json(json& j, const SimParams& p);
void from_json(const json& j, SimParams& p);
void to_json(json& j, const TaskSpec& t);
void from_json(const json& j, TaskSpec& t);
void to_json(json& j, const AircraftState& s);
void from_json(const json& j, AircraftState& s);
void to_json(json& j, const FeedbackEvent& e);
void from_json(const json& j, FeedbackEvent& e);

/// Parses one line, throwing Error(Parse) that names the line number.
json parse_line(const std::string& line, std::size_t line_no);

template <class T>
T field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end())
    throw Error(ErrorCode::Parse, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::Parse, std::string("bad type for field '") + key + "'");
  }
}

}  // namespace ftutor
