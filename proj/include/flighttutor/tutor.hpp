// Shadow-mode tutor. The trained agent is queried on the student's state and
// the two yoke channels are compared against thresholds; sustained
// disagreement raises a flag with a hint and overlay geometry.
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flighttutor/bc.hpp"
#include "flighttutor/expert.hpp"
#include "flighttutor/flightdyn.hpp"

namespace ftutor {

/// What p and r denote in the comparison. Yoke compares raw deflections;
/// Attitude compares the attitude each command would produce one tick ahead,
/// normalized by the attitude limits.
enum class CompareMode { Yoke, Attitude };

struct TutorThresholds {
  double pitch = 0.15;  // D1, normalized units
  double roll = 0.20;   // D2
  double min_flag_duration = 0.5;  // s of continuous violation before raising
  double clear_hysteresis = 0.8;   // clear below this fraction of threshold
  CompareMode compare = CompareMode::Yoke;

  void validate() const;
  bool operator==(const TutorThresholds&) const = default;
};

enum class ErrorKind { PitchDeviation, RollDeviation };

struct ErrorFlag {
  ErrorKind kind = ErrorKind::PitchDeviation;
  double t = 0.0;          // raise time
  double magnitude = 0.0;  // |difference| at raise time
  double threshold = 0.0;

  bool operator==(const ErrorFlag&) const = default;
};

enum class Verification { OnTrack, OffTrack };

struct LineGeometry {
  double center_x = 0.0;     // roll value
  double center_y = 0.0;     // pitch value
  double slope_angle = 0.0;  // deg, roll mapped linearly onto [-45, 45]

  bool operator==(const LineGeometry&) const = default;
};

struct FeedbackEvent {
  double t = 0.0;
  Verification verification = Verification::OnTrack;
  std::vector<ErrorFlag> flags;       // raised and not yet cleared
  std::vector<ErrorKind> raised_now;  // flags raised on this tick
  std::string hint;
  LineGeometry agent_line;
  LineGeometry student_line;
  bool active = false;

  bool operator==(const FeedbackEvent&) const = default;
};

std::string to_string(ErrorKind kind);
ErrorKind parse_error_kind(const std::string& s);
std::string to_string(Verification v);
Verification parse_verification(const std::string& s);
std::string to_string(CompareMode m);
CompareMode parse_compare_mode(const std::string& s);

/// Stateless threshold test: PitchDeviation iff |p_a - p_s| >= d1,
/// RollDeviation iff |r_a - r_s| >= d2.
std::vector<ErrorFlag> detect_errors(const ControlInput& agent,
                                     const ControlInput& student,
                                     const TutorThresholds& th, double t);

LineGeometry line_geometry(double roll_value, double pitch_value);

/// Hint text for a flag kind given the signed (agent - student) difference.
std::string hint_for(ErrorKind kind, double agent_minus_student);

inline constexpr const char* kOnTrackHint = "On track: hold heading and altitude.";

class Tutor {
 public:
  /// Throws Error(Schema) when the policy's feature schema or scales do not
  /// match `params`.
  Tutor(std::shared_ptr<const Policy> policy, TutorThresholds thresholds,
        SimParams params);

  /// One tick of shadow evaluation at time `clock`.
  FeedbackEvent step(const AircraftState& state, const TaskSpec& task,
                     const ControlInput& student, double clock);

  /// Agent action on `state` (the shadow query).
  ControlInput agent_action(const AircraftState& state, const TaskSpec& task) const;

  void reset();
  const TutorThresholds& thresholds() const { return thresholds_; }

 private:
  struct Channel {
    std::optional<double> violation_start;
    std::optional<ErrorFlag> raised;
  };

  void update_channel(Channel& ch, ErrorKind kind, double diff, double threshold,
                      double clock, FeedbackEvent& event);

  std::shared_ptr<const Policy> policy_;
  TutorThresholds thresholds_;
  SimParams params_;
  Channel pitch_;
  Channel roll_;
};

}  // namespace ftutor
