#include "flighttutor/tutor.hpp"

#include <algorithm>
#include <cmath>

#include "flighttutor/dataset.hpp"
#include "flighttutor/error.hpp"

namespace ftutor {
namespace {

// Tolerance on the debounce interval; tick times accumulate rounding error.
constexpr double kTimeEps = 1e-9;
constexpr double kMaxSlopeDeg = 45.0;

struct Compared {
  double pitch = 0.0;
  double roll = 0.0;
};

Compared compared_values(const ControlInput& c, const AircraftState& s,
                         const SimParams& p, CompareMode mode) {
  if (mode == CompareMode::Yoke) return {c.pitch(), c.roll()};
  const double pitch =
      std::clamp(s.pitch_att + c.pitch() * p.pitch_rate_gain * p.dt, -p.pitch_limit,
                 p.pitch_limit);
  const double roll = std::clamp(s.roll_att + c.roll() * p.roll_rate_gain * p.dt,
                                 -p.roll_limit, p.roll_limit);
  return {pitch / p.pitch_limit, roll / p.roll_limit};
}

}  // namespace

void TutorThresholds::validate() const {
  if (!(pitch >= 0.0) || !(roll >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "tutor thresholds must be >= 0");
  if (!(min_flag_duration >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "tutor.min_flag_duration must be >= 0");
  if (!(clear_hysteresis > 0.0 && clear_hysteresis <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "tutor.clear_hysteresis must be in (0, 1]");
}

std::string to_string(ErrorKind kind) {
  return kind == ErrorKind::PitchDeviation ? "PitchDeviation" : "RollDeviation";
}

ErrorKind parse_error_kind(const std::string& s) {
  if (s == "PitchDeviation") return ErrorKind::PitchDeviation;
  if (s == "RollDeviation") return ErrorKind::RollDeviation;
  throw Error(ErrorCode::Parse, "unknown error kind '" + s + "'");
}

std::string to_string(Verification v) {
  return v == Verification::OnTrack ? "OnTrack" : "OffTrack";
}

Verification parse_verification(const std::string& s) {
  if (s == "OnTrack") return Verification::OnTrack;
  if (s == "OffTrack") return Verification::OffTrack;
  throw Error(ErrorCode::Parse, "unknown verification '" + s + "'");
}

std::string to_string(CompareMode m) { return m == CompareMode::Yoke ? "yoke" : "attitude"; }

CompareMode parse_compare_mode(const std::string& s) {
  if (s == "yoke") return CompareMode::Yoke;
  if (s == "attitude") return CompareMode::Attitude;
  throw Error(ErrorCode::InvalidArgument, "unknown compare mode '" + s + "'");
}

std::vector<ErrorFlag> detect_errors(const ControlInput& agent,
                                     const ControlInput& student,
                                     const TutorThresholds& th, double t) {
  std::vector<ErrorFlag> flags;
  const double dp = std::abs(agent.pitch() - student.pitch());
  const double dr = std::abs(agent.roll() - student.roll());
  if (dp >= th.pitch) flags.push_back({ErrorKind::PitchDeviation, t, dp, th.pitch});
  if (dr >= th.roll) flags.push_back({ErrorKind::RollDeviation, t, dr, th.roll});
  return flags;
}

LineGeometry line_geometry(double roll_value, double pitch_value) {
  const double x = std::clamp(roll_value, -1.0, 1.0);
  const double y = std::clamp(pitch_value, -1.0, 1.0);
  return {x, y, x * kMaxSlopeDeg};
}

std::string hint_for(ErrorKind kind, double agent_minus_student) {
  if (kind == ErrorKind::PitchDeviation) {
    return agent_minus_student > 0.0
               ? "Raise the nose: ease back on the yoke to hold altitude and airspeed."
               : "Lower the nose: ease the yoke forward to hold altitude and airspeed.";
  }
  return agent_minus_student > 0.0
             ? "Roll right: you are banking too far left and will overshoot the target heading."
             : "Roll left: you are banking too far right and will overshoot the target heading.";
}

Tutor::Tutor(std::shared_ptr<const Policy> policy, TutorThresholds thresholds,
             SimParams params)
    : policy_(std::move(policy)), thresholds_(thresholds), params_(params) {
  if (!policy_) throw Error(ErrorCode::InvalidArgument, "tutor requires a policy");
  thresholds_.validate();
  if (policy_->feature_schema != kFeatureSchema)
    throw Error(ErrorCode::Schema, "policy feature schema '" + policy_->feature_schema +
                                       "' does not match '" + kFeatureSchema + "'");
  const FeatureScales& s = policy_->scales;
  if (s.pitch_limit != params_.pitch_limit || s.roll_limit != params_.roll_limit ||
      s.dt != params_.dt || s.altitude != kAltitudeScale || s.airspeed != kAirspeedScale)
    throw Error(ErrorCode::Schema,
                "policy was trained with different feature scales than the simulator");
}

void Tutor::reset() {
  pitch_ = {};
  roll_ = {};
}

ControlInput Tutor::agent_action(const AircraftState& state, const TaskSpec& task) const {
  return forward(*policy_, featurize(state, task, params_));
}

void Tutor::update_channel(Channel& ch, ErrorKind kind, double diff, double threshold,
                           double clock, FeedbackEvent& event) {
  if (ch.raised) {
    if (diff < thresholds_.clear_hysteresis * threshold) {
      ch.raised.reset();
      ch.violation_start.reset();
    }
    return;
  }
  if (diff >= threshold) {
    if (!ch.violation_start) ch.violation_start = clock;
    if (clock - *ch.violation_start + kTimeEps >= thresholds_.min_flag_duration) {
      ch.raised = ErrorFlag{kind, clock, diff, threshold};
      event.raised_now.push_back(kind);
    }
  } else {
    ch.violation_start.reset();
  }
}

FeedbackEvent Tutor::step(const AircraftState& state, const TaskSpec& task,
                          const ControlInput& student, double clock) {
  const ControlInput agent = agent_action(state, task);
  const Compared a = compared_values(agent, state, params_, thresholds_.compare);
  const Compared s = compared_values(student, state, params_, thresholds_.compare);

  FeedbackEvent event;
  event.t = clock;
  update_channel(pitch_, ErrorKind::PitchDeviation, std::abs(a.pitch - s.pitch),
                 thresholds_.pitch, clock, event);
  update_channel(roll_, ErrorKind::RollDeviation, std::abs(a.roll - s.roll),
                 thresholds_.roll, clock, event);

  std::string hint;
  if (pitch_.raised) {
    event.flags.push_back(*pitch_.raised);
    hint = hint_for(ErrorKind::PitchDeviation, a.pitch - s.pitch);
  }
  if (roll_.raised) {
    event.flags.push_back(*roll_.raised);
    if (!hint.empty()) hint += ' ';
    hint += hint_for(ErrorKind::RollDeviation, a.roll - s.roll);
  }
  event.active = !event.flags.empty();
  event.verification = event.active ? Verification::OffTrack : Verification::OnTrack;
  event.hint = event.active ? hint : kOnTrackHint;
  event.agent_line = line_geometry(a.roll, a.pitch);
  event.student_line = line_geometry(s.roll, s.pitch);
  return event;
}

}  // namespace ftutor
