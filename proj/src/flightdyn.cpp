#include "flighttutor/flightdyn.hpp"

#include <cmath>
#include <numbers>

#include "flighttutor/error.hpp"

namespace ftutor {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

}  // namespace

void SimParams::validate() const {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "sim.dt must be > 0");
  if (!(g > 0.0)) throw Error(ErrorCode::InvalidArgument, "sim.g must be > 0");
  if (!(pitch_rate_gain > 0.0) || !(roll_rate_gain > 0.0))
    throw Error(ErrorCode::InvalidArgument, "sim rate gains must be > 0");
  if (!(pitch_limit > 0.0) || !(roll_limit > 0.0) || pitch_limit >= 90.0 ||
      roll_limit >= 90.0)
    throw Error(ErrorCode::InvalidArgument,
                "sim attitude limits must be in (0, 90)");
  if (!(v_min > 0.0 && v_min < v_trim && v_trim < v_max))
    throw Error(ErrorCode::InvalidArgument,
                "sim airspeeds must satisfy 0 < v_min < v_trim < v_max");
  if (!(drag_coeff > 0.0))
    throw Error(ErrorCode::InvalidArgument, "sim.drag_coeff must be > 0");
  if (!std::isfinite(thrust_accel))
    throw Error(ErrorCode::InvalidArgument, "sim.thrust_accel must be finite");
}

double wrap_360(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0.0) w += 360.0;
  // fmod of a tiny negative value can round up to exactly 360.
  if (w >= 360.0) w = 0.0;
  return w;
}

double heading_error(double current, double target) {
  double d = std::fmod(target - current, 360.0);
  if (d > 180.0) d -= 360.0;
  if (d <= -180.0) d += 360.0;
  return d;
}

AircraftState trimmed_state(double heading, double altitude,
                            const SimParams& params) {
  AircraftState s;
  s.heading = wrap_360(heading);
  s.altitude = altitude;
  s.airspeed = params.v_trim;
  return s;
}

AircraftState step(const AircraftState& state, const ControlInput& control,
                   const SimParams& params) {
  const double dt = params.dt;
  const double v = state.airspeed;
  const double pitch = state.pitch_att * kDegToRad;
  const double roll = state.roll_att * kDegToRad;

  AircraftState next = state;
  next.t = state.t + dt;

  next.pitch_att =
      std::clamp(state.pitch_att + control.pitch() * params.pitch_rate_gain * dt,
                 -params.pitch_limit, params.pitch_limit);
  next.roll_att =
      std::clamp(state.roll_att + control.roll() * params.roll_rate_gain * dt,
                 -params.roll_limit, params.roll_limit);
  next.pitch_rate = (next.pitch_att - state.pitch_att) / dt;
  next.roll_rate = (next.roll_att - state.roll_att) / dt;

  const double heading_rate = params.g / v * std::tan(roll);  // rad/s
  next.heading = wrap_360(state.heading + heading_rate * kRadToDeg * dt);

  const double climb_rate = v * std::sin(pitch);
  next.altitude = std::max(0.0, state.altitude + climb_rate * dt);

  const double accel = params.thrust_accel -
                       params.drag_coeff * (v - params.v_trim) -
                       params.g * std::sin(pitch);
  next.airspeed = std::clamp(v + accel * dt, params.v_min, params.v_max);

  const double ground_speed = v * std::cos(pitch);
  const double hdg = state.heading * kDegToRad;
  next.x = state.x + ground_speed * std::sin(hdg) * dt;
  next.y = state.y + ground_speed * std::cos(hdg) * dt;
  return next;
}

}  // namespace ftutor
