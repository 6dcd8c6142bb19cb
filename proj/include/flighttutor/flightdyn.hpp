// Simplified fixed-wing kinematics for straight-and-level training.
//
// The yoke commands attitude rate. Heading follows the coordinated-turn law,
// climb rate follows pitch attitude, and pitch trades airspeed for altitude.
// Angles are degrees at the interface and radians inside the update law.
#pragma once

#include <algorithm>

namespace ftutor {

struct SimParams {
  double dt = 0.05;               // s
  double g = 9.81;                // m/s^2
  double pitch_rate_gain = 10.0;  // deg/s per unit yoke
  double roll_rate_gain = 30.0;   // deg/s per unit yoke
  double pitch_limit = 20.0;      // deg
  double roll_limit = 45.0;       // deg
  double v_trim = 50.0;           // m/s
  double v_min = 30.0;            // m/s
  double v_max = 80.0;            // m/s
  double drag_coeff = 0.1;        // 1/s
  double thrust_accel = 0.0;      // m/s^2, throttle perturbation about trim

  /// Throws Error(InvalidArgument) when an invariant is violated.
  void validate() const;
  bool operator==(const SimParams&) const = default;
};

struct AircraftState {
  double t = 0.0;          // s
  double x = 0.0;          // m, east
  double y = 0.0;          // m, north
  double altitude = 0.0;   // m
  double airspeed = 0.0;   // m/s
  double heading = 0.0;    // deg in [0, 360), clockwise from north
  double pitch_att = 0.0;  // deg, nose up positive
  double roll_att = 0.0;   // deg, right wing down positive
  // Attitude rates achieved over the most recent step (deg/s). Zero for a
  // fresh state.
  double pitch_rate = 0.0;
  double roll_rate = 0.0;

  bool operator==(const AircraftState&) const = default;
};

/// Normalized yoke deflection. Both axes are clamped to [-1, 1].
class ControlInput {
 public:
  ControlInput() = default;
  ControlInput(double yoke_pitch, double yoke_roll)
      : pitch_(std::clamp(yoke_pitch, -1.0, 1.0)),
        roll_(std::clamp(yoke_roll, -1.0, 1.0)) {}

  double pitch() const { return pitch_; }
  double roll() const { return roll_; }

  bool operator==(const ControlInput&) const = default;

 private:
  double pitch_ = 0.0;
  double roll_ = 0.0;
};

/// Level, wings-level state at trim airspeed.
AircraftState trimmed_state(double heading, double altitude,
                            const SimParams& params);

/// Advances the state by one forward-Euler step of length params.dt.
AircraftState step(const AircraftState& state, const ControlInput& control,
                   const SimParams& params);

/// Wraps an angle into [0, 360).
double wrap_360(double deg);

/// Signed (target - current) wrapped into (-180, 180].
double heading_error(double current, double target);

}  // namespace ftutor
