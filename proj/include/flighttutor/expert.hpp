// Scripted straight-and-level autopilot used as the demonstrating pilot.
#pragma once

#include <cstdint>
#include <vector>

#include "flighttutor/flightdyn.hpp"
#include "flighttutor/rng.hpp"

namespace ftutor {

inline constexpr double kDefaultAltitude = 1000.0;  // m
inline constexpr double kMaxGoalOffset = 30.0;      // deg

struct TaskSpec {
  double initial_heading = 0.0;  // deg, heading of the trimmed start state
  double target_heading = 0.0;   // deg in [0, 360)
  double target_altitude = kDefaultAltitude;
  double target_airspeed = 50.0;
  double duration = 30.0;  // s
  std::uint64_t seed = 0;

  bool operator==(const TaskSpec&) const = default;
};

/// Cascaded PD gains. Angles in degrees, yoke outputs normalized.
struct ExpertGains {
  double k_hdg_to_bank = 1.0;    // deg bank per deg heading error
  double bank_limit_deg = 30.0;
  double k_roll_p = 0.04;        // yoke per deg bank error
  double k_roll_d = 0.005;       // yoke per deg/s roll rate
  double k_alt_to_pitch = 0.1;   // deg pitch per m altitude error
  double k_spd_to_pitch = 0.5;   // deg pitch per m/s excess airspeed
  double k_pitch_p = 0.1;        // yoke per deg pitch error
  double k_pitch_d = 0.01;       // yoke per deg/s pitch rate
  double action_noise_std = 0.02;

  void validate(const SimParams& params) const;
  bool operator==(const ExpertGains&) const = default;
};

/// Initial state of the episode described by `task`.
AircraftState initial_state(const TaskSpec& task, const SimParams& params);

ControlInput expert_policy(const AircraftState& state, const TaskSpec& task,
                           const ExpertGains& gains, const SimParams& params);

/// Bank angle the heading loop asks for, before the roll loop.
double desired_bank(const AircraftState& state, const TaskSpec& task,
                    const ExpertGains& gains);

/// Goal heading drawn uniformly within +-30 deg of `initial_heading`.
TaskSpec sample_task(double initial_heading, std::uint64_t rng_seed,
                     const SimParams& params, double duration = 30.0);

/// Task for trial `index` of the stream identified by (seed, stream): the
/// initial heading is uniform on [0, 360), the goal offset uniform on +-30.
TaskSpec sample_trial_task(std::uint64_t seed, SeedStream stream,
                           std::uint64_t index, const SimParams& params,
                           double duration);

}  // namespace ftutor
