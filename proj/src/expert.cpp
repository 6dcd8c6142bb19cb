#include "flighttutor/expert.hpp"

#include <algorithm>

#include "flighttutor/error.hpp"
#include "flighttutor/rng.hpp"

namespace ftutor {

void ExpertGains::validate(const SimParams& params) const {
  for (double g : {k_hdg_to_bank, bank_limit_deg, k_roll_p, k_roll_d,
                   k_alt_to_pitch, k_spd_to_pitch, k_pitch_p, k_pitch_d,
                   action_noise_std}) {
    if (!(g >= 0.0))
      throw Error(ErrorCode::InvalidArgument, "expert gains must be >= 0");
  }
  if (bank_limit_deg > params.roll_limit)
    throw Error(ErrorCode::InvalidArgument,
                "expert.bank_limit_deg must not exceed sim.roll_limit");
}

AircraftState initial_state(const TaskSpec& task, const SimParams& params) {
  AircraftState s = trimmed_state(task.initial_heading, task.target_altitude, params);
  s.airspeed = std::clamp(task.target_airspeed, params.v_min, params.v_max);
  return s;
}

double desired_bank(const AircraftState& state, const TaskSpec& task,
                    const ExpertGains& gains) {
  return std::clamp(
      gains.k_hdg_to_bank * heading_error(state.heading, task.target_heading),
      -gains.bank_limit_deg, gains.bank_limit_deg);
}

ControlInput expert_policy(const AircraftState& state, const TaskSpec& task,
                           const ExpertGains& gains, const SimParams& params) {
  const double bank_cmd = desired_bank(state, task, gains);
  const double roll = gains.k_roll_p * (bank_cmd - state.roll_att) -
                      gains.k_roll_d * state.roll_rate;

  // Excess airspeed pitches the nose up so that speed is traded for height.
  const double pitch_cmd = std::clamp(
      gains.k_alt_to_pitch * (task.target_altitude - state.altitude) +
          gains.k_spd_to_pitch * (state.airspeed - task.target_airspeed),
      -params.pitch_limit, params.pitch_limit);
  const double pitch = gains.k_pitch_p * (pitch_cmd - state.pitch_att) -
                       gains.k_pitch_d * state.pitch_rate;
  return ControlInput(pitch, roll);
}

TaskSpec sample_task(double initial_heading, std::uint64_t rng_seed,
                     const SimParams& params, double duration) {
  Rng rng(rng_seed);
  TaskSpec task;
  task.initial_heading = wrap_360(initial_heading);
  task.target_heading =
      wrap_360(task.initial_heading + rng.uniform(-kMaxGoalOffset, kMaxGoalOffset));
  task.target_altitude = kDefaultAltitude;
  task.target_airspeed = params.v_trim;
  task.duration = duration;
  task.seed = rng_seed;
  return task;
}

TaskSpec sample_trial_task(std::uint64_t seed, SeedStream stream,
                           std::uint64_t index, const SimParams& params,
                           double duration) {
  const std::uint64_t trial_seed =
      derive_seed(seed, stream, index);
  Rng rng(splitmix64(trial_seed));
  const double start = rng.uniform(0.0, 360.0);
  return sample_task(start, trial_seed, params, duration);
}

}  // namespace ftutor
