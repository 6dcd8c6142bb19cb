// Closed-loop rollouts, the average-heading-error metric, the deployment gate
// and synthetic flawed students.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "flighttutor/bc.hpp"
#include "flighttutor/expert.hpp"
#include "flighttutor/flightdyn.hpp"

namespace ftutor {

using PolicyFn = std::function<ControlInput(const AircraftState&)>;

struct TrajectoryStep {
  AircraftState state;
  ControlInput control;

  bool operator==(const TrajectoryStep&) const = default;
};

struct TrajectorySummary {
  double final_heading_error = 0.0;  // deg, signed
  double mean_abs_altitude_error = 0.0;
  double mean_abs_airspeed_error = 0.0;

  bool operator==(const TrajectorySummary&) const = default;
};

struct Trajectory {
  TaskSpec task;
  SimParams params;
  std::vector<TrajectoryStep> steps;  // one per tick, state before control
  AircraftState final_state;
  TrajectorySummary summary;

  bool operator==(const Trajectory&) const = default;
};

/// Flies `policy_fn` from the task's trimmed initial state for `duration`
/// seconds. Throws Error(InvalidArgument) naming the tick if the policy emits
/// a non-finite action.
Trajectory rollout(const PolicyFn& policy_fn, const TaskSpec& task, double duration,
                   const SimParams& params);

/// Line-delimited trajectory file: header {task, sim}, then one
/// {state, yp, yr} object per tick.
void save_trajectory(const Trajectory& trajectory, const std::string& path);
Trajectory load_trajectory(const std::string& path);

PolicyFn expert_fn(const TaskSpec& task, const ExpertGains& gains, const SimParams& params);
PolicyFn policy_fn(const Policy& policy, const TaskSpec& task, const SimParams& params);

/// Builds a policy for a given task. Evaluation draws fresh tasks, so the
/// evaluated controller is parameterized by the task.
using PolicyFactory = std::function<PolicyFn(const TaskSpec&)>;

struct EvalReport {
  std::vector<std::vector<double>> heading_error;  // |error| per trial per tick
  std::vector<double> trial_mean;
  double avg_heading_error = 0.0;
  int n_trials = 0;
  std::uint64_t seed = 0;

  /// trial, tick, t, abs heading error; tab-separated with a header row.
  std::string to_table(double dt) const;
};

inline constexpr int kDefaultEvalTrials = 10;

/// Mean over trials of the per-tick mean |heading error|. Tasks come from the
/// evaluation seed stream, disjoint from the demonstration stream.
EvalReport avg_heading_error(const PolicyFactory& factory, int n_trials,
                             std::uint64_t seed, const SimParams& params,
                             double duration = 30.0,
                             SeedStream stream = SeedStream::Eval);

/// Mean per-tick ||a_agent - a_expert|| with the expert queried in shadow
/// mode on the agent's own rollouts.
double mean_action_distance(const Policy& policy, const ExpertGains& gains,
                            int n_trials, std::uint64_t seed,
                            const SimParams& params, double duration = 30.0);

inline constexpr double kDeploymentHeadingGate = 5.0;   // deg
inline constexpr double kDeploymentActionGate = 0.05;   // normalized yoke

enum class StudentFlaw { PitchNeglect, Overshooter };

StudentFlaw parse_flaw(const std::string& name);
std::string to_string(StudentFlaw flaw);

/// Expert controller with one of the two characteristic student errors.
/// PitchNeglect scales the pitch channel by (1 - severity) and adds a seeded
/// low-frequency pitch drift. Overshooter multiplies the heading-to-bank gain
/// by (1 + 2 severity) and scales roll damping by (1 - severity).
PolicyFn synthesize_student(const ExpertGains& base, StudentFlaw flaw,
                            double severity, const TaskSpec& task,
                            const SimParams& params, std::uint64_t seed);

}  // namespace ftutor
