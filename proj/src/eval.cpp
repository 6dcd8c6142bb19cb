#include "flighttutor/eval.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "flighttutor/dataset.hpp"
#include "flighttutor/error.hpp"
#include "flighttutor/rng.hpp"
#include "json_io.hpp"

namespace ftutor {

Trajectory rollout(const PolicyFn& policy_fn, const TaskSpec& task, double duration,
                   const SimParams& params) {
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw Error(ErrorCode::InvalidArgument, "rollout duration must be > 0");
  const auto ticks = static_cast<long>(std::llround(duration / params.dt));

  Trajectory traj;
  traj.task = task;
  traj.params = params;
  traj.steps.reserve(static_cast<std::size_t>(ticks));
  AircraftState state = initial_state(task, params);
  double alt_sum = 0.0, spd_sum = 0.0;
  for (long k = 0; k < ticks; ++k) {
    const ControlInput control = policy_fn(state);
    if (!std::isfinite(control.pitch()) || !std::isfinite(control.roll()))
      throw Error(ErrorCode::InvalidArgument,
                  "policy emitted a non-finite action at tick " + std::to_string(k));
    traj.steps.push_back({state, control});
    alt_sum += std::abs(state.altitude - task.target_altitude);
    spd_sum += std::abs(state.airspeed - task.target_airspeed);
    state = step(state, control, params);
  }
  traj.final_state = state;
  const auto n = static_cast<double>(traj.steps.size());
  traj.summary.final_heading_error = heading_error(state.heading, task.target_heading);
  traj.summary.mean_abs_altitude_error = alt_sum / n;
  traj.summary.mean_abs_airspeed_error = spd_sum / n;
  return traj;
}

void save_trajectory(const Trajectory& trajectory, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  out << json{{"kind", "trajectory"}, {"task", trajectory.task}, {"sim", trajectory.params}}.dump()
      << '\n';
  for (const TrajectoryStep& s : trajectory.steps)
    out << json{{"state", s.state}, {"yp", s.control.pitch()}, {"yr", s.control.roll()}}.dump()
        << '\n';
  out << json{{"final", trajectory.final_state}}.dump() << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

Trajectory load_trajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  Trajectory traj;
  std::string line;
  std::size_t line_no = 0;
  bool have_final = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_line(line, line_no);
    try {
      if (line_no == 1) {
        if (field<std::string>(j, "kind") != "trajectory")
          throw Error(ErrorCode::Schema, "not a trajectory file");
        traj.task = field<TaskSpec>(j, "task");
        traj.params = field<SimParams>(j, "sim");
      } else if (j.contains("final")) {
        traj.final_state = field<AircraftState>(j, "final");
        have_final = true;
      } else {
        traj.steps.push_back({field<AircraftState>(j, "state"),
                              ControlInput(field<double>(j, "yp"), field<double>(j, "yr"))});
      }
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (traj.steps.empty()) throw Error(ErrorCode::Parse, path + ": trajectory has no ticks");
  if (!have_final) traj.final_state = traj.steps.back().state;
  double alt = 0.0, spd = 0.0;
  for (const TrajectoryStep& s : traj.steps) {
    alt += std::abs(s.state.altitude - traj.task.target_altitude);
    spd += std::abs(s.state.airspeed - traj.task.target_airspeed);
  }
  const auto n = static_cast<double>(traj.steps.size());
  traj.summary = {heading_error(traj.final_state.heading, traj.task.target_heading),
                  alt / n, spd / n};
  return traj;
}

PolicyFn expert_fn(const TaskSpec& task, const ExpertGains& gains, const SimParams& params) {
  return [task, gains, params](const AircraftState& s) {
    return expert_policy(s, task, gains, params);
  };
}

PolicyFn policy_fn(const Policy& policy, const TaskSpec& task, const SimParams& params) {
  return [&policy, task, params](const AircraftState& s) {
    return forward(policy, featurize(s, task, params));
  };
}

std::string EvalReport::to_table(double dt) const {
  std::ostringstream out;
  out.precision(17);
  out << "trial\ttick\tt\theading_error\n";
  for (std::size_t trial = 0; trial < heading_error.size(); ++trial) {
    for (std::size_t k = 0; k < heading_error[trial].size(); ++k)
      out << trial << '\t' << k << '\t' << static_cast<double>(k) * dt << '\t'
          << heading_error[trial][k] << '\n';
  }
  return out.str();
}

EvalReport avg_heading_error(const PolicyFactory& factory, int n_trials,
                             std::uint64_t seed, const SimParams& params,
                             double duration, SeedStream stream) {
  if (n_trials < 1) throw Error(ErrorCode::InvalidArgument, "n_trials must be >= 1");
  EvalReport report;
  report.n_trials = n_trials;
  report.seed = seed;
  double total = 0.0;
  for (int i = 0; i < n_trials; ++i) {
    const TaskSpec task = sample_trial_task(seed, stream, static_cast<std::uint64_t>(i),
                                            params, duration);
    const Trajectory traj = rollout(factory(task), task, duration, params);
    std::vector<double> series;
    series.reserve(traj.steps.size());
    double sum = 0.0;
    for (const TrajectoryStep& s : traj.steps) {
      const double e = std::abs(heading_error(s.state.heading, task.target_heading));
      series.push_back(e);
      sum += e;
    }
    const double mean = sum / static_cast<double>(series.size());
    report.heading_error.push_back(std::move(series));
    report.trial_mean.push_back(mean);
    total += mean;
  }
  report.avg_heading_error = total / static_cast<double>(n_trials);
  return report;
}

double mean_action_distance(const Policy& policy, const ExpertGains& gains,
                            int n_trials, std::uint64_t seed,
                            const SimParams& params, double duration) {
  if (n_trials < 1) throw Error(ErrorCode::InvalidArgument, "n_trials must be >= 1");
  double total = 0.0;
  std::size_t count = 0;
  for (int i = 0; i < n_trials; ++i) {
    const TaskSpec task = sample_trial_task(seed, SeedStream::Eval,
                                            static_cast<std::uint64_t>(i), params, duration);
    const Trajectory traj = rollout(policy_fn(policy, task, params), task, duration, params);
    for (const TrajectoryStep& s : traj.steps) {
      const ControlInput e = expert_policy(s.state, task, gains, params);
      total += std::hypot(s.control.pitch() - e.pitch(), s.control.roll() - e.roll());
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

StudentFlaw parse_flaw(const std::string& name) {
  if (name == "pitch-neglect" || name == "pitchneglect" || name == "PitchNeglect")
    return StudentFlaw::PitchNeglect;
  if (name == "overshooter" || name == "Overshooter") return StudentFlaw::Overshooter;
  throw Error(ErrorCode::InvalidArgument,
              "unknown student flaw '" + name + "' (expected pitch-neglect or overshooter)");
}

std::string to_string(StudentFlaw flaw) {
  return flaw == StudentFlaw::PitchNeglect ? "pitch-neglect" : "overshooter";
}

PolicyFn synthesize_student(const ExpertGains& base, StudentFlaw flaw,
                            double severity, const TaskSpec& task,
                            const SimParams& params, std::uint64_t seed) {
  if (!(severity > 0.0 && severity <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "severity must be in (0, 1]");

  if (flaw == StudentFlaw::Overshooter) {
    ExpertGains g = base;
    g.k_hdg_to_bank *= 1.0 + 2.0 * severity;
    g.k_roll_d *= 1.0 - severity;
    return expert_fn(task, g, params);
  }

  // Low-frequency drift: 0.04-0.08 Hz sinusoid with a seeded phase.
  Rng rng(derive_seed(seed, SeedStream::Student));
  const double freq = rng.uniform(0.04, 0.08);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double amplitude = 0.35 * severity;
  return [base, task, params, severity, freq, phase, amplitude](const AircraftState& s) {
    const ControlInput e = expert_policy(s, task, base, params);
    const double drift =
        amplitude * std::sin(2.0 * std::numbers::pi * freq * s.t + phase);
    return ControlInput((1.0 - severity) * e.pitch() + drift, e.roll());
  };
}

}  // namespace ftutor
