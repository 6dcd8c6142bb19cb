#include "flighttutor/pipeline.hpp"

#include <cstdio>

#include "flighttutor/error.hpp"

namespace ftutor {

EvalHook training_eval_hook(const Config& config, const SimParams& sim) {
  const int trials = config.eval.trials;
  const double duration = config.eval.duration;
  const std::uint64_t seed = config.train.seed;
  return [=](const Policy& policy) {
    return avg_heading_error(
               [&](const TaskSpec& task) { return policy_fn(policy, task, sim); }, trials,
               seed, sim, duration, SeedStream::TrainEval)
        .avg_heading_error;
  };
}

TrainResult train_policy(const Dataset& dataset, const Config& config) {
  return train(dataset, config.train, training_eval_hook(config, dataset.params));
}

bool DeploymentReport::passed() const {
  return agent.avg_heading_error < heading_gate &&
         agent.avg_heading_error < zero_policy.avg_heading_error &&
         action_distance < action_gate;
}

namespace {

void append(std::string& out, const char* fmt, double v) {
  char buf[128];
  std::snprintf(buf, sizeof buf, fmt, v);
  out += buf;
}

}  // namespace

std::string DeploymentReport::to_text() const {
  std::string out;
  out += "trials\t" + std::to_string(agent.n_trials) + "\n";
  out += "seed\t" + std::to_string(agent.seed) + "\n";
  append(out, "duration\t%.6f\n", duration);
  append(out, "avg_heading_error\t%.6f\n", agent.avg_heading_error);
  append(out, "zero_policy_heading_error\t%.6f\n", zero_policy.avg_heading_error);
  append(out, "mean_action_distance\t%.6f\n", action_distance);
  append(out, "heading_gate\t%.6f\n", heading_gate);
  append(out, "action_gate\t%.6f\n", action_gate);
  out += std::string("deployment\t") + (passed() ? "pass" : "fail") + "\n";
  out += "\ntrial\tagent_heading_error\tzero_policy_heading_error\n";
  for (std::size_t i = 0; i < agent.trial_mean.size(); ++i) {
    out += std::to_string(i);
    append(out, "\t%.6f", agent.trial_mean[i]);
    append(out, "\t%.6f\n", zero_policy.trial_mean[i]);
  }
  return out;
}

DeploymentReport evaluate_deployment(const Policy& policy, const Config& config,
                                     int n_trials, std::uint64_t seed) {
  if (n_trials < 1) throw Error(ErrorCode::InvalidArgument, "evaluation needs at least one trial");
  const SimParams& sim = config.sim;
  DeploymentReport r;
  r.duration = config.eval.duration;
  r.heading_gate = config.eval.heading_gate;
  r.action_gate = config.eval.action_gate;
  r.agent = avg_heading_error(
      [&](const TaskSpec& task) { return policy_fn(policy, task, sim); }, n_trials, seed, sim,
      r.duration);
  r.zero_policy = avg_heading_error(
      [](const TaskSpec&) { return PolicyFn([](const AircraftState&) { return ControlInput(); }); },
      n_trials, seed, sim, r.duration);
  r.action_distance = mean_action_distance(policy, config.expert, n_trials, seed, sim, r.duration);
  return r;
}

}  // namespace ftutor
