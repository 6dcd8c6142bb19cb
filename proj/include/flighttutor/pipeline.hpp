// End-to-end steps shared by the C API and the tests: training with the
// rollout early-stopping hook, and the deployment evaluation.
#pragma once

#include <cstdint>
#include <string>

#include "flighttutor/bc.hpp"
#include "flighttutor/config.hpp"
#include "flighttutor/dataset.hpp"
#include "flighttutor/eval.hpp"

namespace ftutor {

/// Average heading error over eval.trials tasks from the training-time
/// evaluation stream (disjoint from the deployment evaluation stream).
EvalHook training_eval_hook(const Config& config, const SimParams& sim);

TrainResult train_policy(const Dataset& dataset, const Config& config);

struct DeploymentReport {
  EvalReport agent;
  EvalReport zero_policy;  // constant (0, 0) yoke baseline
  double action_distance = 0.0;
  double duration = 30.0;
  double heading_gate = kDeploymentHeadingGate;
  double action_gate = kDeploymentActionGate;

  bool passed() const;
  /// Key/value summary followed by the per-trial table; deterministic text.
  std::string to_text() const;
};

DeploymentReport evaluate_deployment(const Policy& policy, const Config& config,
                                     int n_trials, std::uint64_t seed);

}  // namespace ftutor
