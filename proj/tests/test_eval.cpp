#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "flighttutor/error.hpp"
#include "flighttutor/eval.hpp"
#include "flighttutor/rng.hpp"

using namespace ftutor;

namespace {

const PolicyFn kZero = [](const AircraftState&) { return ControlInput(); };

PolicyFactory expert_factory(const ExpertGains& g, const SimParams& p) {
  return [g, p](const TaskSpec& t) { return expert_fn(t, g, p); };
}

PolicyFactory zero_factory() {
  return [](const TaskSpec&) { return kZero; };
}

}  // namespace

TEST_CASE("expert rollout reaches the target heading") {
  const SimParams p;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const TaskSpec task = sample_trial_task(4, SeedStream::Eval, i, p, 30.0);
    const Trajectory traj = rollout(expert_fn(task, ExpertGains{}, p), task, 30.0, p);
    CHECK(traj.steps.size() == 600);
    CHECK(std::abs(traj.summary.final_heading_error) < 2.0);
  }
}

TEST_CASE("zero policy holds its initial heading error") {
  const SimParams p;
  const TaskSpec task = sample_trial_task(4, SeedStream::Eval, 3, p, 30.0);
  const Trajectory traj = rollout(kZero, task, 30.0, p);
  const double e0 = heading_error(traj.steps.front().state.heading, task.target_heading);
  for (const TrajectoryStep& s : traj.steps)
    REQUIRE(heading_error(s.state.heading, task.target_heading) == e0);
  CHECK(traj.summary.final_heading_error == e0);
  CHECK(traj.summary.mean_abs_altitude_error == 0.0);
}

TEST_CASE("rollout timestamps advance by dt and runs are reproducible") {
  const SimParams p;
  const TaskSpec task = sample_trial_task(9, SeedStream::Eval, 0, p, 5.0);
  const Trajectory a = rollout(expert_fn(task, ExpertGains{}, p), task, 5.0, p);
  const Trajectory b = rollout(expert_fn(task, ExpertGains{}, p), task, 5.0, p);
  CHECK(a == b);
  for (std::size_t k = 1; k < a.steps.size(); ++k)
    REQUIRE(a.steps[k].state.t - a.steps[k - 1].state.t == doctest::Approx(p.dt));
}

TEST_CASE("rollout rejects non-finite actions and bad durations") {
  const SimParams p;
  const TaskSpec task;
  int calls = 0;
  const PolicyFn bad = [&](const AircraftState&) {
    return ++calls == 8 ? ControlInput(std::nan(""), 0.0) : ControlInput();
  };
  try {
    rollout(bad, task, 1.0, p);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("tick 7") != std::string::npos);
  }
  CHECK_THROWS_AS(rollout(kZero, task, 0.0, p), Error);
}

TEST_CASE("trajectory files round-trip") {
  const SimParams p;
  const TaskSpec task = sample_trial_task(2, SeedStream::Student, 0, p, 3.0);
  const Trajectory t = rollout(expert_fn(task, ExpertGains{}, p), task, 3.0, p);
  const std::string path =
      (std::filesystem::temp_directory_path() / "ftutor_test_traj.jsonl").string();
  save_trajectory(t, path);
  CHECK(load_trajectory(path) == t);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_trajectory(path), Error);
}

TEST_CASE("zero-policy trial means equal the sampled goal offsets") {
  const SimParams p;
  const EvalReport r = avg_heading_error(zero_factory(), 40, 12, p);
  double sum = 0.0;
  for (int i = 0; i < 40; ++i) {
    const TaskSpec t = sample_trial_task(12, SeedStream::Eval, static_cast<std::uint64_t>(i), p, 30.0);
    const double offset = std::abs(heading_error(t.initial_heading, t.target_heading));
    CHECK(r.trial_mean[static_cast<std::size_t>(i)] == doctest::Approx(offset).epsilon(1e-12));
    sum += offset;
  }
  CHECK(r.avg_heading_error == doctest::Approx(sum / 40).epsilon(1e-12));
  CHECK(r.n_trials == 40);
  CHECK(r.seed == 12);
}

TEST_CASE("zero-policy average approaches the uniform-offset expectation") {
  // E|U(-30, 30)| = 15, sd 8.66; 2000 trials give a standard error of 0.19.
  const SimParams p;
  const EvalReport r = avg_heading_error(zero_factory(), 2000, 1, p, 1.0);
  CHECK(std::abs(r.avg_heading_error - 15.0) < 5 * 8.66 / std::sqrt(2000.0));
}

TEST_CASE("expert beats the zero policy") {
  const SimParams p;
  const EvalReport e = avg_heading_error(expert_factory(ExpertGains{}, p), 10, 1, p);
  const EvalReport z = avg_heading_error(zero_factory(), 10, 1, p);
  CHECK(e.avg_heading_error < z.avg_heading_error);
  CHECK(e.avg_heading_error < 5.0);
  CHECK(e.avg_heading_error >= 0.0);
}

TEST_CASE("evaluation is reproducible and tabulates every tick") {
  const SimParams p;
  const EvalReport a = avg_heading_error(expert_factory(ExpertGains{}, p), 3, 5, p, 2.0);
  const EvalReport b = avg_heading_error(expert_factory(ExpertGains{}, p), 3, 5, p, 2.0);
  CHECK(a.to_table(p.dt) == b.to_table(p.dt));
  CHECK(a.heading_error.size() == 3);
  CHECK(a.heading_error[0].size() == 40);
  const std::string table = a.to_table(p.dt);
  CHECK(table.rfind("trial\ttick\tt\theading_error\n", 0) == 0);
  CHECK(std::count(table.begin(), table.end(), '\n') == 1 + 3 * 40);
  CHECK_THROWS_AS(avg_heading_error(zero_factory(), 0, 1, p), Error);
}

TEST_CASE("evaluation trials differ from demonstration trials") {
  const SimParams p;
  const EvalReport demo_stream =
      avg_heading_error(zero_factory(), 5, 1, p, 1.0, SeedStream::Demo);
  const EvalReport eval_stream = avg_heading_error(zero_factory(), 5, 1, p, 1.0);
  CHECK(demo_stream.trial_mean != eval_stream.trial_mean);
}

TEST_CASE("vanishing severity reproduces the expert") {
  const SimParams p;
  const TaskSpec task = sample_trial_task(3, SeedStream::Student, 0, p, 30.0);
  const Trajectory expert = rollout(expert_fn(task, ExpertGains{}, p), task, 30.0, p);
  for (StudentFlaw flaw : {StudentFlaw::Overshooter, StudentFlaw::PitchNeglect}) {
    const Trajectory s =
        rollout(synthesize_student(ExpertGains{}, flaw, 1e-12, task, p, 3), task, 30.0, p);
    for (std::size_t k = 0; k < s.steps.size(); ++k) {
      REQUIRE(std::abs(s.steps[k].control.pitch() - expert.steps[k].control.pitch()) < 1e-9);
      REQUIRE(std::abs(s.steps[k].control.roll() - expert.steps[k].control.roll()) < 1e-9);
    }
  }
}

TEST_CASE("overshooter crosses the target heading") {
  const SimParams p;
  int crossed = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const TaskSpec task = sample_trial_task(6, SeedStream::Student, i, p, 30.0);
    const Trajectory t = rollout(
        synthesize_student(ExpertGains{}, StudentFlaw::Overshooter, 1.0, task, p, i), task, 30.0, p);
    const double e0 = heading_error(t.steps.front().state.heading, task.target_heading);
    bool sign_change = false;
    for (const TrajectoryStep& s : t.steps)
      if (heading_error(s.state.heading, task.target_heading) * e0 < 0.0) sign_change = true;
    crossed += sign_change;
  }
  CHECK(crossed == 20);
}

TEST_CASE("pitch neglect loses altitude control") {
  const SimParams p;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const TaskSpec task = sample_trial_task(6, SeedStream::Student, i, p, 30.0);
    const Trajectory e = rollout(expert_fn(task, ExpertGains{}, p), task, 30.0, p);
    const Trajectory s = rollout(
        synthesize_student(ExpertGains{}, StudentFlaw::PitchNeglect, 1.0, task, p, i), task, 30.0, p);
    CAPTURE(i);
    CHECK(s.summary.mean_abs_altitude_error > 5.0 * e.summary.mean_abs_altitude_error);
  }
}

TEST_CASE("student synthesis validates its inputs") {
  const SimParams p;
  const TaskSpec task;
  CHECK(parse_flaw("overshooter") == StudentFlaw::Overshooter);
  CHECK(parse_flaw("pitch-neglect") == StudentFlaw::PitchNeglect);
  CHECK(to_string(StudentFlaw::PitchNeglect) == "pitch-neglect");
  CHECK_THROWS_AS(parse_flaw("daydreamer"), Error);
  CHECK_THROWS_AS(synthesize_student(ExpertGains{}, StudentFlaw::Overshooter, 0.0, task, p, 1), Error);
  CHECK_THROWS_AS(synthesize_student(ExpertGains{}, StudentFlaw::Overshooter, 1.5, task, p, 1), Error);
}

TEST_CASE("action distance of the zero policy is positive and reproducible") {
  const SimParams p;
  const Policy zero = make_policy();
  const double a = mean_action_distance(zero, ExpertGains{}, 3, 2, p, 5.0);
  CHECK(a > 0.0);
  CHECK(a == mean_action_distance(zero, ExpertGains{}, 3, 2, p, 5.0));
}
