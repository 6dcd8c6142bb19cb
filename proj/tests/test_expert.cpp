#include <cmath>

#include "doctest.h"
#include "flighttutor/dataset.hpp"
#include "flighttutor/error.hpp"
#include "flighttutor/expert.hpp"

using namespace ftutor;

TEST_CASE("on-target trimmed state gives a centered yoke") {
  const SimParams p;
  TaskSpec task;
  task.initial_heading = 77.0;
  task.target_heading = 77.0;
  const ControlInput u = expert_policy(initial_state(task, p), task, ExpertGains{}, p);
  CHECK(std::abs(u.pitch()) < 1e-6);
  CHECK(std::abs(u.roll()) < 1e-6);
}

TEST_CASE("target to the right banks right") {
  const SimParams p;
  TaskSpec task;
  task.initial_heading = 350.0;
  task.target_heading = 20.0;
  const ControlInput u = expert_policy(initial_state(task, p), task, ExpertGains{}, p);
  CHECK(u.roll() > 0.0);
  task.target_heading = 320.0;
  CHECK(expert_policy(initial_state(task, p), task, ExpertGains{}, p).roll() < 0.0);
}

TEST_CASE("desired bank saturates at the bank limit") {
  ExpertGains g;
  g.k_hdg_to_bank = 1.0;
  g.bank_limit_deg = 25.0;
  TaskSpec task;
  task.target_heading = 90.0;
  AircraftState s;
  s.heading = 0.0;
  CHECK(desired_bank(s, task, g) == 25.0);
  task.target_heading = 270.0;
  CHECK(desired_bank(s, task, g) == -25.0);
}

TEST_CASE("low altitude pitches up, excess speed pitches up") {
  const SimParams p;
  TaskSpec task;
  AircraftState s = initial_state(task, p);
  s.altitude = task.target_altitude - 50.0;
  CHECK(expert_policy(s, task, ExpertGains{}, p).pitch() > 0.0);
  s = initial_state(task, p);
  s.airspeed = task.target_airspeed + 5.0;
  CHECK(expert_policy(s, task, ExpertGains{}, p).pitch() > 0.0);
}

TEST_CASE("sample_task is deterministic per seed") {
  const SimParams p;
  CHECK(sample_task(40.0, 99, p) == sample_task(40.0, 99, p));
  CHECK(sample_task(40.0, 99, p).target_heading != sample_task(40.0, 100, p).target_heading);
  const TaskSpec t = sample_task(40.0, 99, p);
  CHECK(t.target_altitude == kDefaultAltitude);
  CHECK(t.target_airspeed == p.v_trim);
  CHECK(t.duration == 30.0);
}

TEST_CASE("goal offsets are within 30 deg and uniform") {
  const SimParams p;
  const int n = 10000;
  int bins[6] = {0, 0, 0, 0, 0, 0};
  for (int i = 0; i < n; ++i) {
    const TaskSpec t = sample_task(355.0, static_cast<std::uint64_t>(i) * 7919 + 1, p);
    const double off = heading_error(t.initial_heading, t.target_heading);
    REQUIRE(off >= -30.0);
    REQUIRE(off <= 30.0);
    ++bins[std::min(5, static_cast<int>((off + 30.0) / 10.0))];
  }
  // Binomial(n, 1/6): mean n/6, sigma sqrt(n * 1/6 * 5/6).
  const double mean = n / 6.0;
  const double sigma = std::sqrt(n * (1.0 / 6.0) * (5.0 / 6.0));
  for (int b : bins) {
    CAPTURE(b);
    CHECK(std::abs(b - mean) <= 5.0 * sigma);
  }
}

TEST_CASE("trial tasks draw start headings over the whole circle") {
  const SimParams p;
  double lo = 360.0, hi = 0.0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const TaskSpec t = sample_trial_task(1, SeedStream::Demo, i, p, 30.0);
    lo = std::min(lo, t.initial_heading);
    hi = std::max(hi, t.initial_heading);
  }
  CHECK(lo < 20.0);
  CHECK(hi > 340.0);
}

TEST_CASE("demonstration and evaluation streams do not share tasks") {
  const SimParams p;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const TaskSpec demo = sample_trial_task(1, SeedStream::Demo, i, p, 30.0);
    for (std::uint64_t j = 0; j < 50; ++j)
      CHECK(demo.seed != sample_trial_task(1, SeedStream::Eval, j, p, 30.0).seed);
  }
}

TEST_CASE("paper protocol: 25 trials of 30 s") {
  const SimParams p;
  const Dataset d = generate_demos(25, 30.0, ExpertGains{}, p, 1);
  CHECK(d.trial_count() == 25);
  CHECK(d.samples.size() == 15000);
  CHECK(static_cast<double>(d.samples.size()) * p.dt / 60.0 == doctest::Approx(12.5));
  for (const TaskSpec& t : d.tasks) {
    const double off = heading_error(t.initial_heading, t.target_heading);
    CHECK(off >= -30.0);
    CHECK(off <= 30.0);
  }
  for (const Sample& s : d.samples) {
    REQUIRE(std::abs(s.action.pitch()) <= 1.0);
    REQUIRE(std::abs(s.action.roll()) <= 1.0);
  }
}

TEST_CASE("demonstrations are competent when re-flown from the recorded actions") {
  const SimParams p;
  const Dataset d = generate_demos(25, 30.0, ExpertGains{}, p, 1);
  for (std::size_t trial = 0; trial < d.trial_count(); ++trial) {
    const TaskSpec& task = d.tasks[trial];
    AircraftState s = initial_state(task, p);
    double alt_err = 0.0;
    int late = 0;
    for (const Sample& smp : d.samples) {
      if (smp.trial_id != static_cast<int>(trial)) continue;
      REQUIRE(smp.t == doctest::Approx(s.t));
      REQUIRE(smp.features == featurize(s, task, p));
      s = step(s, smp.action, p);
      if (s.t > task.duration - 10.0 + 1e-9) {
        alt_err += std::abs(s.altitude - task.target_altitude);
        ++late;
      }
    }
    CAPTURE(trial);
    CHECK(s.t == doctest::Approx(30.0));
    CHECK(std::abs(heading_error(s.heading, task.target_heading)) < 2.0);
    CHECK(alt_err / late < 5.0);
  }
}

TEST_CASE("noise-free demonstrations are reproducible") {
  const SimParams p;
  ExpertGains g;
  g.action_noise_std = 0.0;
  CHECK(generate_demos(3, 5.0, g, p, 42) == generate_demos(3, 5.0, g, p, 42));
  g.action_noise_std = 0.02;
  CHECK(generate_demos(3, 5.0, g, p, 42) == generate_demos(3, 5.0, g, p, 42));
}

TEST_CASE("generate_demos rejects bad arguments") {
  const SimParams p;
  CHECK_THROWS_AS(generate_demos(0, 30.0, ExpertGains{}, p, 1), Error);
  CHECK_THROWS_AS(generate_demos(1, 0.0, ExpertGains{}, p, 1), Error);
  CHECK_THROWS_AS(generate_demos(1, -3.0, ExpertGains{}, p, 1), Error);
  ExpertGains g;
  g.bank_limit_deg = 60.0;
  CHECK_THROWS_AS(generate_demos(1, 1.0, g, p, 1), Error);
  g = ExpertGains{};
  g.k_roll_p = -0.1;
  CHECK_THROWS_AS(g.validate(p), Error);
}
