#include <cmath>
#include <filesystem>
#include <functional>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <tuple>

#include "doctest.h"
#include "flighttutor/dataset.hpp"
#include "flighttutor/error.hpp"

using namespace ftutor;

namespace {

Dataset random_dataset(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> n_trials(0, 6), n_samples(1, 30);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), deg(0.0, 360.0);
  std::uniform_int_distribution<int> exponent(-300, 300);
  Dataset d;
  d.params.dt = 0.01 + std::abs(unit(gen));
  const int trials = n_trials(gen);
  for (int trial = 0; trial < trials; ++trial) {
    TaskSpec task;
    task.initial_heading = deg(gen);
    task.target_heading = deg(gen);
    task.target_altitude = 1000.0 * std::abs(unit(gen));
    task.target_airspeed = 40.0 + 10.0 * unit(gen);
    task.duration = 1.0 + std::abs(unit(gen));
    task.seed = gen();
    d.tasks.push_back(task);
    double t = unit(gen);
    const int n = n_samples(gen);
    for (int k = 0; k < n; ++k) {
      Sample s;
      for (double& f : s.features) f = unit(gen) * std::pow(10.0, exponent(gen) / 10);
      s.features[0] = std::numeric_limits<double>::denorm_min();
      s.action = ControlInput(unit(gen), unit(gen));
      s.trial_id = trial;
      s.t = t;
      t += std::abs(unit(gen)) + 1e-3;
      d.samples.push_back(s);
    }
  }
  return d;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ftutor_test_" + name);
}

std::string error_message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("featurize on target") {
  const SimParams p;
  TaskSpec task;
  task.initial_heading = task.target_heading = 10.0;
  const FeatureVector f = featurize(initial_state(task, p), task, p);
  const FeatureVector expected{0, 1, 0, 0, 0, 0, 0, 0};
  CHECK(f == expected);
}

TEST_CASE("featurize heading error of 90 deg") {
  const SimParams p;
  TaskSpec task;
  task.initial_heading = 0.0;
  task.target_heading = 90.0;
  const FeatureVector f = featurize(initial_state(task, p), task, p);
  CHECK(f[0] == doctest::Approx(1.0));
  CHECK(f[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("featurize is invariant to heading wrap") {
  const SimParams p;
  TaskSpec a, b;
  a.initial_heading = 350.0;
  a.target_heading = 10.0;
  b.initial_heading = 10.0;
  b.target_heading = 30.0;
  const FeatureVector fa = featurize(initial_state(a, p), a, p);
  const FeatureVector fb = featurize(initial_state(b, p), b, p);
  for (std::size_t i = 0; i < fa.size(); ++i) CHECK(fa[i] == doctest::Approx(fb[i]));
}

TEST_CASE("featurize scales each component") {
  const SimParams p;
  TaskSpec task;
  AircraftState s = initial_state(task, p);
  s.altitude = task.target_altitude - 50.0;
  s.airspeed = task.target_airspeed + 5.0;
  s.pitch_att = 10.0;
  s.roll_att = -22.5;
  s.pitch_rate = 4.0;
  s.roll_rate = -20.0;
  const FeatureVector f = featurize(s, task, p);
  CHECK(f[2] == doctest::Approx(0.5));
  CHECK(f[3] == doctest::Approx(-0.5));
  CHECK(f[4] == doctest::Approx(0.5));
  CHECK(f[5] == doctest::Approx(-0.5));
  CHECK(f[6] == doctest::Approx(0.2));
  CHECK(f[7] == doctest::Approx(-1.0));
}

TEST_CASE("featurize stays finite over the state envelope") {
  const SimParams p;
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TaskSpec task;
  for (int i = 0; i < 100000; ++i) {
    AircraftState s;
    s.heading = 360.0 * u(gen);
    s.altitude = 1e5 * u(gen);
    s.airspeed = p.v_min + (p.v_max - p.v_min) * u(gen);
    s.pitch_att = p.pitch_limit * (2 * u(gen) - 1);
    s.roll_att = p.roll_limit * (2 * u(gen) - 1);
    s.pitch_rate = 2 * p.pitch_rate_gain * (2 * u(gen) - 1);
    s.roll_rate = 2 * p.roll_rate_gain * (2 * u(gen) - 1);
    task.target_heading = 360.0 * u(gen);
    for (double f : featurize(s, task, p)) REQUIRE(std::isfinite(f));
  }
}

TEST_CASE("save/load round-trips a full demonstration set") {
  const Dataset d = generate_demos(25, 30.0, ExpertGains{}, SimParams{}, 3);
  const auto path = temp_path("demos.jsonl");
  save(d, path);
  CHECK(load(path) == d);
  std::filesystem::remove(path);
}

TEST_CASE("serialize/deserialize round-trips random datasets") {
  std::mt19937_64 gen(2024);
  for (int i = 0; i < 100; ++i) {
    const Dataset d = random_dataset(gen);
    const Dataset back = deserialize(serialize(d));
    REQUIRE(back == d);
  }
}

TEST_CASE("empty dataset loads as empty") {
  Dataset d;
  const Dataset back = deserialize(serialize(d));
  CHECK(back.samples.empty());
  CHECK(back.tasks.empty());
  CHECK(back == d);
}

TEST_CASE("truncated final line is reported with its line number") {
  const Dataset d = generate_demos(1, 1.0, ExpertGains{}, SimParams{}, 3);
  std::string text = serialize(d);
  text.resize(text.size() - 15);  // cut into the last sample
  const std::string msg = error_message([&] { deserialize(text); });
  CHECK(msg.find("line 21") != std::string::npos);
  try {
    deserialize(text);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Parse);
  }
}

TEST_CASE("schema problems are rejected") {
  const Dataset d = generate_demos(1, 1.0, ExpertGains{}, SimParams{}, 3);
  std::string text = serialize(d);
  std::string bad_version = text;
  bad_version.replace(bad_version.find("\"schema_version\":1"), 18, "\"schema_version\":9");
  try {
    deserialize(bad_version);
    FAIL("expected a schema error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Schema);
  }
  std::string bad_features = text;
  bad_features.replace(bad_features.find("ft8-v1"), 6, "ft9-v1");
  CHECK_THROWS_AS(deserialize(bad_features), Error);
  CHECK_THROWS_AS(deserialize(""), Error);
  CHECK_THROWS_AS(load(temp_path("does-not-exist.jsonl")), Error);
}

TEST_CASE("sample lines use the documented keys") {
  const Dataset d = generate_demos(1, 0.1, ExpertGains{}, SimParams{}, 3);
  const std::string text = serialize(d);
  const std::string second = text.substr(text.find('\n') + 1);
  for (const char* key : {"\"trial\":", "\"t\":", "\"f\":[", "\"yp\":", "\"yr\":"})
    CHECK(second.find(key) != std::string::npos);
  const std::string header = text.substr(0, text.find('\n'));
  for (const char* key : {"\"schema_version\":", "\"sim\":", "\"tasks\":"})
    CHECK(header.find(key) != std::string::npos);
}

TEST_CASE("validate rejects broken trial structure") {
  Dataset d = generate_demos(2, 0.5, ExpertGains{}, SimParams{}, 3);
  Dataset gap = d;
  for (Sample& s : gap.samples)
    if (s.trial_id == 1) s.trial_id = 2;
  gap.tasks.push_back(gap.tasks.back());
  CHECK_THROWS_AS(validate(gap), Error);
  Dataset time = d;
  time.samples[3].t = time.samples[2].t;
  CHECK_THROWS_AS(validate(time), Error);
  Dataset nan = d;
  nan.samples[0].features[4] = std::nan("");
  CHECK_THROWS_AS(validate(nan), Error);
}

TEST_CASE("split by whole trials") {
  const Dataset d = generate_demos(25, 2.0, ExpertGains{}, SimParams{}, 8);
  const auto [train, val] = split(d, 0.2, 5);
  CHECK(train.trial_count() == 20);
  CHECK(val.trial_count() == 5);
  CHECK_NOTHROW(validate(train));
  CHECK_NOTHROW(validate(val));

  const auto [all, none] = split(d, 0.0, 5);
  CHECK(all == d);
  CHECK(none.samples.empty());

  const auto again = split(d, 0.2, 5);
  CHECK(again.first == train);
  CHECK(again.second == val);

  CHECK_THROWS_AS(split(d, 1.0, 5), Error);
  CHECK_THROWS_AS(split(d, -0.1, 5), Error);
}

TEST_CASE("split is a partition of trials and samples") {
  std::mt19937_64 gen(77);
  for (int i = 0; i < 50; ++i) {
    const Dataset d = random_dataset(gen);
    const double frac = std::uniform_real_distribution<double>(0.0, 0.95)(gen);
    const auto [a, b] = split(d, frac, gen());
    REQUIRE(a.trial_count() + b.trial_count() == d.trial_count());
    REQUIRE(a.samples.size() + b.samples.size() == d.samples.size());
    // Each task keeps its seed, so seeds identify original trials.
    std::set<std::uint64_t> seeds_a, seeds_b;
    for (const auto& t : a.tasks) seeds_a.insert(t.seed);
    for (const auto& t : b.tasks) seeds_b.insert(t.seed);
    for (auto s : seeds_a) REQUIRE(seeds_b.count(s) == 0);
    // Multiset of (seed, t, action) is preserved.
    std::multiset<std::tuple<std::uint64_t, double, double, double>> orig, parts;
    for (const Sample& s : d.samples)
      orig.emplace(d.tasks[s.trial_id].seed, s.t, s.action.pitch(), s.action.roll());
    for (const Dataset* part : {&a, &b})
      for (const Sample& s : part->samples)
        parts.emplace(part->tasks[s.trial_id].seed, s.t, s.action.pitch(), s.action.roll());
    REQUIRE(orig == parts);
  }
}
