#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>

#include "doctest.h"
#include "flighttutor/error.hpp"
#include "flighttutor/session.hpp"
#include "json.hpp"

using namespace ftutor;
using nlohmann::json;

namespace {

// Control k is delivered just before tick k; a missing entry means no input
// arrived for that tick.
class ScriptedInput : public InputSource {
 public:
  std::vector<std::optional<ControlInput>> controls;
  std::deque<TelemetrySample> telemetry;
  std::size_t close_after = SIZE_MAX;  // polls before reporting closed

  std::optional<ControlInput> poll_control() override {
    const std::size_t k = polls_++;
    return k < controls.size() ? controls[k] : std::nullopt;
  }
  std::optional<TelemetrySample> next_telemetry(std::chrono::duration<double>) override {
    if (telemetry.empty()) return std::nullopt;
    TelemetrySample s = telemetry.front();
    telemetry.pop_front();
    return s;
  }
  bool closed() const override { return polls_ >= close_after; }

 private:
  std::size_t polls_ = 0;
};

class CollectSink : public EventSink {
 public:
  std::vector<protocol::Message> messages;
  void emit(const protocol::Message& m) override { messages.push_back(m); }
  template <class T>
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& m : messages) n += std::holds_alternative<T>(m);
    return n;
  }
};

std::shared_ptr<const Policy> random_policy(std::uint64_t seed = 5) {
  return std::make_shared<const Policy>(init_policy(seed));
}

SessionConfig live_config(double duration) {
  SessionConfig c;
  c.task.target_heading = 15.0;
  c.task.duration = duration;
  return c;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("ft_session_" + name)).string();
}

}  // namespace

TEST_CASE("live sessions run exactly duration times tick rate ticks") {
  for (double duration : {0.05, 1.0, 2.5, 7.3}) {
    ScriptedInput in;
    CollectSink sink;
    const SessionLog log = run_session(live_config(duration), random_policy(), in, sink);
    const auto expected = static_cast<std::size_t>(std::llround(duration * 20.0));
    CHECK(log.ticks.size() == expected);
    CHECK(log.summary.ticks == expected);
    CHECK(log.summary.reason == "completed");
    CHECK(sink.count<protocol::State>() == expected);
    CHECK(sink.count<protocol::Feedback>() == expected);
    CHECK(sink.count<protocol::End>() == 1);
    CHECK(std::holds_alternative<protocol::End>(sink.messages.back()));
    for (std::size_t k = 0; k < log.ticks.size(); ++k)
      REQUIRE(log.ticks[k].state.t == doctest::Approx(k * 0.05));
  }
}

TEST_CASE("state and feedback alternate in tick order") {
  ScriptedInput in;
  CollectSink sink;
  run_session(live_config(1.0), random_policy(), in, sink);
  for (std::size_t k = 0; k + 1 < sink.messages.size(); k += 2) {
    REQUIRE(std::holds_alternative<protocol::State>(sink.messages[k]));
    REQUIRE(std::holds_alternative<protocol::Feedback>(sink.messages[k + 1]));
    REQUIRE(std::get<protocol::State>(sink.messages[k]).t ==
            std::get<protocol::Feedback>(sink.messages[k + 1]).event.t);
  }
}

TEST_CASE("missing input holds the last control, zero before the first") {
  ScriptedInput in;
  in.controls.resize(40);
  in.controls[5] = ControlInput(0.3, -0.2);
  in.controls[20] = ControlInput(-0.1, 0.4);
  CollectSink sink;
  const SessionLog log = run_session(live_config(2.0), random_policy(), in, sink);
  for (std::size_t k = 0; k < log.ticks.size(); ++k) {
    const ControlInput expect = k < 5    ? ControlInput(0.0, 0.0)
                                : k < 20 ? ControlInput(0.3, -0.2)
                                         : ControlInput(-0.1, 0.4);
    REQUIRE(log.ticks[k].student == expect);
  }
}

TEST_CASE("live session state matches the simulator stepped with the held controls") {
  ScriptedInput in;
  for (int k = 0; k < 60; ++k) in.controls.push_back(ControlInput(0.1 * std::sin(k), 0.2));
  CollectSink sink;
  const SessionConfig cfg = live_config(3.0);
  const SessionLog log = run_session(cfg, random_policy(), in, sink);
  AircraftState s = initial_state(cfg.task, cfg.sim);
  for (const SessionTick& tick : log.ticks) {
    REQUIRE(tick.state == s);
    s = step(s, tick.student, cfg.sim);
  }
}

TEST_CASE("a disconnect ends the session early") {
  ScriptedInput in;
  in.close_after = 0;
  CollectSink sink;
  SessionLog log = run_session(live_config(5.0), random_policy(), in, sink);
  CHECK(log.ticks.empty());
  CHECK(log.summary.reason == "client disconnected");
}

TEST_CASE("telemetry packet format") {
  const TelemetrySample s = parse_telemetry("TLM,1.5,270.25,1500,61.2,2.5,-10,0.1,-0.3");
  CHECK(s.t == 1.5);
  CHECK(s.heading == 270.25);
  CHECK(s.altitude == 1500.0);
  CHECK(s.airspeed == 61.2);
  CHECK(s.pitch_att == 2.5);
  CHECK(s.roll_att == -10.0);
  CHECK(s.yp == 0.1);
  CHECK(s.yr == -0.3);
  CHECK(parse_telemetry("TLM,1.5,270.25,1500,61.2,2.5,-10,0.1,-0.3\n").yr == -0.3);

  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(-1000.0, 1000.0);
  for (int i = 0; i < 1000; ++i) {
    TelemetrySample r{u(gen), u(gen), u(gen), u(gen), u(gen), u(gen), u(gen), u(gen)};
    const TelemetrySample back = parse_telemetry(format_telemetry(r));
    REQUIRE(std::memcmp(&back, &r, sizeof r) == 0);
  }
  for (const char* bad : {"", "TLM", "TLM,1,2,3,4,5,6,7", "TLM,1,2,3,4,5,6,7,8,9",
                          "XYZ,1,2,3,4,5,6,7,8", "TLM,1,2,3,4,five,6,7,8", "TLM,1,2,3,4,5,6,7,"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_telemetry(bad), Error);
  }
}

TEST_CASE("telemetry sessions bypass the simulator") {
  SessionConfig cfg = live_config(1.0);
  cfg.mode = SessionMode::TelemetryOnly;
  ScriptedInput in;
  for (int k = 0; k < 30; ++k)
    in.telemetry.push_back({k * 0.05, 10.0 + k, 1500.0, 60.0, 0.1 * k, -0.5 * k, 0.2, -0.1});
  in.telemetry.insert(in.telemetry.begin() + 5, in.telemetry[4]);  // duplicate packet
  CollectSink sink;
  const SessionLog log = run_session(cfg, random_policy(), in, sink);
  REQUIRE(log.ticks.size() == 21);  // t = 0 .. 1.0 inclusive
  CHECK(log.summary.reason == "completed");
  for (std::size_t k = 0; k < log.ticks.size(); ++k) {
    REQUIRE(log.ticks[k].state.heading == 10.0 + k);
    REQUIRE(log.ticks[k].student == ControlInput(0.2, -0.1));
  }
  CHECK(log.ticks[3].state.pitch_rate == doctest::Approx(2.0));
  CHECK(log.ticks[3].state.roll_rate == doctest::Approx(-10.0));
}

TEST_CASE("telemetry timeout reports an error and shuts the session down") {
  SessionConfig cfg = live_config(10.0);
  cfg.mode = SessionMode::TelemetryOnly;
  ScriptedInput in;
  in.telemetry.push_back({0.0, 0.0, 1500.0, 60.0, 0.0, 0.0, 0.0, 0.0});
  CollectSink sink;
  const SessionLog log = run_session(cfg, random_policy(), in, sink);
  CHECK(log.summary.reason == "telemetry timeout");
  REQUIRE(sink.count<protocol::ErrorMessage>() == 1);
  CHECK(std::holds_alternative<protocol::End>(sink.messages.back()));
}

TEST_CASE("session logs round-trip through text") {
  ScriptedInput in;
  for (int k = 0; k < 80; ++k) in.controls.push_back(ControlInput(0.4 * std::cos(0.2 * k), 0.5));
  CollectSink sink;
  SessionConfig cfg = live_config(4.0);
  cfg.policy_path = "policy.json";
  const SessionLog log = run_session(cfg, random_policy(), in, sink);
  const SessionLog back = parse_session_log(serialize(log));
  CHECK(back.ticks == log.ticks);
  CHECK(back.summary == log.summary);
  CHECK(back.config.policy_fingerprint == log.config.policy_fingerprint);
  CHECK(back.config.policy_path == "policy.json");
  CHECK(back.config.task.target_heading == cfg.task.target_heading);
  CHECK(serialize(back) == serialize(log));
}

TEST_CASE("log files are streamed while the session runs") {
  const std::string path = temp_path("stream.jsonl");
  SessionConfig cfg = live_config(1.0);
  cfg.log_path = path;
  ScriptedInput in;
  CollectSink sink;
  const SessionLog log = run_session(cfg, random_policy(), in, sink);
  std::ifstream f(path);
  std::vector<json> lines;
  for (std::string line; std::getline(f, line);) lines.push_back(json::parse(line));
  REQUIRE(lines.size() == 2 + 2 * log.ticks.size());
  CHECK(lines.front()["type"] == "session");
  CHECK(lines.front()["config"]["mode"] == "live");
  CHECK(lines[1]["type"] == "state");
  CHECK(lines[2]["type"] == "feedback");
  CHECK(lines.back()["type"] == "end");
  CHECK(lines.back()["timing"]["ticks"] == log.ticks.size());
  CHECK(load_session_log(path).ticks == log.ticks);
  std::filesystem::remove(path);
}

TEST_CASE("a log without an end line still loads") {
  ScriptedInput in;
  CollectSink sink;
  const SessionLog log = run_session(live_config(1.0), random_policy(), in, sink);
  std::string text = serialize(log);
  text.erase(text.rfind('\n', text.size() - 2) + 1);
  REQUIRE(text.find("\"type\":\"end\"") == std::string::npos);
  const SessionLog partial = parse_session_log(text);
  CHECK(partial.ticks == log.ticks);
}

TEST_CASE("replaying a log reproduces every feedback event") {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> n(0.0, 0.6);
  for (int trial = 0; trial < 5; ++trial) {
    ScriptedInput in;
    for (int k = 0; k < 200; ++k)
      in.controls.push_back(ControlInput(std::clamp(n(gen), -1.0, 1.0),
                                         std::clamp(n(gen), -1.0, 1.0)));
    CollectSink sink;
    const auto policy = random_policy(100 + trial);
    const SessionLog log = run_session(live_config(10.0), policy, in, sink);
    const ReplayResult r = replay_session(parse_session_log(serialize(log)), policy);
    CHECK(r.ticks == log.ticks.size());
    CHECK(r.divergences.empty());
    CHECK(r.summary.pitch_flags == log.summary.pitch_flags);
    CHECK(r.summary.roll_flags == log.summary.roll_flags);
    CHECK(log.summary.pitch_flags + log.summary.roll_flags > 0);
  }
}

TEST_CASE("replay reports tampered feedback") {
  ScriptedInput in;
  for (int k = 0; k < 40; ++k) in.controls.push_back(ControlInput(0.8, 0.0));
  CollectSink sink;
  const auto policy = random_policy();
  SessionLog log = run_session(live_config(2.0), policy, in, sink);
  log.ticks[7].event.hint = "tampered";
  log.ticks[12].event.agent_line.center_x += 1e-12;
  const ReplayResult r = replay_session(log, policy);
  REQUIRE(r.divergences.size() == 2);
  CHECK(r.divergences[0].find("tick 7") == 0);
  CHECK(r.divergences[0].find("hint") != std::string::npos);
  CHECK(r.divergences[1].find("tick 12") == 0);
  CHECK(r.divergences[1].find("center_x") != std::string::npos);
}

TEST_CASE("replay refuses a different policy") {
  ScriptedInput in;
  CollectSink sink;
  const SessionLog log = run_session(live_config(1.0), random_policy(1), in, sink);
  try {
    replay_session(log, random_policy(2));
    FAIL("expected a fingerprint mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Schema);
  }
  CHECK(fingerprint(*random_policy(1)) == log.config.policy_fingerprint);
  CHECK(fingerprint(*random_policy(1)).size() == 16);
}

TEST_CASE("trajectory sessions replay states and controls from the file") {
  const SimParams p;
  TaskSpec task;
  task.target_heading = 30.0;
  task.duration = 3.0;
  const Trajectory traj = rollout(expert_fn(task, ExpertGains{}, p), task, task.duration, p);
  CollectSink sink;
  SessionConfig cfg;
  const auto policy = random_policy();
  const SessionLog a = run_trajectory_session(cfg, policy, traj, sink);
  const SessionLog b = run_trajectory_session(cfg, policy, traj, sink);
  REQUIRE(a.ticks.size() == traj.steps.size());
  CHECK(a.config.mode == SessionMode::ReplayTrajectory);
  for (std::size_t k = 0; k < a.ticks.size(); ++k) {
    REQUIRE(a.ticks[k].state == traj.steps[k].state);
    REQUIRE(a.ticks[k].student == traj.steps[k].control);
  }
  CHECK(a.ticks == b.ticks);
  CHECK(replay_session(a, policy).divergences.empty());
}

TEST_CASE("session configuration checks") {
  const SimParams sim;
  SessionSettings s;
  CHECK_NOTHROW(s.validate(sim));
  s.tick_hz = 25.0;
  CHECK_THROWS_AS(s.validate(sim), Error);
  s = SessionSettings{};
  s.port = 70000;
  CHECK_THROWS_AS(s.validate(sim), Error);
  s = SessionSettings{};
  s.mode = SessionMode::TelemetryOnly;
  CHECK_THROWS_AS(s.validate(sim), Error);
  s.telemetry_port = 49000;
  CHECK_NOTHROW(s.validate(sim));
  s = SessionSettings{};
  s.mode = SessionMode::ReplayTrajectory;
  CHECK_THROWS_AS(s.validate(sim), Error);

  SessionConfig c;
  c.tick_hz = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  ScriptedInput in;
  CollectSink sink;
  CHECK_THROWS_AS(run_session(SessionConfig{}, nullptr, in, sink), Error);

  for (SessionMode m :
       {SessionMode::LiveSim, SessionMode::TelemetryOnly, SessionMode::ReplayTrajectory})
    CHECK(parse_session_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_session_mode("dream"), Error);
}

TEST_CASE("dropped events are reported in the summary and the log keeps every tick") {
  class LossySink : public EventSink {
   public:
    std::vector<protocol::Message> messages;
    void emit(const protocol::Message& m) override { messages.push_back(m); }
    std::uint64_t dropped() const override { return 3; }
  };
  ScriptedInput in;
  LossySink sink;
  const SessionLog log = run_session(live_config(1.0), random_policy(), in, sink);
  CHECK(log.ticks.size() == 20);
  CHECK(log.summary.dropped_events == 3);
  CHECK(std::get<protocol::End>(sink.messages.back()).summary.dropped_events == 3);
}
