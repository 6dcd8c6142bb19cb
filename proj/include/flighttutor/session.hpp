// Fixed-tick tutoring session: student input, simulator, shadow agent and
// tutor, with a replayable log.
#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flighttutor/bc.hpp"
#include "flighttutor/eval.hpp"
#include "flighttutor/expert.hpp"
#include "flighttutor/flightdyn.hpp"
#include "flighttutor/protocol.hpp"
#include "flighttutor/tutor.hpp"

namespace ftutor {

enum class SessionMode { LiveSim, TelemetryOnly, ReplayTrajectory };

std::string to_string(SessionMode mode);
SessionMode parse_session_mode(const std::string& s);

/// Operator-facing session settings (the [session] config section).
struct SessionSettings {
  SessionMode mode = SessionMode::LiveSim;
  std::string host = "127.0.0.1";
  int port = 7878;
  int telemetry_port = 0;   // 0 = no telemetry ingest
  double tick_hz = 20.0;
  double duration = 30.0;   // s per session
  std::uint64_t task_seed = 1;
  double telemetry_timeout = 2.0;  // s
  int event_queue = 256;    // per-client outbound buffer, in messages
  bool realtime = true;     // pace ticks against the wall clock
  std::string log_dir = "sessions";
  std::string replay_path;  // trajectory file for ReplayTrajectory
  std::string policy_path;

  void validate(const SimParams& sim) const;
};

/// Everything one session needs, snapshotted into its log.
struct SessionConfig {
  SessionMode mode = SessionMode::LiveSim;
  double tick_hz = 20.0;
  TaskSpec task;
  TutorThresholds thresholds;
  SimParams sim;
  std::string policy_path;
  std::string policy_fingerprint;
  std::string log_path;  // empty = keep the log in memory only
  bool realtime = false;
  double telemetry_timeout = 2.0;
  std::string replay_path;

  void validate() const;
};

/// Telemetry sample as received from an external simulator.
struct TelemetrySample {
  double t = 0.0;
  double heading = 0.0;
  double altitude = 0.0;
  double airspeed = 0.0;
  double pitch_att = 0.0;
  double roll_att = 0.0;
  double yp = 0.0;
  double yr = 0.0;
};

/// Parses `TLM,<t>,<heading>,<altitude>,<airspeed>,<pitch_att>,<roll_att>,<yp>,<yr>`.
TelemetrySample parse_telemetry(const std::string& packet);
std::string format_telemetry(const TelemetrySample& sample);

class InputSource {
 public:
  virtual ~InputSource() = default;
  /// Newest student control received since the last call, if any.
  virtual std::optional<ControlInput> poll_control() { return std::nullopt; }
  /// Next telemetry sample, waiting at most `timeout`.
  virtual std::optional<TelemetrySample> next_telemetry(std::chrono::duration<double> timeout) {
    (void)timeout;
    return std::nullopt;
  }
  /// True once the client disconnected or asked to stop.
  virtual bool closed() const { return false; }
};

class EventSink {
 public:
  virtual ~EventSink() = default;
  /// Must not block the tick loop.
  virtual void emit(const protocol::Message& message) = 0;
  virtual std::uint64_t dropped() const { return 0; }
};

struct TimingStats {
  std::uint64_t ticks = 0;
  double mean_tick_ms = 0.0;  // tutor + simulator work per tick
  double max_tick_ms = 0.0;
  std::uint64_t late_ticks = 0;  // ticks that started after their deadline
};

struct SessionTick {
  AircraftState state;
  ControlInput student;
  FeedbackEvent event;

  bool operator==(const SessionTick&) const = default;
};

struct SessionLog {
  SessionConfig config;
  std::vector<SessionTick> ticks;
  protocol::Summary summary;
  TimingStats timing;
};

std::string fingerprint(const Policy& policy);

/// Runs one session to completion. Throws Error(Schema) when the policy does
/// not match the simulator features.
SessionLog run_session(const SessionConfig& config, std::shared_ptr<const Policy> policy,
                       InputSource& input, EventSink& sink);

/// Header line, then state and feedback lines in tick order, then an end line.
std::string serialize(const SessionLog& log);
SessionLog parse_session_log(const std::string& text);
void save_session_log(const SessionLog& log, const std::string& path);
SessionLog load_session_log(const std::string& path);

struct ReplayResult {
  std::size_t ticks = 0;
  std::vector<std::string> divergences;  // empty when the replay is exact
  protocol::Summary summary;
};

/// Re-runs the tutor over the logged ticks and compares every FeedbackEvent
/// field-for-field with the log.
ReplayResult replay_session(const SessionLog& log, std::shared_ptr<const Policy> policy,
                            bool paced = false);

/// Trajectory of a student flight as a session input: states and controls
/// come from the file.
SessionLog run_trajectory_session(const SessionConfig& config,
                                  std::shared_ptr<const Policy> policy,
                                  const Trajectory& trajectory, EventSink& sink);

}  // namespace ftutor
