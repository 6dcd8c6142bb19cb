#include "flighttutor/session.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "flighttutor/error.hpp"
#include "json_io.hpp"

namespace ftutor {

std::string to_string(SessionMode mode) {
  switch (mode) {
    case SessionMode::LiveSim: return "live";
    case SessionMode::TelemetryOnly: return "telemetry";
    case SessionMode::ReplayTrajectory: return "replay";
  }
  return "live";
}

SessionMode parse_session_mode(const std::string& s) {
  if (s == "live") return SessionMode::LiveSim;
  if (s == "telemetry") return SessionMode::TelemetryOnly;
  if (s == "replay") return SessionMode::ReplayTrajectory;
  throw Error(ErrorCode::InvalidArgument,
              "unknown session mode '" + s + "' (expected live, telemetry or replay)");
}

void SessionSettings::validate(const SimParams& sim) const {
  if (!(tick_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "session.tick_hz must be > 0");
  if (mode == SessionMode::LiveSim && std::abs(tick_hz * sim.dt - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidArgument, "session.tick_hz must equal 1/sim.dt in live mode");
  if (!(duration > 0.0)) throw Error(ErrorCode::InvalidArgument, "session.duration must be > 0");
  if (port < 0 || port > 65535 || telemetry_port < 0 || telemetry_port > 65535)
    throw Error(ErrorCode::InvalidArgument, "session ports must be in [0, 65535]");
  if (event_queue < 1) throw Error(ErrorCode::InvalidArgument, "session.event_queue must be >= 1");
  if (!(telemetry_timeout > 0.0))
    throw Error(ErrorCode::InvalidArgument, "session.telemetry_timeout must be > 0");
  if (mode == SessionMode::TelemetryOnly && telemetry_port == 0)
    throw Error(ErrorCode::InvalidArgument, "telemetry mode requires session.telemetry_port");
  if (mode == SessionMode::ReplayTrajectory && replay_path.empty())
    throw Error(ErrorCode::InvalidArgument, "replay mode requires session.replay_path");
}

void SessionConfig::validate() const {
  sim.validate();
  thresholds.validate();
  if (!(tick_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "tick_hz must be > 0");
  if (mode == SessionMode::LiveSim && std::abs(tick_hz * sim.dt - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidArgument, "tick_hz must equal 1/dt in live mode");
  if (!(task.duration > 0.0)) throw Error(ErrorCode::InvalidArgument, "task duration must be > 0");
}

TelemetrySample parse_telemetry(const std::string& packet) {
  std::string text = packet;
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(item);
  if (parts.size() != 9 || parts[0] != "TLM")
    throw Error(ErrorCode::Parse, "telemetry packet must be TLM followed by 8 fields");
  double v[8];
  for (int i = 0; i < 8; ++i) {
    std::size_t used = 0;
    try {
      v[i] = std::stod(parts[static_cast<std::size_t>(i + 1)], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != parts[static_cast<std::size_t>(i + 1)].size() || !std::isfinite(v[i]))
      throw Error(ErrorCode::Parse, "telemetry field " + std::to_string(i + 1) + " is not a number");
  }
  return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
}

std::string format_telemetry(const TelemetrySample& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "TLM,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", s.t,
                s.heading, s.altitude, s.airspeed, s.pitch_att, s.roll_att, s.yp, s.yr);
  return buf;
}

std::string fingerprint(const Policy& policy) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize(policy)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

using Clock = std::chrono::steady_clock;

json config_json(const SessionConfig& c) {
  return json{{"mode", to_string(c.mode)},
              {"tick_hz", c.tick_hz},
              {"task", c.task},
              {"tutor",
               {{"d1", c.thresholds.pitch},
                {"d2", c.thresholds.roll},
                {"min_flag_duration", c.thresholds.min_flag_duration},
                {"clear_hysteresis", c.thresholds.clear_hysteresis},
                {"compare", to_string(c.thresholds.compare)}}},
              {"sim", c.sim},
              {"policy", c.policy_path},
              {"policy_fingerprint", c.policy_fingerprint},
              {"realtime", c.realtime},
              {"telemetry_timeout", c.telemetry_timeout},
              {"replay_path", c.replay_path}};
}

SessionConfig config_from(const json& j) {
  SessionConfig c;
  c.mode = parse_session_mode(field<std::string>(j, "mode"));
  c.tick_hz = field<double>(j, "tick_hz");
  c.task = field<TaskSpec>(j, "task");
  const json& t = j.at("tutor");
  c.thresholds.pitch = field<double>(t, "d1");
  c.thresholds.roll = field<double>(t, "d2");
  c.thresholds.min_flag_duration = field<double>(t, "min_flag_duration");
  c.thresholds.clear_hysteresis = field<double>(t, "clear_hysteresis");
  c.thresholds.compare = parse_compare_mode(field<std::string>(t, "compare"));
  c.sim = field<SimParams>(j, "sim");
  c.policy_path = field<std::string>(j, "policy");
  c.policy_fingerprint = field<std::string>(j, "policy_fingerprint");
  c.realtime = field<bool>(j, "realtime");
  c.telemetry_timeout = field<double>(j, "telemetry_timeout");
  c.replay_path = field<std::string>(j, "replay_path");
  return c;
}

std::string header_line(const SessionConfig& c) {
  const json j{{"type", "session"}, {"version", 1}, {"config", config_json(c)}};
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

protocol::State state_message(const AircraftState& s, const TaskSpec& task) {
  return {s.t, s.heading, s.altitude, s.airspeed, s.pitch_att, s.roll_att, task.target_heading};
}

std::string tick_lines(const SessionTick& tick, const TaskSpec& task) {
  json state = json::parse(protocol::encode(state_message(tick.state, task)));
  state["x"] = tick.state.x;
  state["y"] = tick.state.y;
  state["pitch_rate"] = tick.state.pitch_rate;
  state["roll_rate"] = tick.state.roll_rate;
  state["yp"] = tick.student.pitch();
  state["yr"] = tick.student.roll();
  return state.dump() + "\n" + protocol::encode(protocol::Feedback{tick.event}) + "\n";
}

std::string end_line(const protocol::Summary& summary, const TimingStats& timing) {
  json j = json::parse(protocol::encode(protocol::End{summary}));
  j["timing"] = {{"ticks", timing.ticks},
                 {"mean_tick_ms", timing.mean_tick_ms},
                 {"max_tick_ms", timing.max_tick_ms},
                 {"late_ticks", timing.late_ticks}};
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

// Shared bookkeeping for every session mode: emits messages, streams the log
// file and accumulates the summary.
class Recorder {
 public:
  Recorder(const SessionConfig& config, EventSink& sink) : sink_(sink) {
    log_.config = config;
    if (!config.log_path.empty()) {
      file_.open(config.log_path, std::ios::binary | std::ios::trunc);
      if (!file_) throw Error(ErrorCode::Io, "cannot open session log " + config.log_path);
      file_ << header_line(config) << '\n';
    }
  }

  void record(const AircraftState& state, const ControlInput& student,
              const FeedbackEvent& event, double work_ms) {
    SessionTick tick{state, student, event};
    sink_.emit(state_message(state, log_.config.task));
    sink_.emit(protocol::Feedback{event});
    if (file_.is_open()) file_ << tick_lines(tick, log_.config.task);
    for (ErrorKind k : event.raised_now)
      (k == ErrorKind::PitchDeviation ? log_.summary.pitch_flags : log_.summary.roll_flags)++;
    alt_sum_ += std::abs(state.altitude - log_.config.task.target_altitude);
    spd_sum_ += std::abs(state.airspeed - log_.config.task.target_airspeed);
    work_sum_ += work_ms;
    log_.timing.max_tick_ms = std::max(log_.timing.max_tick_ms, work_ms);
    log_.ticks.push_back(std::move(tick));
  }

  void late_tick() { ++log_.timing.late_ticks; }

  void error(const std::string& message) { sink_.emit(protocol::ErrorMessage{message}); }

  SessionLog finish(const AircraftState& final_state, double duration, std::string reason) {
    protocol::Summary& s = log_.summary;
    const auto n = log_.ticks.size();
    s.ticks = n;
    s.duration = duration;
    s.reason = std::move(reason);
    if (n > 0) {
      s.final_heading_error =
          heading_error(final_state.heading, log_.config.task.target_heading);
      s.mean_abs_altitude_error = alt_sum_ / static_cast<double>(n);
      s.mean_abs_airspeed_error = spd_sum_ / static_cast<double>(n);
      log_.timing.mean_tick_ms = work_sum_ / static_cast<double>(n);
    }
    log_.timing.ticks = n;
    s.dropped_events = sink_.dropped();
    sink_.emit(protocol::End{s});
    s.dropped_events = sink_.dropped();
    if (file_.is_open()) {
      file_ << end_line(s, log_.timing) << '\n';
      file_.flush();
      if (!file_) throw Error(ErrorCode::Io, "write failed: " + log_.config.log_path);
    }
    return std::move(log_);
  }

 private:
  EventSink& sink_;
  std::ofstream file_;
  SessionLog log_;
  double alt_sum_ = 0.0;
  double spd_sum_ = 0.0;
  double work_sum_ = 0.0;
};

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Sleeps until the next tick deadline; reports whether the deadline had
// already passed.
bool pace(Clock::time_point origin, std::uint64_t tick, double tick_hz) {
  const auto deadline =
      origin + std::chrono::duration_cast<Clock::duration>(
                   std::chrono::duration<double>(static_cast<double>(tick) / tick_hz));
  if (Clock::now() > deadline) return true;
  std::this_thread::sleep_until(deadline);
  return false;
}

SessionLog run_live(const SessionConfig& config, Tutor& tutor, InputSource& input,
                    EventSink& sink) {
  Recorder rec(config, sink);
  const auto ticks = static_cast<std::uint64_t>(std::llround(config.task.duration * config.tick_hz));
  AircraftState state = initial_state(config.task, config.sim);
  ControlInput held;  // (0, 0) until the first control arrives
  std::string reason = "completed";
  const auto origin = Clock::now();
  std::uint64_t k = 0;
  for (; k < ticks; ++k) {
    if (config.realtime && k > 0 && pace(origin, k, config.tick_hz)) rec.late_tick();
    if (input.closed()) {
      reason = "client disconnected";
      break;
    }
    const auto work_start = Clock::now();
    if (auto c = input.poll_control()) held = *c;
    const FeedbackEvent event = tutor.step(state, config.task, held, state.t);
    const AircraftState next = step(state, held, config.sim);
    rec.record(state, held, event, ms_since(work_start));
    state = next;
  }
  return rec.finish(state, static_cast<double>(k) / config.tick_hz, reason);
}

SessionLog run_telemetry(const SessionConfig& config, Tutor& tutor, InputSource& input,
                         EventSink& sink) {
  Recorder rec(config, sink);
  std::optional<AircraftState> prev;
  std::optional<double> first_t;
  AircraftState last;
  std::string reason = "completed";
  while (true) {
    auto sample = input.next_telemetry(std::chrono::duration<double>(config.telemetry_timeout));
    if (!sample) {
      if (input.closed()) {
        reason = "client disconnected";
      } else {
        reason = "telemetry timeout";
        rec.error("telemetry timeout: no packet for " + std::to_string(config.telemetry_timeout) +
                  " s");
      }
      break;
    }
    const auto work_start = Clock::now();
    AircraftState s;
    s.t = sample->t;
    s.heading = wrap_360(sample->heading);
    s.altitude = sample->altitude;
    s.airspeed = sample->airspeed;
    s.pitch_att = sample->pitch_att;
    s.roll_att = sample->roll_att;
    if (prev && s.t > prev->t) {
      s.pitch_rate = (s.pitch_att - prev->pitch_att) / (s.t - prev->t);
      s.roll_rate = (s.roll_att - prev->roll_att) / (s.t - prev->t);
    } else if (prev) {
      continue;  // duplicate or out-of-order packet
    }
    if (!first_t) first_t = s.t;
    const ControlInput student(sample->yp, sample->yr);
    const FeedbackEvent event = tutor.step(s, config.task, student, s.t);
    rec.record(s, student, event, ms_since(work_start));
    prev = s;
    last = s;
    if (s.t - *first_t + 1e-9 >= config.task.duration) break;
    if (input.closed()) {
      reason = "client disconnected";
      break;
    }
  }
  return rec.finish(last, first_t ? last.t - *first_t : 0.0, reason);
}

}  // namespace

SessionLog run_trajectory_session(const SessionConfig& config,
                                  std::shared_ptr<const Policy> policy,
                                  const Trajectory& trajectory, EventSink& sink) {
  SessionConfig cfg = config;
  cfg.mode = SessionMode::ReplayTrajectory;
  cfg.task = trajectory.task;
  cfg.sim = trajectory.params;
  cfg.validate();
  if (cfg.policy_fingerprint.empty()) cfg.policy_fingerprint = fingerprint(*policy);
  Tutor tutor(std::move(policy), cfg.thresholds, cfg.sim);
  Recorder rec(cfg, sink);
  const auto origin = Clock::now();
  for (std::size_t k = 0; k < trajectory.steps.size(); ++k) {
    if (cfg.realtime && k > 0 && pace(origin, k, cfg.tick_hz)) rec.late_tick();
    const auto work_start = Clock::now();
    const TrajectoryStep& st = trajectory.steps[k];
    const FeedbackEvent event = tutor.step(st.state, cfg.task, st.control, st.state.t);
    rec.record(st.state, st.control, event, ms_since(work_start));
  }
  return rec.finish(trajectory.final_state,
                    static_cast<double>(trajectory.steps.size()) / cfg.tick_hz, "completed");
}

SessionLog run_session(const SessionConfig& config, std::shared_ptr<const Policy> policy,
                       InputSource& input, EventSink& sink) {
  if (!policy) throw Error(ErrorCode::InvalidArgument, "run_session requires a policy");
  if (config.mode == SessionMode::ReplayTrajectory) {
    if (config.replay_path.empty())
      throw Error(ErrorCode::InvalidArgument, "replay mode requires a trajectory path");
    return run_trajectory_session(config, std::move(policy), load_trajectory(config.replay_path),
                                  sink);
  }
  config.validate();
  SessionConfig cfg = config;
  if (cfg.policy_fingerprint.empty()) cfg.policy_fingerprint = fingerprint(*policy);
  Tutor tutor(std::move(policy), cfg.thresholds, cfg.sim);
  if (cfg.mode == SessionMode::LiveSim) return run_live(cfg, tutor, input, sink);
  return run_telemetry(cfg, tutor, input, sink);
}

std::string serialize(const SessionLog& log) {
  std::string out = header_line(log.config) + "\n";
  for (const SessionTick& t : log.ticks) out += tick_lines(t, log.config.task);
  out += end_line(log.summary, log.timing) + "\n";
  return out;
}

SessionLog parse_session_log(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  SessionLog log;
  bool have_header = false;
  bool have_end = false;
  std::optional<SessionTick> pending;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_line(line, line_no);
    try {
      const std::string type = field<std::string>(j, "type");
      if (!have_header) {
        if (type != "session") throw Error(ErrorCode::Schema, "not a session log");
        if (field<int>(j, "version") != 1)
          throw Error(ErrorCode::Schema, "unsupported session log version");
        log.config = config_from(j.at("config"));
        have_header = true;
      } else if (type == "state") {
        if (pending) throw Error(ErrorCode::Parse, "state line without feedback");
        SessionTick tick;
        AircraftState& s = tick.state;
        s.t = field<double>(j, "t");
        s.x = field<double>(j, "x");
        s.y = field<double>(j, "y");
        s.altitude = field<double>(j, "altitude");
        s.airspeed = field<double>(j, "airspeed");
        s.heading = field<double>(j, "heading");
        s.pitch_att = field<double>(j, "pitch_att");
        s.roll_att = field<double>(j, "roll_att");
        s.pitch_rate = field<double>(j, "pitch_rate");
        s.roll_rate = field<double>(j, "roll_rate");
        tick.student = ControlInput(field<double>(j, "yp"), field<double>(j, "yr"));
        pending = tick;
      } else if (type == "feedback") {
        if (!pending) throw Error(ErrorCode::Parse, "feedback line without state");
        pending->event = j.get<FeedbackEvent>();
        log.ticks.push_back(std::move(*pending));
        pending.reset();
      } else if (type == "end") {
        const auto end = std::get<protocol::End>(protocol::decode(line));
        log.summary = end.summary;
        if (auto it = j.find("timing"); it != j.end()) {
          log.timing.ticks = field<std::uint64_t>(*it, "ticks");
          log.timing.mean_tick_ms = field<double>(*it, "mean_tick_ms");
          log.timing.max_tick_ms = field<double>(*it, "max_tick_ms");
          log.timing.late_ticks = field<std::uint64_t>(*it, "late_ticks");
        }
        have_end = true;
      } else if (type != "error") {
        throw Error(ErrorCode::Parse, "unexpected record type '" + type + "'");
      }
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw Error(ErrorCode::Parse, "line 1: missing session header");
  if (pending) throw Error(ErrorCode::Parse, "session log ends between state and feedback");
  (void)have_end;  // logs of interrupted sessions have no end line
  return log;
}

void save_session_log(const SessionLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  out << serialize(log);
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

SessionLog load_session_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_session_log(buf.str());
}

namespace {

std::string describe(const json& logged, const json& replayed, const std::string& prefix) {
  std::string out;
  for (auto it = logged.begin(); it != logged.end(); ++it) {
    auto other = replayed.find(it.key());
    if (other == replayed.end() || *other != *it) {
      if (!out.empty()) out += "; ";
      out += prefix + it.key() + ": logged " + it->dump() + ", replayed " +
             (other == replayed.end() ? std::string("<missing>") : other->dump());
    }
  }
  return out;
}

}  // namespace

ReplayResult replay_session(const SessionLog& log, std::shared_ptr<const Policy> policy,
                            bool paced) {
  if (!policy) throw Error(ErrorCode::InvalidArgument, "replay requires a policy");
  const std::string fp = fingerprint(*policy);
  if (!log.config.policy_fingerprint.empty() && fp != log.config.policy_fingerprint)
    throw Error(ErrorCode::Schema, "policy fingerprint " + fp +
                                       " does not match the logged session's " +
                                       log.config.policy_fingerprint);
  Tutor tutor(std::move(policy), log.config.thresholds, log.config.sim);
  ReplayResult result;
  const auto origin = Clock::now();
  for (std::size_t k = 0; k < log.ticks.size(); ++k) {
    if (paced && k > 0) pace(origin, k, log.config.tick_hz);
    const SessionTick& tick = log.ticks[k];
    const FeedbackEvent ev = tutor.step(tick.state, log.config.task, tick.student, tick.state.t);
    if (!(ev == tick.event)) {
      result.divergences.push_back("tick " + std::to_string(k) + ": " +
                                   describe(json(tick.event), json(ev), ""));
    }
    for (ErrorKind kind : ev.raised_now)
      (kind == ErrorKind::PitchDeviation ? result.summary.pitch_flags : result.summary.roll_flags)++;
  }
  result.ticks = log.ticks.size();
  result.summary.ticks = result.ticks;
  return result;
}

}  // namespace ftutor
