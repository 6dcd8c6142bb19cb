#include "flighttutor/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "flighttutor/error.hpp"

namespace ftutor {
namespace {

struct Entry {
  std::function<void(Config&, const std::string&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorCode::InvalidArgument, key + ": expected a number, got '" + s + "'");
  return v;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& s) {
  Int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorCode::InvalidArgument, key + ": expected an integer, got '" + s + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw Error(ErrorCode::InvalidArgument, key + ": expected true/false, got '" + s + "'");
}

template <class Member>
Entry number(Member member) {
  return {[member](Config& c, const std::string& key, const std::string& v) {
            using T = std::remove_reference_t<decltype(member(c))>;
            if constexpr (std::is_floating_point_v<T>)
              member(c) = parse_double(key, v);
            else
              member(c) = parse_int<T>(key, v);
          },
          [member](const Config& c) {
            const auto& v = member(const_cast<Config&>(c));
            if constexpr (std::is_floating_point_v<std::remove_cvref_t<decltype(v)>>)
              return format_double(v);
            else
              return std::to_string(v);
          }};
}

#define FT_NUM(expr) number([](Config& c) -> auto& { return c.expr; })

const std::map<std::string, Entry>& registry() {
  static const std::map<std::string, Entry> entries = [] {
    std::map<std::string, Entry> m;
    m["sim.dt"] = FT_NUM(sim.dt);
    m["sim.g"] = FT_NUM(sim.g);
    m["sim.pitch_rate_gain"] = FT_NUM(sim.pitch_rate_gain);
    m["sim.roll_rate_gain"] = FT_NUM(sim.roll_rate_gain);
    m["sim.pitch_limit"] = FT_NUM(sim.pitch_limit);
    m["sim.roll_limit"] = FT_NUM(sim.roll_limit);
    m["sim.v_trim"] = FT_NUM(sim.v_trim);
    m["sim.v_min"] = FT_NUM(sim.v_min);
    m["sim.v_max"] = FT_NUM(sim.v_max);
    m["sim.drag_coeff"] = FT_NUM(sim.drag_coeff);
    m["sim.thrust_accel"] = FT_NUM(sim.thrust_accel);

    m["expert.k_hdg_to_bank"] = FT_NUM(expert.k_hdg_to_bank);
    m["expert.bank_limit_deg"] = FT_NUM(expert.bank_limit_deg);
    m["expert.k_roll_p"] = FT_NUM(expert.k_roll_p);
    m["expert.k_roll_d"] = FT_NUM(expert.k_roll_d);
    m["expert.k_alt_to_pitch"] = FT_NUM(expert.k_alt_to_pitch);
    m["expert.k_spd_to_pitch"] = FT_NUM(expert.k_spd_to_pitch);
    m["expert.k_pitch_p"] = FT_NUM(expert.k_pitch_p);
    m["expert.k_pitch_d"] = FT_NUM(expert.k_pitch_d);
    m["expert.action_noise_std"] = FT_NUM(expert.action_noise_std);

    m["train.learning_rate"] = FT_NUM(train.learning_rate);
    m["train.lr_final_fraction"] = FT_NUM(train.lr_final_fraction);
    m["train.batch_size"] = FT_NUM(train.batch_size);
    m["train.max_epochs"] = FT_NUM(train.max_epochs);
    m["train.eval_every"] = FT_NUM(train.eval_every);
    m["train.patience"] = FT_NUM(train.patience);
    m["train.seed"] = FT_NUM(train.seed);
    m["train.val_fraction"] = FT_NUM(train.val_fraction);

    m["eval.trials"] = FT_NUM(eval.trials);
    m["eval.duration"] = FT_NUM(eval.duration);
    m["eval.heading_gate"] = FT_NUM(eval.heading_gate);
    m["eval.action_gate"] = FT_NUM(eval.action_gate);

    m["tutor.d1"] = FT_NUM(tutor.pitch);
    m["tutor.d2"] = FT_NUM(tutor.roll);
    m["tutor.min_flag_duration"] = FT_NUM(tutor.min_flag_duration);
    m["tutor.clear_hysteresis"] = FT_NUM(tutor.clear_hysteresis);
    m["tutor.compare"] = {
        [](Config& c, const std::string&, const std::string& v) { c.tutor.compare = parse_compare_mode(v); },
        [](const Config& c) { return to_string(c.tutor.compare); }};

    m["session.mode"] = {
        [](Config& c, const std::string&, const std::string& v) { c.session.mode = parse_session_mode(v); },
        [](const Config& c) { return to_string(c.session.mode); }};
    m["session.host"] = {[](Config& c, const std::string&, const std::string& v) { c.session.host = v; },
                         [](const Config& c) { return c.session.host; }};
    m["session.port"] = FT_NUM(session.port);
    m["session.telemetry_port"] = FT_NUM(session.telemetry_port);
    m["session.tick_hz"] = FT_NUM(session.tick_hz);
    m["session.duration"] = FT_NUM(session.duration);
    m["session.task_seed"] = FT_NUM(session.task_seed);
    m["session.telemetry_timeout"] = FT_NUM(session.telemetry_timeout);
    m["session.event_queue"] = FT_NUM(session.event_queue);
    m["session.realtime"] = {
        [](Config& c, const std::string& key, const std::string& v) { c.session.realtime = parse_bool(key, v); },
        [](const Config& c) { return std::string(c.session.realtime ? "true" : "false"); }};
    m["session.log_dir"] = {[](Config& c, const std::string&, const std::string& v) { c.session.log_dir = v; },
                            [](const Config& c) { return c.session.log_dir; }};
    m["session.replay_path"] = {[](Config& c, const std::string&, const std::string& v) { c.session.replay_path = v; },
                                [](const Config& c) { return c.session.replay_path; }};
    m["session.policy"] = {[](Config& c, const std::string&, const std::string& v) { c.session.policy_path = v; },
                           [](const Config& c) { return c.session.policy_path; }};
    return m;
  }();
  return entries;
}

#undef FT_NUM

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void Config::set(const std::string& key, const std::string& value) {
  const auto& reg = registry();
  auto it = reg.find(key);
  if (it == reg.end()) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
  it->second.set(*this, key, trim(value));
}

std::string Config::get(const std::string& key) const {
  const auto& reg = registry();
  auto it = reg.find(key);
  if (it == reg.end()) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
  return it->second.get(*this);
}

const std::vector<std::string>& Config::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [key, entry] : registry()) out.push_back(key);
    return out;
  }();
  return k;
}

void Config::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorCode::InvalidArgument, where + "bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::InvalidArgument, where + "expected key = value");
    if (section.empty())
      throw Error(ErrorCode::InvalidArgument, where + "key outside of a [section]");
    try {
      set(section + "." + trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    }
  }
}

void Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  load_text(buf.str(), path);
}

std::string Config::dump() const {
  std::ostringstream out;
  std::string section;
  for (const std::string& key : keys()) {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << '\n';
      out << '[' << sec << "]\n";
      section = sec;
    }
    out << key.substr(dot + 1) << " = " << get(key) << '\n';
  }
  return out.str();
}

void Config::validate() const {
  sim.validate();
  expert.validate(sim);
  train.validate();
  tutor.validate();
  if (eval.trials < 1) throw Error(ErrorCode::InvalidArgument, "eval.trials must be >= 1");
  if (!(eval.duration > 0.0)) throw Error(ErrorCode::InvalidArgument, "eval.duration must be > 0");
  session.validate(sim);
}

}  // namespace ftutor
