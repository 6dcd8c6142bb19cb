#include "flighttutor/flighttutor.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <string>

#include "flighttutor/config.hpp"
#include "flighttutor/error.hpp"
#include "flighttutor/pipeline.hpp"
#include "flighttutor/server.hpp"
#include "flighttutor/session.hpp"

struct ft_config {
  ftutor::Config config;
};
struct ft_dataset {
  ftutor::Dataset dataset;
};
struct ft_policy {
  std::shared_ptr<const ftutor::Policy> policy;
};
struct ft_eval_report {
  ftutor::DeploymentReport report;
};
struct ft_server {
  std::unique_ptr<ftutor::Server> server;
};

namespace {

thread_local std::string last_error;

ft_status fail(ft_status status, const std::string& message) {
  last_error = message;
  return status;
}

ft_status code_of(ftutor::ErrorCode code) {
  switch (code) {
    case ftutor::ErrorCode::InvalidArgument: return FT_ERR_INVALID_ARGUMENT;
    case ftutor::ErrorCode::Io: return FT_ERR_IO;
    case ftutor::ErrorCode::Schema: return FT_ERR_SCHEMA;
    case ftutor::ErrorCode::Parse: return FT_ERR_PARSE;
    case ftutor::ErrorCode::Diverged: return FT_ERR_DIVERGED;
    case ftutor::ErrorCode::Network: return FT_ERR_NETWORK;
    case ftutor::ErrorCode::Timeout: return FT_ERR_TIMEOUT;
    case ftutor::ErrorCode::Internal: return FT_ERR_INTERNAL;
  }
  return FT_ERR_INTERNAL;
}

template <typename F>
ft_status guard(F&& body) {
  try {
    body();
    last_error.clear();
    return FT_OK;
  } catch (const ftutor::Error& e) {
    return fail(code_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(FT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(FT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(FT_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* name) {
  if (p == nullptr)
    throw ftutor::Error(ftutor::ErrorCode::InvalidArgument, std::string(name) + " is NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ftutor::Error(ftutor::ErrorCode::Io, "cannot open " + path + " for writing");
  out << text;
  if (!out) throw ftutor::Error(ftutor::ErrorCode::Io, "write failed: " + path);
}

class NullSink : public ftutor::EventSink {
 public:
  void emit(const ftutor::protocol::Message&) override {}
};

}  // namespace

extern "C" {

const char* ft_version(void) { return "0.1.0"; }

const char* ft_status_name(ft_status status) {
  switch (status) {
    case FT_OK: return "ok";
    case FT_ERR_INVALID_ARGUMENT: return "invalid argument";
    case FT_ERR_IO: return "i/o error";
    case FT_ERR_SCHEMA: return "schema mismatch";
    case FT_ERR_PARSE: return "parse error";
    case FT_ERR_DIVERGED: return "training diverged";
    case FT_ERR_NETWORK: return "network error";
    case FT_ERR_TIMEOUT: return "timeout";
    case FT_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* ft_last_error(void) { return last_error.c_str(); }

void ft_string_free(char* s) { std::free(s); }

ft_status ft_config_new(ft_config_t** out) {
  return guard([&] {
    require(out, "out");
    *out = new ft_config{};
  });
}

void ft_config_free(ft_config_t* config) { delete config; }

ft_status ft_config_load_file(ft_config_t* config, const char* path) {
  return guard([&] {
    require(config, "config");
    require(path, "path");
    config->config.load_file(path);
  });
}

ft_status ft_config_set(ft_config_t* config, const char* key, const char* value) {
  return guard([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    config->config.set(key, value);
  });
}

ft_status ft_config_get(const ft_config_t* config, const char* key, char** out) {
  return guard([&] {
    require(config, "config");
    require(key, "key");
    require(out, "out");
    *out = dup_string(config->config.get(key));
  });
}

ft_status ft_config_dump(const ft_config_t* config, char** out) {
  return guard([&] {
    require(config, "config");
    require(out, "out");
    *out = dup_string(config->config.dump());
  });
}

ft_status ft_config_validate(const ft_config_t* config) {
  return guard([&] {
    require(config, "config");
    config->config.validate();
  });
}

ft_status ft_demos_generate(const ft_config_t* config, int trials, double duration, uint64_t seed,
                            ft_dataset_t** out) {
  return guard([&] {
    require(config, "config");
    require(out, "out");
    const auto& c = config->config;
    auto ds = std::make_unique<ft_dataset>();
    ds->dataset = ftutor::generate_demos(trials, duration, c.expert, c.sim, seed);
    *out = ds.release();
  });
}

ft_status ft_dataset_load(const char* path, ft_dataset_t** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    auto ds = std::make_unique<ft_dataset>();
    ds->dataset = ftutor::load(path);
    *out = ds.release();
  });
}

ft_status ft_dataset_save(const ft_dataset_t* dataset, const char* path) {
  return guard([&] {
    require(dataset, "dataset");
    require(path, "path");
    ftutor::save(dataset->dataset, path);
  });
}

ft_status ft_dataset_info(const ft_dataset_t* dataset, ft_dataset_info_t* out) {
  return guard([&] {
    require(dataset, "dataset");
    require(out, "out");
    const auto& d = dataset->dataset;
    *out = {};
    out->samples = d.samples.size();
    out->trials = d.tasks.size();
    out->total_seconds = static_cast<double>(d.samples.size()) * d.params.dt;
    for (std::size_t i = 0; i < d.tasks.size(); ++i) {
      const double off = ftutor::heading_error(d.tasks[i].initial_heading, d.tasks[i].target_heading);
      if (i == 0 || off < out->min_goal_offset) out->min_goal_offset = off;
      if (i == 0 || off > out->max_goal_offset) out->max_goal_offset = off;
    }
  });
}

void ft_dataset_free(ft_dataset_t* dataset) { delete dataset; }

ft_status ft_train(const ft_config_t* config, const ft_dataset_t* dataset, const char* curve_path,
                   ft_policy_t** out) {
  return guard([&] {
    require(config, "config");
    require(dataset, "dataset");
    require(out, "out");
    ftutor::TrainResult result = ftutor::train_policy(dataset->dataset, config->config);
    if (curve_path != nullptr) write_text(curve_path, result.curve.to_table());
    auto p = std::make_unique<ft_policy>();
    p->policy = std::make_shared<const ftutor::Policy>(std::move(result.policy));
    *out = p.release();
  });
}

ft_status ft_policy_load(const char* path, ft_policy_t** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    auto p = std::make_unique<ft_policy>();
    p->policy = std::make_shared<const ftutor::Policy>(ftutor::load_policy(path));
    *out = p.release();
  });
}

ft_status ft_policy_save(const ft_policy_t* policy, const char* path) {
  return guard([&] {
    require(policy, "policy");
    require(path, "path");
    ftutor::save_policy(*policy->policy, path);
  });
}

ft_status ft_policy_info(const ft_policy_t* policy, ft_policy_info_t* out) {
  return guard([&] {
    require(policy, "policy");
    require(out, "out");
    const auto& p = *policy->policy;
    *out = {};
    out->seed = p.meta.seed;
    out->epochs = p.meta.epochs;
    out->best_epoch = p.meta.best_epoch;
    out->train_loss = p.meta.train_loss;
    out->val_loss = p.meta.val_loss;
    out->best_eval = p.meta.best_eval;
    for (const auto& layer : p.layers) out->parameters += layer.weights.size() + layer.biases.size();
  });
}

ft_status ft_policy_forward(const ft_policy_t* policy, const double* features, double* action) {
  return guard([&] {
    require(policy, "policy");
    require(features, "features");
    require(action, "action");
    ftutor::FeatureVector f;
    std::copy(features, features + f.size(), f.begin());
    const ftutor::ControlInput a = ftutor::forward(*policy->policy, f);
    action[0] = a.pitch();
    action[1] = a.roll();
  });
}

void ft_policy_free(ft_policy_t* policy) { delete policy; }

ft_status ft_evaluate(const ft_config_t* config, const ft_policy_t* policy, int trials,
                      uint64_t seed, ft_eval_report_t** out) {
  return guard([&] {
    require(config, "config");
    require(policy, "policy");
    require(out, "out");
    auto r = std::make_unique<ft_eval_report>();
    r->report = ftutor::evaluate_deployment(*policy->policy, config->config, trials, seed);
    *out = r.release();
  });
}

ft_status ft_eval_report_info(const ft_eval_report_t* report, ft_eval_info_t* out) {
  return guard([&] {
    require(report, "report");
    require(out, "out");
    const auto& r = report->report;
    *out = {};
    out->trials = r.agent.n_trials;
    out->seed = r.agent.seed;
    out->avg_heading_error = r.agent.avg_heading_error;
    out->zero_policy_heading_error = r.zero_policy.avg_heading_error;
    out->action_distance = r.action_distance;
    out->heading_gate = r.heading_gate;
    out->action_gate = r.action_gate;
    out->passed = r.passed() ? 1 : 0;
  });
}

ft_status ft_eval_report_text(const ft_eval_report_t* report, char** out) {
  return guard([&] {
    require(report, "report");
    require(out, "out");
    *out = dup_string(report->report.to_text());
  });
}

ft_status ft_eval_report_series(const ft_eval_report_t* report, char** out) {
  return guard([&] {
    require(report, "report");
    require(out, "out");
    const auto& r = report->report;
    const double dt = r.agent.heading_error.empty() || r.agent.heading_error[0].empty()
                          ? 0.05
                          : r.duration / static_cast<double>(r.agent.heading_error[0].size());
    *out = dup_string(r.agent.to_table(dt));
  });
}

void ft_eval_report_free(ft_eval_report_t* report) { delete report; }

ft_status ft_synth_student(const ft_config_t* config, const char* flaw, double severity,
                           double duration, uint64_t seed, const char* out_path) {
  return guard([&] {
    require(config, "config");
    require(flaw, "flaw");
    require(out_path, "out_path");
    const auto& c = config->config;
    c.sim.validate();
    if (!(duration > 0.0))
      throw ftutor::Error(ftutor::ErrorCode::InvalidArgument, "duration must be > 0");
    const ftutor::TaskSpec task =
        ftutor::sample_trial_task(seed, ftutor::SeedStream::Student, 0, c.sim, duration);
    ftutor::PolicyFn fn;
    if (std::string(flaw) == "expert") {
      ftutor::ExpertGains gains = c.expert;
      gains.action_noise_std = 0.0;
      fn = ftutor::expert_fn(task, gains, c.sim);
    } else {
      if (!(severity >= 0.0 && severity <= 1.0))
        throw ftutor::Error(ftutor::ErrorCode::InvalidArgument, "severity must be in [0, 1]");
      fn = ftutor::synthesize_student(c.expert, ftutor::parse_flaw(flaw), severity, task, c.sim,
                                      seed);
    }
    ftutor::save_trajectory(ftutor::rollout(fn, task, duration, c.sim), out_path);
  });
}

ft_status ft_session_from_trajectory(const ft_config_t* config, const ft_policy_t* policy,
                                     const char* trajectory_path, const char* log_path,
                                     ft_session_info_t* out) {
  return guard([&] {
    require(config, "config");
    require(policy, "policy");
    require(trajectory_path, "trajectory_path");
    const auto& c = config->config;
    ftutor::SessionConfig sc;
    sc.mode = ftutor::SessionMode::ReplayTrajectory;
    sc.tick_hz = c.session.tick_hz;
    sc.thresholds = c.tutor;
    sc.policy_path = c.session.policy_path;
    sc.realtime = c.session.realtime;
    sc.telemetry_timeout = c.session.telemetry_timeout;
    sc.replay_path = trajectory_path;
    if (log_path != nullptr) sc.log_path = log_path;
    NullSink sink;
    const ftutor::SessionLog log = ftutor::run_trajectory_session(
        sc, policy->policy, ftutor::load_trajectory(trajectory_path), sink);
    if (out != nullptr) {
      *out = {};
      out->ticks = log.summary.ticks;
      out->pitch_flags = log.summary.pitch_flags;
      out->roll_flags = log.summary.roll_flags;
      out->final_heading_error = log.summary.final_heading_error;
      out->mean_abs_altitude_error = log.summary.mean_abs_altitude_error;
      out->mean_abs_airspeed_error = log.summary.mean_abs_airspeed_error;
    }
  });
}

ft_status ft_replay_log(const ft_policy_t* policy, const char* log_path, int paced,
                        ft_replay_info_t* out, char** divergences) {
  return guard([&] {
    require(log_path, "log_path");
    const ftutor::SessionLog log = ftutor::load_session_log(log_path);
    std::shared_ptr<const ftutor::Policy> p;
    if (policy != nullptr) {
      p = policy->policy;
    } else {
      if (log.config.policy_path.empty())
        throw ftutor::Error(ftutor::ErrorCode::InvalidArgument,
                            "session log records no policy path; pass one explicitly");
      p = std::make_shared<const ftutor::Policy>(ftutor::load_policy(log.config.policy_path));
    }
    const ftutor::ReplayResult r = ftutor::replay_session(log, p, paced != 0);
    if (out != nullptr) {
      *out = {};
      out->ticks = r.ticks;
      out->divergences = r.divergences.size();
      out->pitch_flags = r.summary.pitch_flags;
      out->roll_flags = r.summary.roll_flags;
    }
    if (divergences != nullptr) {
      std::string text;
      for (const auto& d : r.divergences) text += d + "\n";
      *divergences = dup_string(text);
    }
  });
}

ft_status ft_server_create(const ft_config_t* config, const ft_policy_t* policy,
                           ft_server_t** out) {
  return guard([&] {
    require(config, "config");
    require(policy, "policy");
    require(out, "out");
    auto s = std::make_unique<ft_server>();
    s->server = std::make_unique<ftutor::Server>(config->config, policy->policy);
    *out = s.release();
  });
}

ft_status ft_server_start(ft_server_t* server) {
  return guard([&] {
    require(server, "server");
    server->server->start();
  });
}

ft_status ft_server_ports(const ft_server_t* server, int* tcp_port, int* udp_port) {
  return guard([&] {
    require(server, "server");
    if (tcp_port != nullptr) *tcp_port = server->server->port();
    if (udp_port != nullptr) *udp_port = server->server->telemetry_port();
  });
}

ft_status ft_server_stop(ft_server_t* server) {
  return guard([&] {
    require(server, "server");
    server->server->stop();
  });
}

void ft_server_free(ft_server_t* server) { delete server; }

}  // extern "C"
