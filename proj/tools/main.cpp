// flighttutor command-line front end; talks to the library only through the
// C API.
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "flighttutor/flighttutor.h"

namespace {

enum Exit {
  kOk = 0,
  kUsage = 1,
  kIo = 2,
  kData = 3,
  kGate = 4,
  kDivergence = 5,
  kRuntime = 6,
};

struct Failure {
  int exit_code;
  std::string message;
};

int exit_for(ft_status s) {
  switch (s) {
    case FT_OK: return kOk;
    case FT_ERR_INVALID_ARGUMENT: return kUsage;
    case FT_ERR_IO: return kIo;
    case FT_ERR_SCHEMA:
    case FT_ERR_PARSE: return kData;
    default: return kRuntime;
  }
}

void check(ft_status s) {
  if (s != FT_OK) throw Failure{exit_for(s), ft_last_error()};
}

struct StringDeleter {
  void operator()(char* s) const { ft_string_free(s); }
};
using String = std::unique_ptr<char, StringDeleter>;

template <typename T, void (*Free)(T*)>
struct HandleDeleter {
  void operator()(T* p) const { Free(p); }
};
using ConfigPtr = std::unique_ptr<ft_config_t, HandleDeleter<ft_config_t, ft_config_free>>;
using DatasetPtr = std::unique_ptr<ft_dataset_t, HandleDeleter<ft_dataset_t, ft_dataset_free>>;
using PolicyPtr = std::unique_ptr<ft_policy_t, HandleDeleter<ft_policy_t, ft_policy_free>>;
using ReportPtr =
    std::unique_ptr<ft_eval_report_t, HandleDeleter<ft_eval_report_t, ft_eval_report_free>>;
using ServerPtr = std::unique_ptr<ft_server_t, HandleDeleter<ft_server_t, ft_server_free>>;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--config", common.config_path, "config file (INI-style, section.key)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", common.overrides, "override one key: section.key=value")
      ->take_all();
}

ConfigPtr resolve(const Common& common, const std::vector<std::pair<std::string, std::string>>& extra) {
  ft_config_t* raw = nullptr;
  check(ft_config_new(&raw));
  ConfigPtr cfg(raw);
  if (!common.config_path.empty()) check(ft_config_load_file(cfg.get(), common.config_path.c_str()));
  for (const auto& kv : common.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Failure{kUsage, "--set expects section.key=value, got '" + kv + "'"};
    check(ft_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
  }
  for (const auto& [k, v] : extra) check(ft_config_set(cfg.get(), k.c_str(), v.c_str()));
  check(ft_config_validate(cfg.get()));
  char* dump = nullptr;
  check(ft_config_dump(cfg.get(), &dump));
  String owned(dump);
  std::cerr << "# resolved configuration\n" << dump << std::flush;
  return cfg;
}

std::string config_value(const ft_config_t* cfg, const char* key) {
  char* out = nullptr;
  check(ft_config_get(cfg, key, &out));
  String owned(out);
  return out;
}

PolicyPtr load_policy(const std::string& path) {
  ft_policy_t* raw = nullptr;
  check(ft_policy_load(path.c_str(), &raw));
  return PolicyPtr(raw);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Failure{kIo, "cannot open " + path + " for writing"};
  out << text;
  if (!out) throw Failure{kIo, "write failed: " + path};
}

const CLI::Validator kPositive(
    [](std::string& s) -> std::string {
      try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size() && v > 0.0) return {};
      } catch (const std::exception&) {
      }
      return "must be a positive number, got '" + s + "'";
    },
    "POSITIVE");

volatile std::sig_atomic_t g_interrupted = 0;
extern "C" void on_signal(int) { g_interrupted = 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flighttutor: behavioral-cloning flight tutor"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ft_version()));

  Common common;

  auto* gen = app.add_subcommand("gen-demos", "record expert demonstrations");
  int gen_trials = FT_DEFAULT_DEMO_TRIALS;
  double gen_duration = FT_DEFAULT_DEMO_DURATION;
  std::uint64_t gen_seed = FT_DEFAULT_SEED;
  std::string gen_out;
  gen->add_option("--trials", gen_trials, "number of trials")->check(kPositive);
  gen->add_option("--duration", gen_duration, "seconds per trial")->check(kPositive);
  gen->add_option("--seed", gen_seed, "task and noise seed");
  gen->add_option("--out", gen_out, "dataset file")->required();
  add_common(gen, common);

  auto* tr = app.add_subcommand("train", "behavioral cloning on a dataset");
  std::string tr_data, tr_out, tr_curve;
  std::uint64_t tr_seed = 0;
  tr->add_option("--data", tr_data, "dataset file")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", tr_out, "policy file")->required();
  auto* tr_seed_opt = tr->add_option("--seed", tr_seed, "training seed (overrides train.seed)");
  tr->add_option("--curve", tr_curve, "training curve table (default: <out>.curve.tsv)");
  add_common(tr, common);

  auto* ev = app.add_subcommand("eval", "deployment evaluation on unseen trials");
  std::string ev_policy, ev_out, ev_series;
  int ev_trials = 0;
  std::uint64_t ev_seed = FT_DEFAULT_SEED;
  ev->add_option("--policy", ev_policy, "policy file")->required()->check(CLI::ExistingFile);
  auto* ev_trials_opt =
      ev->add_option("--trials", ev_trials, "evaluation trials (default eval.trials)")
          ->check(kPositive);
  ev->add_option("--seed", ev_seed, "evaluation seed");
  ev->add_option("--out", ev_out, "write the report here as well");
  ev->add_option("--series", ev_series, "per-tick heading error table");
  add_common(ev, common);

  auto* sv = app.add_subcommand("serve", "run the session server until interrupted");
  std::string sv_policy;
  sv->add_option("--policy", sv_policy, "policy file (default session.policy)");
  add_common(sv, common);

  auto* rp = app.add_subcommand("replay", "re-run the tutor over a session log");
  std::string rp_log, rp_policy;
  bool rp_fast = false;
  rp->add_option("--log", rp_log, "session log")->required()->check(CLI::ExistingFile);
  rp->add_option("--policy", rp_policy, "policy file (default: the one named in the log)");
  rp->add_flag("--fast", rp_fast, "run at maximum speed instead of the logged tick rate");

  auto* ss = app.add_subcommand("synth-student", "fly a synthesized flawed student");
  std::string ss_flaw, ss_out;
  double ss_severity = 1.0, ss_duration = 30.0;
  std::uint64_t ss_seed = 1;
  ss->add_option("--flaw", ss_flaw, "overshooter, pitch-neglect or expert")
      ->required()
      ->check(CLI::IsMember({"overshooter", "pitch-neglect", "expert"}));
  ss->add_option("--severity", ss_severity, "in (0, 1]; 1 = fully flawed")
      ->check(CLI::Range(0.0, 1.0));
  ss->add_option("--duration", ss_duration, "seconds")->check(kPositive);
  ss->add_option("--seed", ss_seed, "task and flaw seed");
  ss->add_option("--out", ss_out, "trajectory file")->required();
  add_common(ss, common);

  auto* sh = app.add_subcommand("shadow", "tutor a recorded trajectory and log the session");
  std::string sh_policy, sh_traj, sh_log;
  bool sh_fast = false;
  sh->add_option("--policy", sh_policy, "policy file")->required()->check(CLI::ExistingFile);
  sh->add_option("--trajectory", sh_traj, "trajectory file")->required()->check(CLI::ExistingFile);
  sh->add_option("--log", sh_log, "session log to write");
  sh->add_flag("--fast", sh_fast, "run at maximum speed instead of the tick rate");
  add_common(sh, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      auto cfg = resolve(common, {});
      ft_dataset_t* raw = nullptr;
      check(ft_demos_generate(cfg.get(), gen_trials, gen_duration, gen_seed, &raw));
      DatasetPtr ds(raw);
      check(ft_dataset_save(ds.get(), gen_out.c_str()));
      ft_dataset_info_t info;
      check(ft_dataset_info(ds.get(), &info));
      std::printf("samples\t%zu\ntrials\t%zu\nseconds\t%.3f\ngoal_offset\t[%.3f, %.3f]\n",
                  info.samples, info.trials, info.total_seconds, info.min_goal_offset,
                  info.max_goal_offset);
    } else if (*tr) {
      std::vector<std::pair<std::string, std::string>> extra;
      if (*tr_seed_opt) extra.emplace_back("train.seed", std::to_string(tr_seed));
      auto cfg = resolve(common, extra);
      ft_dataset_t* raw = nullptr;
      check(ft_dataset_load(tr_data.c_str(), &raw));
      DatasetPtr ds(raw);
      if (tr_curve.empty()) tr_curve = tr_out + ".curve.tsv";
      ft_policy_t* praw = nullptr;
      check(ft_train(cfg.get(), ds.get(), tr_curve.c_str(), &praw));
      PolicyPtr policy(praw);
      check(ft_policy_save(policy.get(), tr_out.c_str()));
      ft_policy_info_t info;
      check(ft_policy_info(policy.get(), &info));
      std::printf("epochs\t%d\nbest_epoch\t%d\ntrain_loss\t%.6g\nval_loss\t%.6g\n"
                  "train_heading_error\t%.6f\ncurve\t%s\n",
                  info.epochs, info.best_epoch, info.train_loss, info.val_loss, info.best_eval,
                  tr_curve.c_str());
    } else if (*ev) {
      auto cfg = resolve(common, {});
      if (!*ev_trials_opt) ev_trials = std::stoi(config_value(cfg.get(), "eval.trials"));
      auto policy = load_policy(ev_policy);
      ft_eval_report_t* raw = nullptr;
      check(ft_evaluate(cfg.get(), policy.get(), ev_trials, ev_seed, &raw));
      ReportPtr report(raw);
      char* text = nullptr;
      check(ft_eval_report_text(report.get(), &text));
      String owned(text);
      std::fputs(text, stdout);
      if (!ev_out.empty()) write_file(ev_out, text);
      if (!ev_series.empty()) {
        char* series = nullptr;
        check(ft_eval_report_series(report.get(), &series));
        String s(series);
        write_file(ev_series, series);
      }
      ft_eval_info_t info;
      check(ft_eval_report_info(report.get(), &info));
      if (!info.passed) {
        std::fprintf(stderr, "deployment gate failed\n");
        return kGate;
      }
    } else if (*sv) {
      std::vector<std::pair<std::string, std::string>> extra;
      if (!sv_policy.empty()) extra.emplace_back("session.policy", sv_policy);
      auto cfg = resolve(common, extra);
      if (sv_policy.empty()) sv_policy = config_value(cfg.get(), "session.policy");
      if (sv_policy.empty()) throw Failure{kUsage, "serve needs --policy or session.policy"};
      auto policy = load_policy(sv_policy);
      ft_server_t* raw = nullptr;
      check(ft_server_create(cfg.get(), policy.get(), &raw));
      ServerPtr server(raw);
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      check(ft_server_start(server.get()));
      int tcp = 0, udp = 0;
      check(ft_server_ports(server.get(), &tcp, &udp));
      std::printf("listening\t%s:%d\n", config_value(cfg.get(), "session.host").c_str(), tcp);
      if (udp != 0) std::printf("telemetry\tudp %d\n", udp);
      std::fflush(stdout);
      while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      check(ft_server_stop(server.get()));
    } else if (*rp) {
      PolicyPtr policy;
      if (!rp_policy.empty()) policy = load_policy(rp_policy);
      ft_replay_info_t info;
      char* div = nullptr;
      check(ft_replay_log(policy.get(), rp_log.c_str(), rp_fast ? 0 : 1, &info, &div));
      String owned(div);
      std::fputs(div, stdout);
      std::printf("ticks\t%llu\npitch_flags\t%llu\nroll_flags\t%llu\ndivergences\t%llu\n",
                  static_cast<unsigned long long>(info.ticks),
                  static_cast<unsigned long long>(info.pitch_flags),
                  static_cast<unsigned long long>(info.roll_flags),
                  static_cast<unsigned long long>(info.divergences));
      if (info.divergences > 0) return kDivergence;
    } else if (*ss) {
      auto cfg = resolve(common, {});
      check(ft_synth_student(cfg.get(), ss_flaw.c_str(), ss_severity, ss_duration, ss_seed,
                             ss_out.c_str()));
      std::printf("trajectory\t%s\n", ss_out.c_str());
    } else if (*sh) {
      std::vector<std::pair<std::string, std::string>> forced = {{"session.policy", sh_policy}};
      if (sh_fast) forced.emplace_back("session.realtime", "false");
      auto cfg = resolve(common, forced);
      auto policy = load_policy(sh_policy);
      ft_session_info_t info;
      check(ft_session_from_trajectory(cfg.get(), policy.get(), sh_traj.c_str(),
                                       sh_log.empty() ? nullptr : sh_log.c_str(), &info));
      std::printf("ticks\t%llu\npitch_flags\t%llu\nroll_flags\t%llu\nfinal_heading_error\t%.6f\n",
                  static_cast<unsigned long long>(info.ticks),
                  static_cast<unsigned long long>(info.pitch_flags),
                  static_cast<unsigned long long>(info.roll_flags), info.final_heading_error);
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return f.exit_code;
  }
  return kOk;
}
