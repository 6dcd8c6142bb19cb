/* flighttutor C API.
 *
 * Every function returns an ft_status; on failure ft_last_error() describes
 * the problem for the calling thread. Strings returned through char** are
 * heap-allocated and released with ft_string_free. Handles are opaque and
 * released with their matching *_free function, which accepts NULL.
 */
#ifndef FLIGHTTUTOR_H
#define FLIGHTTUTOR_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define FT_API __attribute__((visibility("default")))
#else
#define FT_API
#endif

/* gen-demos and eval defaults: 25 trials of 30 s, seed 1. */
#define FT_DEFAULT_DEMO_TRIALS 25
#define FT_DEFAULT_DEMO_DURATION 30.0
#define FT_DEFAULT_SEED 1

typedef enum ft_status {
  FT_OK = 0,
  FT_ERR_INVALID_ARGUMENT = 1,
  FT_ERR_IO = 2,
  FT_ERR_SCHEMA = 3,
  FT_ERR_PARSE = 4,
  FT_ERR_DIVERGED = 5,
  FT_ERR_NETWORK = 6,
  FT_ERR_TIMEOUT = 7,
  FT_ERR_INTERNAL = 8
} ft_status;

typedef struct ft_config ft_config_t;
typedef struct ft_dataset ft_dataset_t;
typedef struct ft_policy ft_policy_t;
typedef struct ft_eval_report ft_eval_report_t;
typedef struct ft_server ft_server_t;

typedef struct ft_dataset_info {
  size_t samples;
  size_t trials;
  double total_seconds;
  double min_goal_offset; /* deg, target minus initial heading */
  double max_goal_offset;
} ft_dataset_info_t;

typedef struct ft_policy_info {
  uint64_t seed;
  int epochs;
  int best_epoch;
  double train_loss; /* per-sample mean at the best epoch */
  double val_loss;
  double best_eval;  /* training-time average heading error, deg */
  size_t parameters;
} ft_policy_info_t;

typedef struct ft_eval_info {
  int trials;
  uint64_t seed;
  double avg_heading_error;
  double zero_policy_heading_error;
  double action_distance;
  double heading_gate;
  double action_gate;
  int passed;
} ft_eval_info_t;

typedef struct ft_session_info {
  uint64_t ticks;
  uint64_t pitch_flags;
  uint64_t roll_flags;
  double final_heading_error;
  double mean_abs_altitude_error;
  double mean_abs_airspeed_error;
} ft_session_info_t;

typedef struct ft_replay_info {
  uint64_t ticks;
  uint64_t divergences;
  uint64_t pitch_flags;
  uint64_t roll_flags;
} ft_replay_info_t;

FT_API const char* ft_version(void);
FT_API const char* ft_status_name(ft_status status);
/* Message of the last failed call on this thread; "" if none. */
FT_API const char* ft_last_error(void);
FT_API void ft_string_free(char* s);

/* Configuration: defaults, then file, then section.key overrides. */
FT_API ft_status ft_config_new(ft_config_t** out);
FT_API void ft_config_free(ft_config_t* config);
FT_API ft_status ft_config_load_file(ft_config_t* config, const char* path);
FT_API ft_status ft_config_set(ft_config_t* config, const char* key, const char* value);
FT_API ft_status ft_config_get(const ft_config_t* config, const char* key, char** out);
FT_API ft_status ft_config_dump(const ft_config_t* config, char** out);
FT_API ft_status ft_config_validate(const ft_config_t* config);

/* Expert demonstrations. */
FT_API ft_status ft_demos_generate(const ft_config_t* config, int trials, double duration,
                                   uint64_t seed, ft_dataset_t** out);
FT_API ft_status ft_dataset_load(const char* path, ft_dataset_t** out);
FT_API ft_status ft_dataset_save(const ft_dataset_t* dataset, const char* path);
FT_API ft_status ft_dataset_info(const ft_dataset_t* dataset, ft_dataset_info_t* out);
FT_API void ft_dataset_free(ft_dataset_t* dataset);

/* Behavioral cloning. curve_path may be NULL; otherwise the training curve
 * table is written there. */
FT_API ft_status ft_train(const ft_config_t* config, const ft_dataset_t* dataset,
                          const char* curve_path, ft_policy_t** out);
FT_API ft_status ft_policy_load(const char* path, ft_policy_t** out);
FT_API ft_status ft_policy_save(const ft_policy_t* policy, const char* path);
FT_API ft_status ft_policy_info(const ft_policy_t* policy, ft_policy_info_t* out);
/* features[8] -> action[2] = (yoke_pitch, yoke_roll). */
FT_API ft_status ft_policy_forward(const ft_policy_t* policy, const double* features,
                                   double* action);
FT_API void ft_policy_free(ft_policy_t* policy);

/* Deployment evaluation on unseen randomized trials. */
FT_API ft_status ft_evaluate(const ft_config_t* config, const ft_policy_t* policy, int trials,
                             uint64_t seed, ft_eval_report_t** out);
FT_API ft_status ft_eval_report_info(const ft_eval_report_t* report, ft_eval_info_t* out);
FT_API ft_status ft_eval_report_text(const ft_eval_report_t* report, char** out);
/* Per-tick |heading error| series, tab-separated. */
FT_API ft_status ft_eval_report_series(const ft_eval_report_t* report, char** out);
FT_API void ft_eval_report_free(ft_eval_report_t* report);

/* Synthesized student flight written as a trajectory file. flaw is
 * "overshooter", "pitch-neglect" or "expert" (noise-free expert). */
FT_API ft_status ft_synth_student(const ft_config_t* config, const char* flaw, double severity,
                                  double duration, uint64_t seed, const char* out_path);

/* Tutor session driven by a trajectory file (max speed unless
 * session.realtime). log_path may be NULL. */
FT_API ft_status ft_session_from_trajectory(const ft_config_t* config, const ft_policy_t* policy,
                                            const char* trajectory_path, const char* log_path,
                                            ft_session_info_t* out);

/* Re-runs the tutor over a session log. policy may be NULL, in which case
 * the policy path recorded in the log is loaded. divergences (may be NULL)
 * receives one line per mismatching tick. */
FT_API ft_status ft_replay_log(const ft_policy_t* policy, const char* log_path, int paced,
                               ft_replay_info_t* out, char** divergences);

/* Session server. */
FT_API ft_status ft_server_create(const ft_config_t* config, const ft_policy_t* policy,
                                  ft_server_t** out);
FT_API ft_status ft_server_start(ft_server_t* server);
FT_API ft_status ft_server_ports(const ft_server_t* server, int* tcp_port, int* udp_port);
FT_API ft_status ft_server_stop(ft_server_t* server);
FT_API void ft_server_free(ft_server_t* server);

#ifdef __cplusplus
}
#endif

#endif
