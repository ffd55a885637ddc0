#ifndef BATS_BATS_H
#define BATS_BATS_H

#include <stddef.h>
#include <stdint.h>

#if defined(__GNUC__)
#define BATS_API __attribute__((visibility("default")))
#else
#define BATS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bats_status {
  BATS_OK = 0,
  BATS_ERR_INVALID_ARGUMENT = 1,
  BATS_ERR_CONTRACT = 2,
  BATS_ERR_INSUFFICIENT_DATA = 3,
  BATS_ERR_SINGULAR = 4,
  BATS_ERR_DIVISION_BY_ZERO = 5,
  BATS_ERR_OVERFLOW = 6,
  BATS_ERR_CONFIG = 7,
  BATS_ERR_IO = 8,
  BATS_ERR_UNSUPPORTED = 9,
  BATS_ERR_INTERNAL = 10
} bats_status;

typedef enum bats_bundling {
  BATS_BUNDLING_NONE = 0,
  BATS_BUNDLING_SELF = 1,
  BATS_BUNDLING_ALL = 2
} bats_bundling;

typedef struct bats_config bats_config;
typedef struct bats_run bats_run;

typedef struct bats_accuracy {
  uint64_t n;  /* translated measurements behind the statistics */
  double mae_s;
  double mse_s2;
  double p50_s;
  double p90_s;
  double p99_s;
  double max_s;
  uint64_t bootstrap;
  uint64_t untranslatable;
  uint64_t not_estimated;
  uint64_t undelivered;
} bats_accuracy;

typedef struct bats_node_info {
  int32_t id;
  int32_t level;
  int32_t parent; /* -1 for the head */
  uint64_t n_tx;
  uint64_t n_rx;
  uint64_t measurements;
  double avg_power_w; /* 0 for the head, or when no energy model applies */
} bats_node_info;

BATS_API const char* bats_version(void);
BATS_API const char* bats_status_string(bats_status status);
/* Message of the last failed call on this thread; empty after success. */
BATS_API const char* bats_last_error(void);

/* Configuration. */
BATS_API bats_status bats_config_parse(const char* text, bats_config** out);
BATS_API bats_status bats_config_load(const char* path, bats_config** out);
BATS_API bats_status bats_config_set_seed(bats_config* cfg, uint64_t seed);
/* window 0 selects every sample. */
BATS_API bats_status bats_config_set_window(bats_config* cfg, uint32_t window);
BATS_API bats_status bats_config_hash(const bats_config* cfg, uint64_t* out);
BATS_API void bats_config_free(bats_config* cfg);

/* Single experiment. */
BATS_API bats_status bats_run_execute(const bats_config* cfg, bats_run** out);
/* Re-fits the head-side estimator on a stored trace CSV; window 0 = all. */
BATS_API bats_status bats_replay_load(const char* trace_path, const char* estimator,
                                      uint32_t window, bats_run** out);
BATS_API bats_status bats_run_node_count(const bats_run* run, size_t* out);
BATS_API bats_status bats_run_node_info(const bats_run* run, size_t index,
                                        bats_node_info* out);
/* node -1 gives the statistics over all sensors. */
BATS_API bats_status bats_run_accuracy(const bats_run* run, int32_t node,
                                       bats_accuracy* out);
/* Paths may be "-" for standard output. */
BATS_API bats_status bats_run_write_csv(const bats_run* run, const char* path);
BATS_API bats_status bats_run_write_summary(const bats_run* run, const char* path);
BATS_API bats_status bats_run_write_events(const bats_run* run, const char* path);
/* Copies the trace CSV into buf (NUL-terminated when it fits); *needed gets
   the full length including the terminator. buf may be NULL with cap 0. */
BATS_API bats_status bats_run_csv(const bats_run* run, char* buf, size_t cap,
                                  size_t* needed);
BATS_API void bats_run_free(bats_run* run);

/* Grid sweep over the config's sweep section; writes the result table. */
BATS_API bats_status bats_sweep_execute(const bats_config* cfg, const char* csv_path);

/* Closed-form message counts. */
BATS_API bats_status bats_count_conventional(int32_t hops, uint64_t measurements,
                                             uint64_t* out);
BATS_API bats_status bats_count_proposed(int32_t hops, bats_bundling mode, uint64_t* out);
BATS_API bats_status bats_scheme_counts(const char* scheme, double si_s, double duration_s,
                                        uint64_t measurements, uint64_t* n_tx,
                                        uint64_t* n_rx);

#ifdef __cplusplus
}
#endif

#endif
