#ifndef WSSIM_H
#define WSSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum WssimStatus {
  WSSIM_STATUS_OK = 0,
  WSSIM_STATUS_NULL_POINTER = 1,
  WSSIM_STATUS_INVALID_UTF8 = 2,
  WSSIM_STATUS_INVALID_CONFIG = 3,
  WSSIM_STATUS_SIMULATION = 4,
  WSSIM_STATUS_ANALYSIS = 5,
  WSSIM_STATUS_OUT_OF_RANGE = 6,
  WSSIM_STATUS_PANIC = 7,
} WssimStatus;

// The outcome of one replication.
typedef struct WssimReport WssimReport;

// A parsed and validated scenario.
typedef struct WssimScenario WssimScenario;

// Counters of one run.
typedef struct WssimStats {
  uint64_t makespan;
  uint64_t steal_requests_sent;
  uint64_t steal_requests_total;
  uint64_t steal_success;
  uint64_t steal_fail;
  uint64_t total_work_executed;
  uint64_t merge_work_executed;
  uint64_t tasks_created;
  uint64_t tasks_completed;
  uint64_t t_startup_end;
  uint64_t t_plateau_end;
} WssimStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next wssim call on the same thread.
const char *wssim_last_error_message(void);

// Parses a JSON scenario. On success `*out` owns a new handle.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum WssimStatus wssim_scenario_from_json(const char *json, struct WssimScenario **out);

// Number of replications of a scenario; 0 for a null handle.
//
// # Safety
// `scenario` must be null or a live handle.
size_t wssim_scenario_replications(const struct WssimScenario *scenario);

// Releases a scenario. Null is ignored.
//
// # Safety
// `scenario` must be null or a handle not yet freed.
void wssim_scenario_free(struct WssimScenario *scenario);

// Runs replication `replication` of a scenario. On success `*out` owns
// a new report.
//
// # Safety
// `scenario` must be a live handle and `out` a valid pointer.
enum WssimStatus wssim_run(const struct WssimScenario *scenario,
                           size_t replication,
                           struct WssimReport **out);

// Makespan of a run; 0 for a null handle.
//
// # Safety
// `report` must be null or a live handle.
uint64_t wssim_report_makespan(const struct WssimReport *report);

// Copies the counters of a run into `*out`.
//
// # Safety
// `report` must be a live handle and `out` a valid pointer.
enum WssimStatus wssim_report_stats(const struct WssimReport *report, struct WssimStats *out);

// Paje trace of a run; free `*out` with `wssim_string_free`.
//
// # Safety
// `report` must be a live handle and `out` a valid pointer.
enum WssimStatus wssim_report_paje(const struct WssimReport *report, char **out);

// Executed task graph of a run as JSON; free `*out` with `wssim_string_free`.
//
// # Safety
// `report` must be a live handle and `out` a valid pointer.
enum WssimStatus wssim_report_json_dag(const struct WssimReport *report, char **out);

// Releases a report. Null is ignored.
//
// # Safety
// `report` must be null or a handle not yet freed.
void wssim_report_free(struct WssimReport *report);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `text` must be null or a string from this library not yet freed.
void wssim_string_free(char *text);

// Ratio of the theoretical overhead (constant `gamma`) to the simulated
// overhead `makespan - W/p`.
//
// # Safety
// `out` must be a valid pointer.
enum WssimStatus wssim_overhead_ratio(double makespan,
                                      uint64_t work,
                                      size_t p,
                                      uint64_t latency,
                                      double gamma,
                                      double *out);

// Latency at which the predicted makespan reaches 1.1 W/p for overhead
// constant `c`.
//
// # Safety
// `out` must be a valid pointer.
enum WssimStatus wssim_limit_latency_theoretical(uint64_t work, size_t p, double c, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WSSIM_H */
