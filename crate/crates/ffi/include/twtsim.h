#ifndef TWTSIM_H
#define TWTSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TwtsimStatus {
  TWTSIM_STATUS_OK = 0,
  TWTSIM_STATUS_NULL_POINTER = 1,
  TWTSIM_STATUS_INVALID_UTF8 = 2,
  TWTSIM_STATUS_CONFIG_PARSE = 3,
  TWTSIM_STATUS_CONFIG_INVALID = 4,
  TWTSIM_STATUS_SIMULATION = 5,
  TWTSIM_STATUS_CODEC = 6,
  TWTSIM_STATUS_BUFFER_TOO_SMALL = 7,
  TWTSIM_STATUS_INVALID_ARGUMENT = 8,
  TWTSIM_STATUS_PANIC = 9,
} TwtsimStatus;

// Management-overhead agreement mode.
typedef enum TwtsimOverheadMode {
  TWTSIM_OVERHEAD_MODE_INDIVIDUAL_PERIODIC = 0,
  TWTSIM_OVERHEAD_MODE_INDIVIDUAL_APERIODIC = 1,
  TWTSIM_OVERHEAD_MODE_BROADCAST_PERIODIC = 2,
  TWTSIM_OVERHEAD_MODE_BROADCAST_APERIODIC = 3,
} TwtsimOverheadMode;

// Finished run handle.
typedef struct TwtsimReport TwtsimReport;

// Scenario configuration handle.
typedef struct TwtsimScenario TwtsimScenario;

// Headline figures of a run. `mean_delay_us` is NaN when nothing was
// delivered after the warm-up.
typedef struct TwtsimSummary {
  double mean_delay_us;
  double mean_queue;
  double arrival_rate_pps;
  double throughput_bps;
  double idle_fraction;
  double collision_fraction;
  uint64_t delivered;
  uint64_t dropped;
  uint64_t events;
} TwtsimSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *twtsim_last_error(void);

// Static name of a status code.
const char *twtsim_status_str(enum TwtsimStatus status);

// Creates a scenario from a named preset.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a writable pointer.
enum TwtsimStatus twtsim_scenario_preset(const char *name, struct TwtsimScenario **out);

// Parses a TOML scenario; missing keys take preset values.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` a writable pointer.
enum TwtsimStatus twtsim_scenario_from_toml(const char *toml, struct TwtsimScenario **out);

// # Safety
// `scenario` must come from a `twtsim_scenario_*` constructor or be NULL.
void twtsim_scenario_free(struct TwtsimScenario *scenario);

// # Safety
// `scenario` must be a live scenario handle.
enum TwtsimStatus twtsim_scenario_set_seed(struct TwtsimScenario *scenario, uint64_t seed);

// Sets the simulated duration; rejected unless positive and finite.
//
// # Safety
// `scenario` must be a live scenario handle.
enum TwtsimStatus twtsim_scenario_set_duration(struct TwtsimScenario *scenario, double seconds);

// Sets the per-station offered load in Mbit/s.
//
// # Safety
// `scenario` must be a live scenario handle.
enum TwtsimStatus twtsim_scenario_set_load(struct TwtsimScenario *scenario, double mbps);

// Serializes the scenario as TOML. Free the result with
// [`twtsim_string_free`].
//
// # Safety
// `scenario` must be a live scenario handle.
char *twtsim_scenario_to_toml(const struct TwtsimScenario *scenario);

// Runs one simulation.
//
// # Safety
// `scenario` must be a live scenario handle and `out` a writable pointer.
enum TwtsimStatus twtsim_run(const struct TwtsimScenario *scenario, struct TwtsimReport **out);

// # Safety
// `report` must come from [`twtsim_run`] or be NULL.
void twtsim_report_free(struct TwtsimReport *report);

// # Safety
// `report` must be a live report handle and `out` a writable pointer.
enum TwtsimStatus twtsim_report_summary(const struct TwtsimReport *report,
                                        struct TwtsimSummary *out);

// Full report as pretty-printed JSON. Free with [`twtsim_string_free`].
//
// # Safety
// `report` must be a live report handle.
char *twtsim_report_json(const struct TwtsimReport *report);

// # Safety
// `s` must come from this library or be NULL.
void twtsim_string_free(char *s);

// Total management messages over one hour for `n_stations` and
// `updates_per_hour`.
//
// # Safety
// `out` must be a writable pointer.
enum TwtsimStatus twtsim_overhead_messages(enum TwtsimOverheadMode mode,
                                           uint64_t n_stations,
                                           uint64_t updates_per_hour,
                                           uint64_t *out);

// Encodes a JSON message into `buf`. `written` receives the element length,
// also when the buffer is too small.
//
// # Safety
// `json` must be a NUL-terminated string, `buf` must have `cap` writable
// bytes (or be NULL with `cap == 0`) and `written` must be writable.
enum TwtsimStatus twtsim_codec_encode_json(const char *json,
                                           uint8_t *buf,
                                           size_t cap,
                                           size_t *written);

// Decodes an element and stores its JSON form in `out`; free it with
// [`twtsim_string_free`].
//
// # Safety
// `bytes` must point to `len` readable bytes and `out` must be writable.
enum TwtsimStatus twtsim_codec_decode_json(const uint8_t *bytes, size_t len, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TWTSIM_H */
