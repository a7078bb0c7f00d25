/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef GRIDSCEN_H
#define GRIDSCEN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GsPeakKind {
  GS_PEAK_KIND_PEAK = 0,
  GS_PEAK_KIND_REVERSE = 1,
} GsPeakKind;

typedef enum GsPeakSampling {
  GS_PEAK_SAMPLING_MARGINAL = 0,
  GS_PEAK_SAMPLING_UNIFORM = 1,
} GsPeakSampling;

/**
 * Result of every fallible call.
 */
typedef enum GsStatus {
  GS_STATUS_OK = 0,
  GS_STATUS_NULL_ARGUMENT = 1,
  GS_STATUS_INVALID_UTF8 = 2,
  GS_STATUS_IO = 3,
  GS_STATUS_MISSING_INPUT = 4,
  GS_STATUS_MALFORMED_INPUT = 5,
  GS_STATUS_INVALID_ARGUMENT = 6,
  GS_STATUS_EMPTY_DISTRIBUTION = 7,
  GS_STATUS_ATTEMPTS_EXHAUSTED = 8,
  GS_STATUS_STORE_FORMAT = 9,
  GS_STATUS_BUFFER_TOO_SMALL = 10,
  GS_STATUS_OUT_OF_RANGE = 11,
  GS_STATUS_PANIC = 99,
} GsStatus;

/**
 * Consumer load profiles with their metadata.
 */
typedef struct GsLoadPool GsLoadPool;

/**
 * Normalized PV generation arranged in days.
 */
typedef struct GsPvSeries GsPvSeries;

/**
 * Fitted EV session model.
 */
typedef struct GsSessionModel GsSessionModel;

/**
 * One EV charging session in hour-of-day terms.
 */
typedef struct GsChargingSession {
  double arrival_h;
  double departure_h;
  double connection_h;
  double charge_h;
  double peak_kw;
  double energy_kwh;
} GsChargingSession;

typedef struct GsConsumerMetadata {
  /**
   * 1 to 5.
   */
  uint8_t consumer_type;
  double annual_net_kwh;
  double peak_kw;
  double peak_time;
  uint32_t peak_month;
  uint32_t peak_day_of_year;
  double reverse_peak_kw;
  double reverse_peak_time;
  uint32_t reverse_peak_month;
  uint32_t reverse_peak_day_of_year;
} GsConsumerMetadata;

typedef struct GsWeek {
  uint32_t start_day;
  uint32_t end_day;
  double fraction;
} GsWeek;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after success.
 * Valid until the next call on the same thread.
 */
const char *gs_last_error_message(void);

/**
 * Library version, static storage.
 */
const char *gs_version(void);

/**
 * Fits a session model on a session file. `canonical` selects column names
 * equal to the record fields; otherwise the ElaadNL export names apply.
 */
enum GsStatus gs_session_model_fit_csv(const char *path,
                                       bool canonical,
                                       struct GsSessionModel **out_model);

/**
 * Fits a session model on sessions held in memory.
 */
enum GsStatus gs_session_model_fit(const struct GsChargingSession *sessions,
                                   size_t count,
                                   struct GsSessionModel **out_model);

void gs_session_model_free(struct GsSessionModel *model);

/**
 * Generates `n` sessions into `out` (capacity `out_len`). Identical
 * arguments give identical sessions.
 */
enum GsStatus gs_session_model_generate(const struct GsSessionModel *model,
                                        size_t n,
                                        uint64_t seed,
                                        enum GsPeakSampling peak_sampling,
                                        struct GsChargingSession *out,
                                        size_t out_len);

/**
 * Non-smart charging profile of one session over two days, kW per slot.
 * `out` needs `2 * 1440 / resolution_min` entries; the count is written
 * to `out_written`.
 */
enum GsStatus gs_power_profile(const struct GsChargingSession *session,
                               uint32_t resolution_min,
                               double *out,
                               size_t out_len,
                               size_t *out_written);

/**
 * Loads and normalizes a PV generation file for `year`.
 */
enum GsStatus gs_pv_series_load_csv(const char *path,
                                    bool canonical,
                                    int32_t year,
                                    struct GsPvSeries **out_series);

void gs_pv_series_free(struct GsPvSeries *series);

/**
 * Number of complete days in the series; 0 for a null handle.
 */
size_t gs_pv_series_day_count(const struct GsPvSeries *series);

/**
 * Generates `n` PV scenarios for `month`. `kwp_spec` is e.g. `tri:2,5,10`.
 * `out_power` receives `n * 96` values (scenario-major), `out_kwp` and
 * `out_source_day` `n` values each (either may be null).
 */
enum GsStatus gs_pv_generate(const struct GsPvSeries *series,
                             uint32_t month,
                             const char *kwp_spec,
                             size_t n,
                             uint64_t seed,
                             double *out_power,
                             size_t out_power_len,
                             double *out_kwp,
                             uint32_t *out_source_day);

/**
 * Opens a compact load store and computes per-consumer metadata.
 */
enum GsStatus gs_load_pool_open(const char *path, struct GsLoadPool **out_pool);

void gs_load_pool_free(struct GsLoadPool *pool);

/**
 * Number of consumers; 0 for a null handle.
 */
size_t gs_load_pool_len(const struct GsLoadPool *pool);

/**
 * Consumer id at `index`, owned by the pool; null when out of range.
 */
const char *gs_load_pool_consumer_id(const struct GsLoadPool *pool, size_t index);

enum GsStatus gs_load_pool_metadata(const struct GsLoadPool *pool,
                                    size_t index,
                                    struct GsConsumerMetadata *out);

/**
 * Window of `window_days` days holding the most annual (reverse) peaks of
 * the whole pool.
 */
enum GsStatus gs_load_pool_worst_week(const struct GsLoadPool *pool,
                                      enum GsPeakKind kind,
                                      uint32_t window_days,
                                      struct GsWeek *out);

/**
 * Type-7 quantile of `count` values at level `q` in [0, 1].
 */
enum GsStatus gs_quantile(const double *values, size_t count, double q, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRIDSCEN_H */
