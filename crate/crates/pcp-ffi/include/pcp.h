#ifndef PCP_H
#define PCP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every FFI call.
 */
typedef enum PcpStatus {
  PcpOk = 0,
  /**
   * Invalid argument or failed validation.
   */
  PcpInvalidArgument = 1,
  /**
   * Data problem: gaps, misalignment, or insufficient history.
   */
  PcpDataError = 2,
  /**
   * Null pointer where a value was required.
   */
  PcpNullPointer = 3,
  /**
   * Internal failure (including caught panics).
   */
  PcpInternalError = 4,
} PcpStatus;

/**
 * Opaque aggregate-load forecaster.
 */
typedef struct PcpForecaster PcpForecaster;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len` bytes). Returns the full message length in bytes,
 * excluding the terminator; 0 means no error has been recorded.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be null (query mode).
 */
size_t pcp_last_error_message(char *buf, size_t len);

/**
 * Settle one hour: disaggregate the cooperative's market payment across
 * consumers. Writes `n` payments to `payments_out` and, if non-null, the
 * market total to `total_out`.
 *
 * # Safety
 * `effective` and `realtime` must point to `n` readable doubles,
 * `payments_out` to `n` writable doubles.
 */
enum PcpStatus pcp_settle(const double *effective,
                          const double *realtime,
                          size_t n,
                          double p_d,
                          double p_r,
                          double *payments_out,
                          double *total_out);

/**
 * Blend announced loads with the cooperative forecast into effective bids.
 * Writes `n` bids to `bids_out` and, if non-null, the blend weight to
 * `alpha_out`.
 *
 * # Safety
 * `announced` and `confidence` must point to `n` readable doubles,
 * `bids_out` to `n` writable doubles.
 */
enum PcpStatus pcp_effective_bids(const double *announced,
                                  const double *confidence,
                                  size_t n,
                                  double forecast,
                                  double *bids_out,
                                  double *alpha_out);

/**
 * Create a forecaster by fitting on an hourly history window.
 * `start_hour` is the absolute hour index of `history[0]` and anchors the
 * daily/weekly seasonal phases. The window needs at least 336 hours.
 *
 * # Safety
 * `history` must point to `len` readable doubles; `out` must be a valid
 * pointer to receive the handle. Free the handle with
 * `pcp_forecaster_free`.
 */
enum PcpStatus pcp_forecaster_new(const double *history,
                                  size_t len,
                                  uint64_t start_hour,
                                  struct PcpForecaster **out);

/**
 * Consume one observed hour, advancing the forecaster.
 *
 * # Safety
 * `handle` must be a live pointer from `pcp_forecaster_new`.
 */
enum PcpStatus pcp_forecaster_update(struct PcpForecaster *handle, double observed);

/**
 * Forecast `lead` hours ahead (1..=36) into `out`.
 *
 * # Safety
 * `handle` must be a live pointer from `pcp_forecaster_new`; `out` must be
 * a valid pointer.
 */
enum PcpStatus pcp_forecaster_forecast(const struct PcpForecaster *handle,
                                       size_t lead,
                                       double *out);

/**
 * Re-optimize smoothing parameters on a trailing window (daily refit),
 * starting the search from the handle's current parameters.
 *
 * # Safety
 * `handle` must be a live pointer from `pcp_forecaster_new`; `history`
 * must point to `len` readable doubles.
 */
enum PcpStatus pcp_forecaster_refit(struct PcpForecaster *handle,
                                    const double *history,
                                    size_t len,
                                    uint64_t start_hour);

/**
 * Release a forecaster handle. Null is a no-op.
 *
 * # Safety
 * `handle` must be null or a pointer from `pcp_forecaster_new` that has
 * not been freed.
 */
void pcp_forecaster_free(struct PcpForecaster *handle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PCP_H */
