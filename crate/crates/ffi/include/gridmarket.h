#ifndef GRIDMARKET_H
#define GRIDMARKET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum GmStatus {
  GM_STATUS_OK = 0,
  GM_STATUS_NULL_POINTER = 1,
  GM_STATUS_INVALID_UTF8 = 2,
  GM_STATUS_PARSE = 3,
  GM_STATUS_INVALID_ARGUMENT = 4,
  GM_STATUS_SOLVER = 5,
  // The value exists but is undefined, such as the price of an infeasible
  // interval.
  GM_STATUS_UNAVAILABLE = 6,
  GM_STATUS_PANIC = 7,
} GmStatus;

// Parsed grid case.
typedef struct GmCase GmCase;

// Prices from a run over whole market days.
typedef struct GmPriceRecord GmPriceRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer is
// valid until the next call into this library from the same thread.
const char *gm_last_error(void);

// Parses a native JSON case.
//
// # Safety
// `source` must be a NUL-terminated string and `out` a valid pointer.
enum GmStatus gm_case_parse_json(const char *source, struct GmCase **out);

// Parses a matrix-block (`mpc.*`) case.
//
// # Safety
// `source` must be a NUL-terminated string and `out` a valid pointer.
enum GmStatus gm_case_parse_mcase(const char *source, struct GmCase **out);

// # Safety
// `case` must come from a `gm_case_parse_*` call and not be freed twice.
void gm_case_free(struct GmCase *case_);

// Number of buses, or 0 for a null handle.
//
// # Safety
// `case` must be null or a live handle.
uintptr_t gm_case_bus_count(const struct GmCase *case_);

// Number of whole market days in the case's profile, or 0 for null.
//
// # Safety
// `case` must be null or a live handle.
uintptr_t gm_case_num_days(const struct GmCase *case_);

// Clears days `[first_day, first_day + num_days)` with default solver
// settings and no added load. Days that fail to clear are recorded, not
// reported as errors.
//
// # Safety
// `case` must be a live handle and `out` a valid pointer.
enum GmStatus gm_run_horizon(const struct GmCase *case_,
                             uintptr_t first_day,
                             uintptr_t num_days,
                             struct GmPriceRecord **out);

// # Safety
// `record` must come from `gm_run_horizon` and not be freed twice.
void gm_price_record_free(struct GmPriceRecord *record);

// Number of hourly intervals in the record, or 0 for null.
//
// # Safety
// `record` must be null or a live handle.
uintptr_t gm_price_record_intervals(const struct GmPriceRecord *record);

// Number of days in the record that cleared optimally.
//
// # Safety
// `record` must be null or a live handle.
uintptr_t gm_price_record_optimal_days(const struct GmPriceRecord *record);

// LMP at `bus_id` for the record-relative `interval`. Returns
// [`GmStatus::Unavailable`] when that day did not clear.
//
// # Safety
// `record` must be a live handle and `out` a valid pointer.
enum GmStatus gm_price_record_lmp(const struct GmPriceRecord *record,
                                  uintptr_t interval,
                                  uint32_t bus_id,
                                  double *out);

// Net mining reward in $/MWh: coin price over MWh per coin, less the
// electricity price.
//
// # Safety
// `out` must be a valid pointer.
enum GmStatus gm_net_reward(double btc_usd,
                            double difficulty_mwh_per_btc,
                            double elec_price_usd_mwh,
                            double *out);

// Optimal split of `capacity_mw` over `num_programs` reserve programs.
//
// `revenue` and `deployment` are row-major `num_programs × intervals`
// matrices; `net_reward` has `intervals` entries. Writes `num_programs`
// capacities to `capacities_out` and the expected profit to `profit_out`.
//
// # Safety
// All pointers must reference buffers of the stated sizes.
enum GmStatus gm_portfolio_solve(uintptr_t num_programs,
                                 uintptr_t intervals,
                                 const double *revenue,
                                 const double *deployment,
                                 const double *net_reward,
                                 double capacity_mw,
                                 double *capacities_out,
                                 double *profit_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRIDMARKET_H */
