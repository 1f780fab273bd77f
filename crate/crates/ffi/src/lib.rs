//! C ABI over `gridmarket`.
//!
//! Cases and price records cross the boundary as opaque handles that the
//! caller releases with the matching `*_free`. Every fallible call returns a
//! [`GmStatus`]; on failure [`gm_last_error`] holds a message for the calling
//! thread. Panics never unwind into C: they are reported as
//! [`GmStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gridmarket::case::{parse_case, parse_mcase, GridCase};
use gridmarket::dr::{solve_portfolio, DrProgram, MiningEconomics};
use gridmarket::market::{run_horizon, MarketOptions, PriceRecord};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    Solver = 5,
    /// The value exists but is undefined, such as the price of an infeasible
    /// interval.
    Unavailable = 6,
    Panic = 7,
}

/// Parsed grid case.
pub struct GmCase(GridCase);

/// Prices from a run over whole market days.
pub struct GmPriceRecord(PriceRecord);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn guard(f: impl FnOnce() -> Result<(), (GmStatus, String)>) -> GmStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GmStatus::Panic
        }
    }
}

fn null(what: &str) -> (GmStatus, String) {
    (GmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (GmStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (GmStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (GmStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn gm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

unsafe fn parse_into(
    source: *const c_char,
    out: *mut *mut GmCase,
    parse: fn(&str) -> Result<GridCase, gridmarket::case::CaseError>,
) -> GmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let src = text(source, "source")?;
        let case = parse(src).map_err(|e| (GmStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(GmCase(case)));
        Ok(())
    })
}

/// Parses a native JSON case.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gm_case_parse_json(source: *const c_char, out: *mut *mut GmCase) -> GmStatus {
    parse_into(source, out, parse_case)
}

/// Parses a matrix-block (`mpc.*`) case.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gm_case_parse_mcase(source: *const c_char, out: *mut *mut GmCase) -> GmStatus {
    parse_into(source, out, parse_mcase)
}

/// # Safety
/// `case` must come from a `gm_case_parse_*` call and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gm_case_free(case: *mut GmCase) {
    if !case.is_null() {
        drop(Box::from_raw(case));
    }
}

/// Number of buses, or 0 for a null handle.
///
/// # Safety
/// `case` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gm_case_bus_count(case: *const GmCase) -> usize {
    case.as_ref().map_or(0, |c| c.0.buses.len())
}

/// Number of whole market days in the case's profile, or 0 for null.
///
/// # Safety
/// `case` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gm_case_num_days(case: *const GmCase) -> usize {
    case.as_ref().map_or(0, |c| c.0.num_days())
}

/// Clears days `[first_day, first_day + num_days)` with default solver
/// settings and no added load. Days that fail to clear are recorded, not
/// reported as errors.
///
/// # Safety
/// `case` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gm_run_horizon(
    case: *const GmCase,
    first_day: usize,
    num_days: usize,
    out: *mut *mut GmPriceRecord,
) -> GmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let case = case.as_ref().ok_or_else(|| null("case"))?;
        let end = first_day
            .checked_add(num_days)
            .ok_or((GmStatus::InvalidArgument, "day range overflows".to_string()))?;
        let record = run_horizon(&case.0, None, first_day..end, &MarketOptions::default())
            .map_err(|e| (GmStatus::Solver, e.to_string()))?;
        *out = Box::into_raw(Box::new(GmPriceRecord(record)));
        Ok(())
    })
}

/// # Safety
/// `record` must come from `gm_run_horizon` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gm_price_record_free(record: *mut GmPriceRecord) {
    if !record.is_null() {
        drop(Box::from_raw(record));
    }
}

/// Number of hourly intervals in the record, or 0 for null.
///
/// # Safety
/// `record` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gm_price_record_intervals(record: *const GmPriceRecord) -> usize {
    record.as_ref().map_or(0, |r| r.0.num_intervals())
}

/// Number of days in the record that cleared optimally.
///
/// # Safety
/// `record` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gm_price_record_optimal_days(record: *const GmPriceRecord) -> usize {
    record
        .as_ref()
        .map_or(0, |r| r.0.count(gridmarket::market::DayStatus::Optimal))
}

/// LMP at `bus_id` for the record-relative `interval`. Returns
/// [`GmStatus::Unavailable`] when that day did not clear.
///
/// # Safety
/// `record` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gm_price_record_lmp(
    record: *const GmPriceRecord,
    interval: usize,
    bus_id: u32,
    out: *mut f64,
) -> GmStatus {
    guard(|| {
        let r = &record.as_ref().ok_or_else(|| null("record"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let col = r
            .bus_position(bus_id)
            .ok_or((GmStatus::InvalidArgument, format!("unknown bus {bus_id}")))?;
        if interval >= r.num_intervals() {
            return Err((
                GmStatus::InvalidArgument,
                format!("interval {interval} is outside the {}-interval record", r.num_intervals()),
            ));
        }
        let v = r.lmp[col][interval].ok_or((GmStatus::Unavailable, format!("interval {interval} did not clear")))?;
        *out = v;
        Ok(())
    })
}

/// Net mining reward in $/MWh: coin price over MWh per coin, less the
/// electricity price.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gm_net_reward(btc_usd: f64, difficulty_mwh_per_btc: f64, elec_price_usd_mwh: f64, out: *mut f64) -> GmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let econ = MiningEconomics::constant(btc_usd, difficulty_mwh_per_btc, elec_price_usd_mwh, 1);
        econ.validate().map_err(|e| (GmStatus::InvalidArgument, e.to_string()))?;
        *out = econ.net_reward(0);
        Ok(())
    })
}

/// Optimal split of `capacity_mw` over `num_programs` reserve programs.
///
/// `revenue` and `deployment` are row-major `num_programs × intervals`
/// matrices; `net_reward` has `intervals` entries. Writes `num_programs`
/// capacities to `capacities_out` and the expected profit to `profit_out`.
///
/// # Safety
/// All pointers must reference buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn gm_portfolio_solve(
    num_programs: usize,
    intervals: usize,
    revenue: *const f64,
    deployment: *const f64,
    net_reward: *const f64,
    capacity_mw: f64,
    capacities_out: *mut f64,
    profit_out: *mut f64,
) -> GmStatus {
    guard(|| {
        let cells = num_programs
            .checked_mul(intervals)
            .ok_or((GmStatus::InvalidArgument, "matrix size overflows".to_string()))?;
        let revenue = slice(revenue, cells, "revenue")?;
        let deployment = slice(deployment, cells, "deployment")?;
        let reward = slice(net_reward, intervals, "net_reward")?;
        if (num_programs > 0 && capacities_out.is_null()) || profit_out.is_null() {
            return Err(null("output buffer"));
        }
        let programs: Vec<DrProgram> = (0..num_programs)
            .map(|i| {
                let row = i * intervals..(i + 1) * intervals;
                DrProgram::reserve(format!("program_{i}"), revenue[row.clone()].to_vec(), deployment[row].to_vec())
            })
            .collect();
        // A unit coin price over the reward gives exactly that reward.
        let econ = MiningEconomics {
            btc_usd: reward.to_vec(),
            difficulty_mwh_per_btc: vec![1.0; intervals],
            elec_price_usd_mwh: vec![0.0; intervals],
        };
        let sol = solve_portfolio(&programs, &econ, capacity_mw).map_err(|e| (GmStatus::InvalidArgument, e.to_string()))?;
        if num_programs > 0 {
            std::slice::from_raw_parts_mut(capacities_out, num_programs).copy_from_slice(&sol.capacities);
        }
        *profit_out = sol.expected_profit;
        Ok(())
    })
}
