use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use gridmarket::case::to_native_json;
use gridmarket::demo::three_bus_case;
use gridmarket_ffi::*;

fn last_error() -> String {
    let p = gm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn three_bus() -> *mut GmCase {
    let json = CString::new(to_native_json(&three_bus_case())).unwrap();
    let mut case = ptr::null_mut();
    assert_eq!(unsafe { gm_case_parse_json(json.as_ptr(), &mut case) }, GmStatus::Ok);
    case
}

#[test]
fn case_handle_reports_its_shape() {
    let case = three_bus();
    unsafe {
        assert_eq!(gm_case_bus_count(case), 3);
        assert_eq!(gm_case_num_days(case), 2);
        gm_case_free(case);
        assert_eq!(gm_case_bus_count(ptr::null()), 0);
    }
}

#[test]
fn parse_errors_set_the_last_error() {
    let bad = CString::new("{\"buses\": [").unwrap();
    let mut case = ptr::null_mut();
    assert_eq!(unsafe { gm_case_parse_json(bad.as_ptr(), &mut case) }, GmStatus::Parse);
    assert!(case.is_null());
    assert!(last_error().contains("line"));

    let mcase = CString::new("mpc.baseMVA = 100;").unwrap();
    assert_eq!(unsafe { gm_case_parse_mcase(mcase.as_ptr(), &mut case) }, GmStatus::Parse);
    assert!(last_error().contains("mpc.bus"));

    assert_eq!(unsafe { gm_case_parse_json(ptr::null(), &mut case) }, GmStatus::NullPointer);
}

#[test]
fn success_clears_the_last_error() {
    let mut out = 0.0;
    assert_eq!(unsafe { gm_net_reward(1.0, 0.0, 0.0, &mut out) }, GmStatus::InvalidArgument);
    assert!(!gm_last_error().is_null());
    assert_eq!(unsafe { gm_net_reward(25_000.0, 143.0, 0.0, &mut out) }, GmStatus::Ok);
    assert!(gm_last_error().is_null());
    assert!((out - 174.825).abs() < 1e-3);
}

#[test]
fn horizon_prices_match_the_library() {
    let case = three_bus();
    let mut rec = ptr::null_mut();
    unsafe {
        assert_eq!(gm_run_horizon(case, 0, 2, &mut rec), GmStatus::Ok);
        assert_eq!(gm_price_record_intervals(rec), 48);
        assert_eq!(gm_price_record_optimal_days(rec), 2);
        let direct = gridmarket::market::run_horizon(
            &three_bus_case(),
            None,
            0..2,
            &gridmarket::market::MarketOptions::default(),
        )
        .unwrap();
        for t in [0, 16, 47] {
            for (k, &bus) in direct.bus_ids.iter().enumerate() {
                let mut v = f64::NAN;
                assert_eq!(gm_price_record_lmp(rec, t, bus, &mut v), GmStatus::Ok);
                assert_eq!(v, direct.lmp[k][t].unwrap());
            }
        }
        let mut v = 0.0;
        assert_eq!(gm_price_record_lmp(rec, 48, 1, &mut v), GmStatus::InvalidArgument);
        assert_eq!(gm_price_record_lmp(rec, 0, 99, &mut v), GmStatus::InvalidArgument);
        assert_eq!(gm_run_horizon(case, 1, 5, &mut rec), GmStatus::Solver);
        assert!(rec.is_null());
        gm_case_free(case);
    }
}

#[test]
fn infeasible_prices_are_unavailable() {
    let mut c = three_bus_case();
    for s in c.demand.series.values_mut() {
        s.iter_mut().for_each(|d| *d *= 10.0);
    }
    let json = CString::new(to_native_json(&c)).unwrap();
    let mut case = ptr::null_mut();
    let mut rec = ptr::null_mut();
    unsafe {
        assert_eq!(gm_case_parse_json(json.as_ptr(), &mut case), GmStatus::Ok);
        assert_eq!(gm_run_horizon(case, 0, 1, &mut rec), GmStatus::Ok);
        assert_eq!(gm_price_record_optimal_days(rec), 0);
        let mut v = 0.0;
        assert_eq!(gm_price_record_lmp(rec, 3, 1, &mut v), GmStatus::Unavailable);
        gm_price_record_free(rec);
        gm_case_free(case);
    }
}

#[test]
fn portfolio_picks_the_best_program() {
    // Program 1 pays more and is never deployed.
    let revenue = [5.0, 5.0, 5.0, 8.0, 8.0, 8.0];
    let deployment = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let reward = [100.0, 100.0, 100.0];
    let mut caps = [f64::NAN; 2];
    let mut profit = f64::NAN;
    let status = unsafe {
        gm_portfolio_solve(
            2,
            3,
            revenue.as_ptr(),
            deployment.as_ptr(),
            reward.as_ptr(),
            10.0,
            caps.as_mut_ptr(),
            &mut profit,
        )
    };
    assert_eq!(status, GmStatus::Ok);
    assert_eq!(caps, [0.0, 10.0]);
    assert!((profit - 240.0).abs() < 1e-9);

    let status = unsafe {
        gm_portfolio_solve(2, 3, ptr::null(), deployment.as_ptr(), reward.as_ptr(), 10.0, caps.as_mut_ptr(), &mut profit)
    };
    assert_eq!(status, GmStatus::NullPointer);
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/gridmarket.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["gm_case_parse_json", "gm_run_horizon", "gm_price_record_lmp", "gm_portfolio_solve", "gm_last_error"] {
        assert!(text.contains(f), "{f} missing from the header");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c", "-std=c99", "-Wall", "-Werror"]).arg(&header).output() else {
        eprintln!("no C compiler; skipping the syntax check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
