use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gridmarket::market::PriceRecord;
use sha2::{Digest, Sha256};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridmarket")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn demo_dir() -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().to_path_buf();
    let o = run(&["demo", "--output", root.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    (tmp, root)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn two_day_simulation_exports_48_intervals() {
    let (_tmp, root) = demo_dir();
    let o = run(&["simulate", "--config", p(&root.join("three_bus.config.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = root.join("out/three_bus");
    let csv = fs::read_to_string(out.join("prices.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 48 * 3);
    assert!(csv.lines().skip(1).all(|l| !l.ends_with(',')));
    let sidecar = fs::read_to_string(out.join("prices.json")).unwrap();
    let record = PriceRecord::from_csv_and_sidecar(&csv, &sidecar).unwrap();
    assert_eq!(record.num_intervals(), 48);
    assert!(sidecar.contains(&hex::encode(Sha256::digest(csv.as_bytes()))));
    assert_eq!(fs::read_to_string(out.join("stats.csv")).unwrap().lines().count(), 49);
    assert_eq!(fs::read_to_string(out.join("hourly.csv")).unwrap().lines().count(), 25);
    let manifest = fs::read_to_string(out.join("run_manifest.json")).unwrap();
    assert!(manifest.contains("\"command\": \"simulate\""));
    assert!(!manifest.contains("out/three_bus"), "the output path must not leak into the manifest");
}

#[test]
fn congested_line_separates_prices() {
    let (_tmp, root) = demo_dir();
    assert!(run(&["simulate", "--config", p(&root.join("three_bus.config.json"))]).status.success());
    let out = root.join("out/three_bus");
    let county = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_str().unwrap().starts_with("county_"))
        .expect("a county table");
    let table = fs::read_to_string(county).unwrap();
    assert_eq!(table.lines().next(), Some("county,lmp"));
    assert!(table.contains("Lamb,10"));
    assert!(!table.contains("Travis,10\n"), "the load pocket should price above the cheap unit:\n{table}");
}

#[test]
fn all_days_failing_exits_2() {
    let (_tmp, root) = demo_dir();
    let o = run(&["simulate", "--config", p(&root.join("overload.config.json"))]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("Infeasible"));
    let csv = fs::read_to_string(root.join("out/overload/prices.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 48 * 3);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(',')), "failed days carry empty prices");
}

#[test]
fn configuration_errors_exit_1_and_name_the_file() {
    let (_tmp, root) = demo_dir();
    let missing = root.join("nope.json");
    let o = run(&["simulate", "--config", p(&missing)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.json"));

    let bad = root.join("bad.config.json");
    fs::write(&bad, r#"{"case": "three_bus.json", "colour": "red"}"#).unwrap();
    let o = run(&["simulate", "--config", p(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.config.json") && stderr(&o).contains("colour"), "{}", stderr(&o));

    let broken_case = root.join("broken.json");
    fs::write(&broken_case, "{\"base_mva\": 100,\n \"buses\": [}").unwrap();
    let cfg = root.join("broken.config.json");
    fs::write(&cfg, r#"{"case": "broken.json", "output": "out/broken"}"#).unwrap();
    let o = run(&["simulate", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("broken.json") && stderr(&o).contains("line 2"), "{}", stderr(&o));

    let o = run(&["simulate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_reports_the_case_shape() {
    let (_tmp, root) = demo_dir();
    let o = run(&["validate", "--config", p(&root.join("three_bus.config.json"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("3 buses") && text.contains("2 days"), "{text}");
}

#[test]
fn rerun_reproduces_and_detects_changed_inputs() {
    let (_tmp, root) = demo_dir();
    assert!(run(&["simulate", "--config", p(&root.join("three_bus.config.json"))]).status.success());
    let manifest = root.join("out/three_bus/run_manifest.json");
    let again = root.join("again");
    let o = run(&["rerun", "--manifest", p(&manifest), "--output", p(&again)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["prices.csv", "prices.json", "stats.csv", "run_manifest.json"] {
        assert_eq!(fs::read(root.join("out/three_bus").join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }

    let case = root.join("three_bus.json");
    let text = fs::read_to_string(&case).unwrap();
    fs::write(&case, text.replacen("100.0", "90.0", 1)).unwrap();
    let o = run(&["rerun", "--manifest", p(&manifest), "--output", p(&root.join("third"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("three_bus.json"));
}

#[test]
fn seed_flag_is_recorded() {
    let (_tmp, root) = demo_dir();
    let out = root.join("seeded");
    let o = run(&["simulate", "--config", p(&root.join("three_bus.config.json")), "--seed", "7", "--output", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sidecar = fs::read_to_string(out.join("prices.json")).unwrap();
    assert!(sidecar.contains("\"seed\": 7"), "{sidecar}");
}

#[test]
fn sweep_writes_cells_and_summary() {
    let (_tmp, root) = demo_dir();
    fs::write(
        root.join("spec.json"),
        r#"{"location_sets": {"north": [1], "load": [2]}, "capacities_mw": [0, 40, 400], "days": [0, 2]}"#,
    )
    .unwrap();
    fs::write(root.join("sweep.json"), r#"{"case": "three_bus.json", "sweep": "spec.json", "output": "out/s"}"#).unwrap();
    let o = run(&["sweep", "--config", p(&root.join("sweep.json")), "--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = root.join("out/s");
    let summary = fs::read_to_string(out.join("sweep_summary.csv")).unwrap();
    assert!(summary.starts_with("cell,location_set,total_mw"));
    assert_eq!(summary.lines().count(), 1 + 1 + 6);
    assert!(out.join("baseline/prices.csv").exists());
    assert!(out.join("load_40mw/prices.csv").exists());
    let report = fs::read_to_string(out.join("sweep_report.json")).unwrap();
    assert!(report.contains("\"lost_days_monotone\": true"));
}

#[test]
fn profit_and_portfolio_commands() {
    let (_tmp, root) = demo_dir();
    // A two-day price record with aligned economics and reserve files.
    assert!(run(&["simulate", "--config", p(&root.join("three_bus.config.json"))]).status.success());
    let mut econ = String::from("interval,btc_usd,difficulty_mwh_per_btc,elec_price_usd_mwh\n");
    let mut rrs = String::from("interval,revenue_usd_mwh,deployment_frac\n");
    for t in 0..48 {
        econ.push_str(&format!("{t},25000,143,30\n"));
        rrs.push_str(&format!("{t},11.27,{}\n", if t == 17 { 1 } else { 0 }));
    }
    fs::write(root.join("econ2.csv"), econ).unwrap();
    fs::write(root.join("rrs2.csv"), rrs).unwrap();
    fs::write(
        root.join("p.json"),
        r#"{"output": "out/p", "seed": 3, "profit": {
            "price_record": "out/three_bus/prices.csv", "economics": "econ2.csv",
            "programs": [{"name": "rrs", "path": "rrs2.csv"}],
            "thresholds": [0, 20, 40, 60], "draws": 200,
            "noise": {"kind": "gaussian", "sigma": 2.0}, "capacity_mw": 10}}"#,
    )
    .unwrap();
    let o = run(&["profit", "--config", p(&root.join("p.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let curve = fs::read_to_string(root.join("out/p/profit_vs_threshold.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some("threshold,mean,lower,upper"));
    assert_eq!(curve.lines().count(), 5);
    assert!(root.join("out/p/portfolio.json").exists());

    let o = run(&["portfolio", "--config", p(&root.join("p.json")), "--output", p(&root.join("out/q"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(root.join("out/q/portfolio.json")).unwrap()).unwrap();
    assert_eq!(doc["capacities_mw"][0].as_f64(), Some(10.0));

    // Economics that do not line up with the record are rejected.
    fs::write(root.join("econ2.csv"), "interval,btc_usd,difficulty_mwh_per_btc,elec_price_usd_mwh\n0,1,1,1\n").unwrap();
    let o = run(&["portfolio", "--config", p(&root.join("p.json")), "--output", p(&root.join("out/r"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("econ2.csv"), "{}", stderr(&o));
}
