use super::*;
use crate::case::tests::three_bus;
use crate::case::{Branch, Bus, CostCurve, DemandProfile, Generator, Segment, Status};

fn unit(bus: u32, p_min: f64, p_max: f64, slope: f64) -> Generator {
    Generator {
        bus,
        p_min,
        p_max,
        ramp_limit: None,
        startup_cost: 0.0,
        no_load_cost: 0.0,
        cost_curve: CostCurve {
            segments: if p_max > p_min {
                vec![Segment {
                    breakpoint_mw: p_max,
                    slope,
                }]
            } else {
                vec![]
            },
        },
        status: Status::In,
    }
}

fn line(from_bus: u32, to_bus: u32, limit: Option<f64>) -> Branch {
    Branch {
        from_bus,
        to_bus,
        reactance: 0.1,
        flow_limit: limit,
        status: Status::In,
    }
}

fn case_of(buses: u32, branches: Vec<Branch>, generators: Vec<Generator>, demand: &[(u32, f64)], days: usize) -> GridCase {
    let case = GridCase {
        base_mva: 100.0,
        buses: (1..=buses).map(|id| Bus { id, county: None }).collect(),
        branches,
        generators,
        demand: DemandProfile {
            series: demand.iter().map(|&(b, d)| (b, vec![d; days * DAY])).collect(),
        },
        renewables: vec![],
    };
    case.validate().unwrap();
    case
}

/// Ring with equal reactances; cheap unit at 1, dear unit at 3, load at 2.
/// Line 1-2 (limit 80) binds: g1 = 90, g3 = 60, LMPs 10 / 50 / 30.
fn congested_ring() -> GridCase {
    case_of(
        3,
        vec![line(1, 2, Some(80.0)), line(2, 3, None), line(1, 3, None)],
        vec![unit(1, 0.0, 300.0, 10.0), unit(3, 0.0, 300.0, 30.0)],
        &[(2, 150.0)],
        1,
    )
}

fn dispatch(case: &GridCase, reference: Reference) -> (NetworkModel, CommitmentSchedule, DispatchResult) {
    let opts = MarketOptions {
        reference,
        ..Default::default()
    };
    let net = NetworkModel::build(case, reference).unwrap();
    let init = vec![None; case.generators.len()];
    let ScucOutcome::Scheduled(s) = solve_scuc(&net, case, 0, &init, &opts).unwrap() else {
        panic!("commitment failed")
    };
    let d = solve_sced(&net, case, &s, 0, &init, &opts).unwrap();
    assert_eq!(d.status, DayStatus::Optimal);
    (net, s, d)
}

fn perturbed_objective(case: &GridCase, s: &CommitmentSchedule, bus: u32, hour: usize, eps: f64) -> f64 {
    let mut c = case.clone();
    let horizon = c.horizon();
    c.demand.series.entry(bus).or_insert_with(|| vec![0.0; horizon])[hour] += eps;
    let net = NetworkModel::build(&c, Reference::Auto).unwrap();
    let d = solve_sced(&net, &c, s, 0, &vec![None; c.generators.len()], &MarketOptions::default()).unwrap();
    d.objective
}

#[test]
fn uncongested_two_bus_is_uniform() {
    let case = case_of(
        2,
        vec![line(1, 2, Some(1000.0))],
        vec![unit(1, 0.0, 50.0, 20.0), unit(2, 0.0, 100.0, 30.0)],
        &[(2, 80.0)],
        1,
    );
    let (_, _, d) = dispatch(&case, Reference::Auto);
    for iv in &d.intervals {
        assert!(iv.lmp.iter().all(|p| (p - 30.0).abs() < 1e-8), "{:?}", iv.lmp);
        assert!(iv.congestion_upper.iter().chain(&iv.congestion_lower).all(|&m| m == 0.0));
    }
}

#[test]
fn congested_ring_prices_split() {
    let case = congested_ring();
    let (net, _, d) = dispatch(&case, Reference::Auto);
    let iv = &d.intervals[0];
    assert!((iv.generation[0] - 90.0).abs() < 1e-6);
    assert!((iv.generation[1] - 60.0).abs() < 1e-6);
    for (p, want) in iv.lmp.iter().zip([10.0, 50.0, 30.0]) {
        assert!((p - want).abs() < 1e-6, "{:?}", iv.lmp);
    }
    let r = net.bus_index(net.reference_bus).unwrap();
    assert_eq!(iv.lmp[r], iv.system_lambda);
    assert!((iv.flows[0] - 80.0).abs() < 1e-6);
}

#[test]
fn lmps_match_finite_differences() {
    let case = congested_ring();
    let eps = 0.01;
    let (net, s, d) = dispatch(&case, Reference::Auto);
    for h in [0, 13] {
        for (b, &bus) in net.bus_ids.iter().enumerate() {
            let fd = (perturbed_objective(&case, &s, bus, h, eps) - d.objective) / eps;
            let lmp = d.intervals[h].lmp[b];
            assert!((fd - lmp).abs() <= 0.01 * lmp.abs(), "bus {bus} hour {h}: {fd} vs {lmp}");
        }
    }
}

#[test]
fn reference_bus_sensitivity_is_lambda() {
    let case = three_bus();
    for r in [1, 2, 3] {
        let (_, s, d) = dispatch(&case, Reference::Bus(r));
        let lambda = d.intervals[4].system_lambda;
        let fd = (perturbed_objective(&case, &s, r, 4, 0.01) - d.objective) / 0.01;
        assert!((fd - lambda).abs() <= 0.01 * lambda.abs(), "ref {r}: {fd} vs {lambda}");
    }
}

#[test]
fn congestion_rent_identity() {
    for case in [congested_ring(), three_bus()] {
        let (net, _, d) = dispatch(&case, Reference::Auto);
        for (h, iv) in d.intervals.iter().enumerate() {
            let mut lhs = 0.0;
            for (bus, s) in &case.demand.series {
                lhs += iv.lmp[net.bus_index(*bus).unwrap()] * s[h];
            }
            for (g, gen) in case.generators.iter().enumerate() {
                lhs -= iv.lmp[net.bus_index(gen.bus).unwrap()] * iv.generation[g];
            }
            let rent: f64 = net
                .lines
                .iter()
                .enumerate()
                .map(|(l, line)| (iv.congestion_upper[l] + iv.congestion_lower[l]) * line.limit)
                .sum();
            assert!((lhs - rent).abs() <= 1e-4 * (1.0 + lhs.abs()), "{lhs} vs {rent}");
        }
    }
}

#[test]
fn dispatch_respects_balance_and_limits() {
    let case = three_bus();
    let (net, _, d) = dispatch(&case, Reference::Auto);
    for (h, iv) in d.intervals.iter().enumerate() {
        let g: f64 = iv.generation.iter().sum();
        assert!((g - case.total_demand(h)).abs() < 1e-5);
        for (f, line) in iv.flows.iter().zip(&net.lines) {
            assert!(f.abs() <= line.limit + 1e-5);
        }
        let binding = iv.congestion_upper.iter().chain(&iv.congestion_lower).any(|&m| m > 0.0);
        if !binding {
            let (lo, hi) = iv.lmp.iter().fold((f64::MAX, f64::MIN), |(a, b), &p| (a.min(p), b.max(p)));
            assert!(hi - lo <= 1e-8);
        }
    }
}

#[test]
fn single_unit_stays_committed() {
    let mut g = unit(1, 10.0, 200.0, 20.0);
    g.no_load_cost = 50.0;
    let case = case_of(2, vec![line(1, 2, None)], vec![g], &[(2, 60.0)], 1);
    let (_, s, d) = dispatch(&case, Reference::Auto);
    assert!(s.on_off[0].iter().all(|&on| on));
    assert!((d.objective - 24.0 * (50.0 + 50.0 * 20.0)).abs() < 1e-6);
}

#[test]
fn large_minimum_unit_is_left_off() {
    let mut big = unit(1, 100.0, 200.0, 5.0);
    big.no_load_cost = 100.0 * 5.0;
    let case = case_of(
        2,
        vec![line(1, 2, None)],
        vec![big, unit(2, 0.0, 100.0, 30.0)],
        &[(2, 30.0)],
        1,
    );
    let (_, s, d) = dispatch(&case, Reference::Auto);
    assert!(s.on_off[0].iter().all(|&on| !on));
    assert!((d.objective - 24.0 * 900.0).abs() < 1e-6);
}

#[test]
fn startup_cost_is_charged_once() {
    let mut g = unit(1, 10.0, 100.0, 10.0);
    g.startup_cost = 1000.0;
    let case = case_of(1, vec![], vec![g], &[(1, 50.0)], 2);
    let opts = MarketOptions::default();
    let net = NetworkModel::build(&case, Reference::Auto).unwrap();
    let off = vec![Some(UnitState { on: false, output: 0.0 })];
    let ScucOutcome::Scheduled(s) = solve_scuc(&net, &case, 0, &off, &opts).unwrap() else { panic!() };
    assert_eq!(s.startups(&off), 1);
    assert!((s.objective - (1000.0 + 24.0 * 40.0 * 10.0)).abs() < 1e-6);
}

#[test]
fn shortfall_is_an_infeasible_day() {
    let case = case_of(2, vec![line(1, 2, None)], vec![unit(1, 0.0, 50.0, 10.0)], &[(2, 80.0)], 1);
    let net = NetworkModel::build(&case, Reference::Auto).unwrap();
    let out = solve_scuc(&net, &case, 0, &[None], &MarketOptions::default()).unwrap();
    assert_eq!(out, ScucOutcome::Infeasible { day: 0 });
    let rec = run_horizon(&case, None, 0..1, &MarketOptions::default()).unwrap();
    assert_eq!(rec.days[0].status, DayStatus::Infeasible);
    assert!(rec.lmp.iter().flatten().all(Option::is_none));
}

#[test]
fn ramp_limits_bind_across_hours() {
    let mut case = case_of(
        2,
        vec![line(1, 2, None)],
        vec![unit(1, 0.0, 200.0, 10.0), unit(2, 0.0, 200.0, 40.0)],
        &[(2, 20.0)],
        1,
    );
    case.generators[0].ramp_limit = Some(30.0);
    for h in 12..DAY {
        case.demand.series.get_mut(&2).unwrap()[h] = 120.0;
    }
    let (_, _, d) = dispatch(&case, Reference::Auto);
    for h in 1..DAY {
        let step = d.intervals[h].generation[0] - d.intervals[h - 1].generation[0];
        assert!(step.abs() <= 30.0 + 1e-6);
    }
    // The cheap unit pre-ramps so hour 12 needs as little of the dear one as possible.
    assert!(d.intervals[12].generation[0] > 20.0);
}

#[test]
fn two_day_horizon_is_deterministic() {
    let mut case = three_bus();
    for s in case.demand.series.values_mut() {
        let day: Vec<f64> = s.clone();
        s.extend(day.iter().map(|d| d * 1.1));
    }
    let a = run_horizon(&case, None, 0..2, &MarketOptions::default()).unwrap();
    let b = run_horizon(&case, None, 0..2, &MarketOptions::default()).unwrap();
    assert_eq!(a.num_intervals(), 48);
    assert_eq!(a.count(DayStatus::Optimal), 2);
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.sidecar_json(), b.sidecar_json());
    assert_eq!(a.metadata.scenario, "baseline");
    let back = PriceRecord::from_csv_and_sidecar(&a.to_csv(), &a.sidecar_json()).unwrap();
    assert_eq!(back, a);
}

#[test]
fn overload_scenario_fails_some_day() {
    let case = three_bus();
    let heavy = MiningScenario::equal_split("heavy", &[2], 300.0);
    let rec = run_horizon(&case, Some(&heavy), 0..1, &MarketOptions::default()).unwrap();
    assert_eq!(rec.count(DayStatus::Optimal), 0);
    assert_eq!(rec.metadata.scenario, "heavy");
}

#[test]
fn more_demand_never_costs_less() {
    let base = three_bus();
    let mut last = f64::NEG_INFINITY;
    for k in [1.0, 1.1, 1.25, 1.4] {
        let mut c = base.clone();
        for s in c.demand.series.values_mut() {
            s.iter_mut().for_each(|d| *d *= k);
        }
        let rec = run_horizon(&c, None, 0..1, &MarketOptions::default()).unwrap();
        let Some(obj) = rec.days[0].objective else { break };
        assert!(obj >= last - 1e-9);
        last = obj;
    }
}

#[test]
fn record_rejects_inconsistent_sidecar() {
    let rec = run_horizon(&three_bus(), None, 0..1, &MarketOptions::default()).unwrap();
    let csv = rec.to_csv();
    let trimmed: String = csv.lines().take(10).map(|l| format!("{l}\n")).collect();
    assert!(PriceRecord::from_csv_and_sidecar(&trimmed, &rec.sidecar_json()).is_err());
}

#[test]
fn out_of_range_day_is_an_error() {
    let case = three_bus();
    let net = NetworkModel::build(&case, Reference::Auto).unwrap();
    assert!(matches!(
        solve_scuc(&net, &case, 3, &[None, None], &MarketOptions::default()),
        Err(MarketError::DayOutOfRange { day: 3, days: 1 })
    ));
}
