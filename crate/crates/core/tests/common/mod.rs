#![allow(dead_code)]

use std::collections::BTreeMap;

use gridmarket::case::{Branch, Bus, CostCurve, DemandProfile, Generator, GridCase, Renewable, Segment, Status, DAY};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random valid case: a ring (so it stays connected) plus chords, some out of
/// service, with random units, demand and renewables.
pub fn random_case(seed: u64) -> GridCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=8u32);
    let ids: Vec<u32> = {
        let mut id = 0;
        (0..n)
            .map(|_| {
                id += rng.random_range(1..=5);
                id
            })
            .collect()
    };
    let counties = ["Lamb", "Travis", "Pecos", "Harris"];
    let buses = ids
        .iter()
        .map(|&id| Bus {
            id,
            county: rng.random_bool(0.7).then(|| counties[rng.random_range(0..counties.len())].to_string()),
        })
        .collect();
    let mut branches = Vec::new();
    let ring_len = if n == 2 { 1 } else { n as usize };
    for k in 0..ring_len {
        branches.push(Branch {
            from_bus: ids[k],
            to_bus: ids[(k + 1) % n as usize],
            reactance: rng.random_range(0.01..0.5),
            flow_limit: rng.random_bool(0.5).then(|| rng.random_range(10.0..500.0)),
            status: Status::In,
        });
    }
    for _ in 0..rng.random_range(0..3) {
        let a = rng.random_range(0..n as usize);
        let b = (a + rng.random_range(1..n as usize)) % n as usize;
        let out = rng.random_bool(0.3);
        branches.push(Branch {
            from_bus: ids[a],
            to_bus: ids[b],
            reactance: if out { rng.random_range(0.0..0.5) } else { rng.random_range(0.01..0.5) },
            flow_limit: rng.random_bool(0.5).then(|| rng.random_range(10.0..500.0)),
            status: if out { Status::Out } else { Status::In },
        });
    }
    let generators = (0..rng.random_range(1..=5))
        .map(|_| {
            let p_min = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(1.0..50.0) };
            let p_max = p_min + rng.random_range(10.0..300.0);
            let nseg = rng.random_range(1..=3);
            let mut slope = rng.random_range(5.0..40.0);
            let segments = (1..=nseg)
                .map(|k| {
                    let s = Segment {
                        breakpoint_mw: if k == nseg { p_max } else { p_min + (p_max - p_min) * k as f64 / nseg as f64 },
                        slope,
                    };
                    slope += rng.random_range(0.0..10.0);
                    s
                })
                .collect();
            Generator {
                bus: ids[rng.random_range(0..n as usize)],
                p_min,
                p_max,
                ramp_limit: rng.random_bool(0.4).then(|| rng.random_range(5.0..200.0)),
                startup_cost: if rng.random_bool(0.5) { rng.random_range(0.0..2000.0) } else { 0.0 },
                no_load_cost: if rng.random_bool(0.5) { rng.random_range(0.0..500.0) } else { 0.0 },
                cost_curve: CostCurve { segments },
                status: if rng.random_bool(0.9) { Status::In } else { Status::Out },
            }
        })
        .collect();
    let horizon = DAY * rng.random_range(1..=2);
    let mut series = BTreeMap::new();
    for &id in &ids {
        if rng.random_bool(0.6) {
            series.insert(id, (0..horizon).map(|_| rng.random_range(0.0..100.0)).collect());
        }
    }
    let renewables = (0..rng.random_range(0..=2))
        .map(|_| Renewable {
            bus: ids[rng.random_range(0..n as usize)],
            series: (0..horizon).map(|_| rng.random_range(0.0..80.0)).collect(),
        })
        .collect();
    GridCase {
        base_mva: 100.0,
        buses,
        branches,
        generators,
        demand: DemandProfile { series },
        renewables,
    }
}

/// One day of `case` as a single-day case.
pub fn single_day(case: &GridCase, day: usize) -> GridCase {
    let cut = |s: &Vec<f64>| s[day * DAY..(day + 1) * DAY].to_vec();
    let mut c = case.clone();
    for s in c.demand.series.values_mut() {
        *s = cut(s);
    }
    for r in &mut c.renewables {
        r.series = cut(&r.series);
    }
    c
}
