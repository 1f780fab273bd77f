//! Bundled 30-bus demonstration case with 61 synthetic summer days.
//!
//! Three regions of ten buses each: North holds cheap coal and wind, Central
//! holds most of the load and the gas fleet, West has solar, a small
//! expensive peaker and reaches Central over two limited tie lines. Load
//! added in West congests the ties around the afternoon peak; load added in
//! North just moves the system price along the merit order.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::case::{
    Branch, Bus, BusId, CostCurve, DemandProfile, Generator, GridCase, Renewable, Segment, Status, DAY,
};
use crate::dr::{DrProgram, MiningEconomics};

pub const DAYS: usize = 61;
pub const HORIZON: usize = DAYS * DAY;
pub const SEED: u64 = 2021;

/// Per-region tie-line limit between West and Central, MW.
pub const WEST_TIE_LIMIT: f64 = 110.0;

const NORTH: [BusId; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
const CENTRAL: [BusId; 10] = [11, 12, 13, 14, 15, 16, 17, 18, 19, 20];
const WEST: [BusId; 10] = [21, 22, 23, 24, 25, 26, 27, 28, 29, 30];

fn unit(bus: BusId, p_min: f64, p_max: f64, segments: &[(f64, f64)]) -> Generator {
    Generator {
        bus,
        p_min,
        p_max,
        ramp_limit: None,
        startup_cost: 0.0,
        no_load_cost: 0.0,
        cost_curve: CostCurve {
            segments: segments
                .iter()
                .map(|&(breakpoint_mw, slope)| Segment { breakpoint_mw, slope })
                .collect(),
        },
        status: Status::In,
    }
}

fn coal(bus: BusId, p_min: f64, p_max: f64, segments: &[(f64, f64)], ramp: f64) -> Generator {
    Generator {
        ramp_limit: Some(ramp),
        startup_cost: 4000.0,
        // Running at p_min is priced at the first segment's slope.
        no_load_cost: p_min * segments[0].1,
        ..unit(bus, p_min, p_max, segments)
    }
}

fn ring(buses: &[BusId], base_x: f64) -> Vec<Branch> {
    (0..buses.len())
        .map(|k| Branch {
            from_bus: buses[k],
            to_bus: buses[(k + 1) % buses.len()],
            reactance: base_x + 0.01 * (k % 3) as f64,
            flow_limit: None,
            status: Status::In,
        })
        .collect()
}

fn tie(from_bus: BusId, to_bus: BusId, reactance: f64, limit: f64) -> Branch {
    Branch {
        from_bus,
        to_bus,
        reactance,
        flow_limit: Some(limit),
        status: Status::In,
    }
}

/// Hour-of-day load shape peaking at 16:00; `depth` is the night-time
/// fraction of peak.
fn load_shape(h: usize, depth: f64, width: f64) -> f64 {
    let z = (h as f64 - 16.0) / width;
    depth + (1.0 - depth) * (-z * z).exp()
}

fn solar_shape(h: usize) -> f64 {
    let x = (h as f64 - 6.0) / 14.0;
    if (0.0..=1.0).contains(&x) {
        (std::f64::consts::PI * x).sin()
    } else {
        0.0
    }
}

fn wind_shape(h: usize) -> f64 {
    0.55 + 0.3 * (2.0 * std::f64::consts::PI * (h as f64 - 3.0) / 24.0).cos()
}

pub fn demo_case() -> GridCase {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let day_factor: Vec<f64> = (0..DAYS)
        .map(|d| {
            let weekly = 0.05 * (2.0 * std::f64::consts::PI * d as f64 / 7.0).sin();
            let season = 0.05 * (std::f64::consts::PI * d as f64 / (DAYS - 1) as f64).sin();
            1.0 + weekly + season + rng.random_range(-0.04..0.04)
        })
        .collect();
    let cloud: Vec<f64> = (0..DAYS).map(|_| rng.random_range(0.5..1.0)).collect();
    let gust: Vec<f64> = (0..DAYS).map(|_| rng.random_range(0.4..1.2)).collect();

    let county = |id: BusId| match id {
        1..=10 => Some("Lamb".to_string()),
        11..=19 => Some("Travis".to_string()),
        21..=29 => Some("Pecos".to_string()),
        _ => None,
    };
    let buses = (1..=30).map(|id| Bus { id, county: county(id) }).collect();

    let mut branches = ring(&NORTH, 0.05);
    branches.extend(ring(&CENTRAL, 0.04));
    branches.extend(ring(&WEST, 0.06));
    branches.push(tie(3, 11, 0.08, 600.0));
    branches.push(tie(8, 16, 0.08, 600.0));
    branches.push(tie(21, 13, 0.1, WEST_TIE_LIMIT));
    branches.push(tie(26, 14, 0.1, WEST_TIE_LIMIT));

    let generators = vec![
        coal(2, 100.0, 300.0, &[(200.0, 16.0), (300.0, 17.0)], 120.0),
        coal(7, 100.0, 250.0, &[(250.0, 18.5)], 100.0),
        unit(12, 0.0, 300.0, &[(150.0, 22.0), (300.0, 25.0)]),
        unit(17, 0.0, 250.0, &[(125.0, 24.0), (250.0, 28.0)]),
        unit(15, 0.0, 200.0, &[(100.0, 38.0), (200.0, 48.0)]),
        unit(19, 0.0, 200.0, &[(200.0, 65.0)]),
        unit(28, 0.0, 80.0, &[(80.0, 95.0)]),
    ];

    // Peak MW per bus at a day factor of 1.
    let north_peak = [20.0, 30.0, 25.0, 35.0, 20.0, 30.0, 25.0, 30.0, 35.0, 25.0];
    let central_peak = [60.0, 80.0, 70.0, 75.0, 65.0, 70.0, 80.0, 60.0, 70.0, 60.0];
    let west_peak = [15.0, 20.0, 25.0, 15.0, 20.0, 25.0, 15.0, 20.0, 15.0, 20.0];
    let mut series = BTreeMap::new();
    for (ids, peaks, depth, width) in [
        (&NORTH, &north_peak, 0.55, 4.0),
        (&CENTRAL, &central_peak, 0.55, 4.0),
        (&WEST, &west_peak, 0.35, 3.5),
    ] {
        for (&id, &peak) in ids.iter().zip(peaks.iter()) {
            let s = (0..HORIZON)
                .map(|t| peak * day_factor[t / DAY] * load_shape(t % DAY, depth, width))
                .collect();
            series.insert(id, s);
        }
    }

    let renewables = vec![
        Renewable {
            bus: 5,
            series: (0..HORIZON).map(|t| 250.0 * gust[t / DAY] * wind_shape(t % DAY)).collect(),
        },
        Renewable {
            bus: 25,
            series: (0..HORIZON).map(|t| 150.0 * cloud[t / DAY] * solar_shape(t % DAY)).collect(),
        },
    ];

    GridCase {
        base_mva: 100.0,
        buses,
        branches,
        generators,
        demand: DemandProfile { series },
        renewables,
    }
}

/// Small three-bus case over two days: cheap supply at bus 1, a dearer
/// unit at bus 3 and a 100 MW limit on line 1-2.
pub fn three_bus_case() -> GridCase {
    let shape = |h: usize| 0.8 + 0.2 * load_shape(h, 0.0, 4.0);
    let series = |peak: f64| (0..2 * DAY).map(|t| peak * shape(t % DAY)).collect::<Vec<_>>();
    GridCase {
        base_mva: 100.0,
        buses: vec![
            Bus { id: 1, county: Some("Lamb".into()) },
            Bus { id: 2, county: Some("Travis".into()) },
            Bus { id: 3, county: None },
        ],
        branches: vec![
            tie(1, 2, 0.1, 100.0),
            Branch { from_bus: 2, to_bus: 3, reactance: 0.1, flow_limit: None, status: Status::In },
            tie(1, 3, 0.1, 120.0),
        ],
        generators: vec![
            unit(1, 0.0, 250.0, &[(250.0, 10.0)]),
            Generator {
                ramp_limit: Some(80.0),
                ..unit(3, 0.0, 200.0, &[(100.0, 30.0), (200.0, 35.0)])
            },
        ],
        demand: DemandProfile {
            series: BTreeMap::from([(2, series(150.0)), (3, series(60.0))]),
        },
        renewables: vec![],
    }
}

/// Three candidate siting sets of three buses each.
pub fn location_sets() -> BTreeMap<String, Vec<BusId>> {
    BTreeMap::from([
        ("A".to_string(), vec![24, 27, 29]),
        ("B".to_string(), vec![4, 6, 9]),
        ("C".to_string(), vec![14, 16, 20]),
    ])
}

/// The West set, behind the limited ties.
pub const CONGESTED_SET: &str = "A";
/// The North set, next to cheap supply.
pub const UNCONGESTED_SET: &str = "B";
/// Total mining MW used for the headline comparison.
pub const COMPARISON_MW: f64 = 90.0;
/// Totals for the hosting-capacity sweep.
pub const SWEEP_MW: [f64; 7] = [0.0, 60.0, 90.0, 120.0, 150.0, 180.0, 240.0];

/// Coin price and difficulty giving a net reward near 175 $/MWh less a
/// flat 30 $/MWh supply price, with a mild drift.
pub fn demo_economics(intervals: usize) -> MiningEconomics {
    let mut econ = MiningEconomics::constant(25_000.0, 143.0, 30.0, intervals);
    for (t, p) in econ.btc_usd.iter_mut().enumerate() {
        *p *= 1.0 + 0.05 * (t as f64 / intervals.max(1) as f64);
    }
    econ
}

/// RRS-like and ERS-like reserve records.
pub fn demo_programs(intervals: usize) -> Vec<DrProgram> {
    vec![
        DrProgram::synthetic_reserve("rrs", intervals, 11.27, 0.01, SEED),
        DrProgram::synthetic_reserve("ers", intervals, 6.5, 0.002, SEED + 1),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_case_is_valid() {
        let case = demo_case();
        case.validate().unwrap();
        assert_eq!(case.buses.len(), 30);
        assert_eq!(case.horizon(), HORIZON);
        assert_eq!(case.num_days(), DAYS);
        for buses in location_sets().values() {
            assert!(buses.iter().all(|&b| case.has_bus(b)));
        }
    }

    #[test]
    fn three_bus_case_is_valid() {
        let case = three_bus_case();
        case.validate().unwrap();
        assert_eq!(case.num_days(), 2);
    }

    #[test]
    fn demo_case_is_reproducible() {
        assert_eq!(demo_case().content_hash(), demo_case().content_hash());
    }

    #[test]
    fn reserve_records_have_the_horizon_length() {
        for p in demo_programs(HORIZON) {
            p.validate(HORIZON).unwrap();
        }
        demo_economics(HORIZON).validate().unwrap();
    }
}
