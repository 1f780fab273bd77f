//! Mining-load scenarios and capacity × location sweeps.

use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{compare, compute_stats, ComparisonRow, LmpStats, StatsOptions};
use crate::case::{BusId, GridCase};
use crate::market::{run_horizon, DayStatus, MarketError, MarketOptions, PriceRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MiningError {
    #[error("mining facility at unknown bus {0}")]
    UnknownBus(BusId),
    #[error("mining facility at bus {bus} has invalid capacity {capacity} MW")]
    Capacity { bus: BusId, capacity: f64 },
    #[error("location set `{0}` is empty")]
    EmptySet(String),
    #[error("bad sweep specification: {0}")]
    Spec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Facility {
    pub bus: BusId,
    /// MW.
    pub capacity: f64,
}

/// How a facility's draw varies over time.
pub trait LoadStrategy {
    fn load(&self, facility: &Facility, interval: usize) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Full rated capacity in every interval.
    #[default]
    FixedUniform,
}

impl LoadStrategy for Strategy {
    fn load(&self, facility: &Facility, _interval: usize) -> f64 {
        match self {
            Strategy::FixedUniform => facility.capacity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiningScenario {
    pub facilities: Vec<Facility>,
    #[serde(default)]
    pub strategy: Strategy,
    pub label: String,
}

impl MiningScenario {
    /// Splits `total` MW equally over `buses`.
    pub fn equal_split(label: impl Into<String>, buses: &[BusId], total: f64) -> Self {
        let each = total / buses.len() as f64;
        MiningScenario {
            facilities: buses.iter().map(|&bus| Facility { bus, capacity: each }).collect(),
            strategy: Strategy::FixedUniform,
            label: label.into(),
        }
    }

    pub fn total(&self) -> f64 {
        self.facilities.iter().map(|f| f.capacity).sum()
    }

    pub fn validate(&self, case: &GridCase) -> Result<(), MiningError> {
        for f in &self.facilities {
            if !case.has_bus(f.bus) {
                return Err(MiningError::UnknownBus(f.bus));
            }
            if !(f.capacity.is_finite() && f.capacity > 0.0) {
                return Err(MiningError::Capacity {
                    bus: f.bus,
                    capacity: f.capacity,
                });
            }
        }
        Ok(())
    }
}

/// Returns a copy of `case` with every facility's draw added to its bus demand.
pub fn inject(case: &GridCase, scenario: &MiningScenario) -> Result<GridCase, MiningError> {
    scenario.validate(case)?;
    let mut out = case.clone();
    let horizon = case.horizon();
    for f in &scenario.facilities {
        let series = out.demand.series.entry(f.bus).or_insert_with(|| vec![0.0; horizon]);
        for (t, d) in series.iter_mut().enumerate() {
            *d += scenario.strategy.load(f, t);
        }
    }
    Ok(out)
}

/// Sweep input: `{location_sets: {name: [bus,...]}, capacities_mw: [...], days: [start,end]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub location_sets: BTreeMap<String, Vec<BusId>>,
    pub capacities_mw: Vec<f64>,
    pub days: [usize; 2],
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self, MiningError> {
        let spec: SweepSpec = serde_json::from_str(text).map_err(|e| MiningError::Spec(e.to_string()))?;
        if spec.days[0] > spec.days[1] {
            return Err(MiningError::Spec(format!("days {:?} are reversed", spec.days)));
        }
        if let Some(c) = spec.capacities_mw.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(MiningError::Spec(format!("capacity {c} MW")));
        }
        if let Some((name, _)) = spec.location_sets.iter().find(|(_, b)| b.is_empty()) {
            return Err(MiningError::EmptySet(name.clone()));
        }
        Ok(spec)
    }

    pub fn day_range(&self) -> Range<usize> {
        self.days[0]..self.days[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    /// Location set name; `None` for the baseline.
    pub set: Option<String>,
    pub total_mw: f64,
    pub per_facility_mw: f64,
    pub record: PriceRecord,
    /// `None` when every day failed.
    pub stats: Option<LmpStats>,
}

impl SweepCell {
    pub fn id(&self) -> String {
        match &self.set {
            Some(s) => format!("{s}_{}mw", self.total_mw),
            None => "baseline".to_string(),
        }
    }

    pub fn optimal_days(&self) -> usize {
        self.record.count(DayStatus::Optimal)
    }

    pub fn infeasible_days(&self) -> usize {
        self.record.count(DayStatus::Infeasible)
    }

    pub fn failed_days(&self) -> usize {
        self.record.count(DayStatus::FailedToConverge)
    }

    /// Days that did not clear, for either reason.
    pub fn lost_days(&self) -> Vec<usize> {
        self.record
            .days
            .iter()
            .filter(|d| d.status != DayStatus::Optimal)
            .map(|d| d.day)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub baseline: SweepCell,
    /// Ordered by set name, then capacity as given.
    pub cells: Vec<SweepCell>,
    pub stats_options: StatsOptions,
}

impl SweepReport {
    pub fn comparison(&self, cell: &SweepCell) -> Option<ComparisonRow> {
        let base = self.baseline.stats.as_ref()?;
        compare(base, cell.stats.as_ref()?, self.stats_options.peak_window).ok()
    }

    /// Within each set, a day lost at some capacity stays lost at every
    /// larger capacity.
    pub fn lost_days_monotone(&self) -> bool {
        let mut by_set: BTreeMap<&str, Vec<&SweepCell>> = BTreeMap::new();
        for c in &self.cells {
            by_set.entry(c.set.as_deref().unwrap_or("")).or_default().push(c);
        }
        by_set.values_mut().all(|cells| {
            cells.sort_by(|a, b| a.total_mw.total_cmp(&b.total_mw));
            cells.windows(2).all(|w| {
                let later = w[1].lost_days();
                w[0].lost_days().iter().all(|d| later.contains(d))
            })
        })
    }

    /// One row per cell, baseline first.
    pub fn summary_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "cell",
            "location_set",
            "total_mw",
            "per_facility_mw",
            "optimal_days",
            "infeasible_days",
            "failed_days",
            "overall_mean",
            "peak_mean",
            "std_dev",
            "delta_overall",
            "delta_peak",
            "delta_std",
        ])
        .expect("in-memory write");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for cell in std::iter::once(&self.baseline).chain(&self.cells) {
            let s = cell.stats.as_ref().map(|s| s.summary());
            let d = self.comparison(cell);
            w.write_record([
                cell.id(),
                cell.set.clone().unwrap_or_default(),
                cell.total_mw.to_string(),
                cell.per_facility_mw.to_string(),
                cell.optimal_days().to_string(),
                cell.infeasible_days().to_string(),
                cell.failed_days().to_string(),
                opt(s.map(|s| s.overall_mean)),
                opt(s.map(|s| s.peak_mean)),
                opt(s.map(|s| s.std_dev)),
                opt(d.map(|d| d.delta_overall)),
                opt(d.map(|d| d.delta_peak)),
                opt(d.map(|d| d.delta_std)),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
    }
}

fn run_cell(
    case: &GridCase,
    set: Option<(&str, &[BusId])>,
    total: f64,
    days: Range<usize>,
    opts: &MarketOptions,
    stats: &StatsOptions,
) -> Result<SweepCell, MarketError> {
    let (scenario, per) = match set {
        Some((name, buses)) if total > 0.0 => {
            let s = MiningScenario::equal_split(format!("{name}_{total}mw"), buses, total);
            let per = s.facilities[0].capacity;
            (Some(s), per)
        }
        _ => (None, 0.0),
    };
    let record = run_horizon(case, scenario.as_ref(), days, opts)?;
    let stats_case = match &scenario {
        Some(s) => inject(case, s)?,
        None => case.clone(),
    };
    let lmp_stats = compute_stats(&record, &stats_case, stats).ok();
    Ok(SweepCell {
        set: set.map(|(n, _)| n.to_string()),
        total_mw: total,
        per_facility_mw: per,
        record,
        stats: lmp_stats,
    })
}

/// Runs the baseline and every (set, capacity) cell. Cells are independent
/// and run on the current rayon pool.
pub fn capacity_sweep(
    case: &GridCase,
    location_sets: &BTreeMap<String, Vec<BusId>>,
    capacities: &[f64],
    days: Range<usize>,
    opts: &MarketOptions,
    stats: &StatsOptions,
) -> Result<SweepReport, MarketError> {
    for (name, buses) in location_sets {
        if buses.is_empty() {
            return Err(MiningError::EmptySet(name.clone()).into());
        }
        if let Some(&b) = buses.iter().find(|&&b| !case.has_bus(b)) {
            return Err(MiningError::UnknownBus(b).into());
        }
    }
    type Job<'a> = (Option<(&'a str, &'a [BusId])>, f64);
    let jobs: Vec<Job> = std::iter::once((None, 0.0))
        .chain(location_sets.iter().flat_map(|(name, buses)| {
            capacities.iter().map(move |&c| (Some((name.as_str(), buses.as_slice())), c))
        }))
        .collect();
    let mut cells = jobs
        .into_par_iter()
        .map(|(set, total)| run_cell(case, set, total, days.clone(), opts, stats))
        .collect::<Result<Vec<_>, _>>()?;
    let baseline = cells.remove(0);
    Ok(SweepReport {
        baseline,
        cells,
        stats_options: *stats,
    })
}
