//! Grid cases: network, generators, hourly demand and renewable profiles.
//!
//! A [`GridCase`] is only ever handed out after [`GridCase::validate`] has
//! accepted it, so downstream code can rely on the invariants listed there.

mod mcase;
mod native;
mod profile;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use mcase::{parse_mcase, parse_mcase_with, to_mcase, McaseOptions};
pub use native::{parse_case, round_trip, to_native_json};
pub use profile::{parse_county_csv, parse_profile_csv, write_profile_csv};

pub type BusId = u32;

/// Hours per market day.
pub const DAY: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{location}: references unknown bus {bus}")]
    DanglingBus { location: String, bus: BusId },
    #[error("{location}: {message}")]
    Invalid { location: String, message: String },
    #[error("network is split into {islands} islands (bus {bus} is not connected to bus {root})")]
    Island { islands: usize, root: BusId, bus: BusId },
    #[error("missing block `{0}`")]
    MissingBlock(String),
    #[error("{block} row {row}: expected {expected} columns, found {found}")]
    ColumnCount {
        block: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("mpc.gencost row {row}: cost polynomial is not convex")]
    NonConvexCost { row: usize },
    #[error("mpc.branch row {row}: zero reactance on an in-service branch")]
    ZeroReactance { row: usize },
}

impl CaseError {
    pub(crate) fn invalid(location: impl Into<String>, message: impl Into<String>) -> Self {
        CaseError::Invalid {
            location: location.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: BusId,
    #[serde(default)]
    pub county: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    #[default]
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    pub from_bus: BusId,
    pub to_bus: BusId,
    /// Series reactance, per unit.
    pub reactance: f64,
    /// MW rating; `None` leaves the branch unmonitored.
    pub flow_limit: Option<f64>,
    #[serde(default)]
    pub status: Status,
}

impl Branch {
    pub fn in_service(&self) -> bool {
        self.status == Status::In
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub breakpoint_mw: f64,
    /// $/MWh over the segment ending at `breakpoint_mw`.
    pub slope: f64,
}

/// Convex piecewise-linear energy cost above `p_min`.
///
/// The first segment starts at the generator's `p_min`; the cost of
/// producing `p_min` itself is carried by `no_load_cost`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostCurve {
    pub segments: Vec<Segment>,
}

impl CostCurve {
    /// `(width, slope)` of each segment measured from `p_min`.
    pub fn widths(&self, p_min: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mut prev = p_min;
        self.segments.iter().map(move |s| {
            let w = s.breakpoint_mw - prev;
            prev = s.breakpoint_mw;
            (w, s.slope)
        })
    }

    /// Energy cost of producing `p` MW above `p_min`.
    pub fn cost_above_min(&self, p_min: f64, p: f64) -> f64 {
        let mut rest = (p - p_min).max(0.0);
        let mut total = 0.0;
        for (w, slope) in self.widths(p_min) {
            let take = rest.min(w);
            total += take * slope;
            rest -= take;
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub bus: BusId,
    pub p_min: f64,
    pub p_max: f64,
    /// MW/h; `None` means unlimited.
    pub ramp_limit: Option<f64>,
    pub startup_cost: f64,
    /// $/h while committed, including the cost of running at `p_min`.
    pub no_load_cost: f64,
    pub cost_curve: CostCurve,
    #[serde(default)]
    pub status: Status,
}

impl Generator {
    pub fn in_service(&self) -> bool {
        self.status == Status::In
    }

    /// Whether commitment is a real decision for this unit. Units with no
    /// minimum output and no fixed costs can be left committed for free.
    pub fn needs_commitment(&self) -> bool {
        self.p_min > 0.0 || self.no_load_cost > 0.0 || self.startup_cost > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Renewable {
    pub bus: BusId,
    /// Available MW per interval; dispatch may curtail below it.
    pub series: Vec<f64>,
}

/// Hourly demand keyed by bus. Buses without an entry draw nothing.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DemandProfile {
    pub series: BTreeMap<BusId, Vec<f64>>,
}

impl DemandProfile {
    pub fn at(&self, bus: BusId, t: usize) -> f64 {
        self.series.get(&bus).map_or(0.0, |s| s[t])
    }

    pub fn len(&self) -> Option<usize> {
        self.series.values().next().map(Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCase {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    pub demand: DemandProfile,
    pub renewables: Vec<Renewable>,
}

impl GridCase {
    /// Number of hourly intervals in the profiles.
    pub fn horizon(&self) -> usize {
        self.demand
            .len()
            .or_else(|| self.renewables.first().map(|r| r.series.len()))
            .unwrap_or(0)
    }

    pub fn num_days(&self) -> usize {
        self.horizon() / DAY
    }

    pub fn bus_ids(&self) -> Vec<BusId> {
        self.buses.iter().map(|b| b.id).collect()
    }

    pub fn has_bus(&self, id: BusId) -> bool {
        self.buses.iter().any(|b| b.id == id)
    }

    pub fn county_of(&self, id: BusId) -> Option<&str> {
        self.buses.iter().find(|b| b.id == id).and_then(|b| b.county.as_deref())
    }

    pub fn total_demand(&self, t: usize) -> f64 {
        self.demand.series.values().map(|s| s[t]).sum()
    }

    /// SHA-256 of the canonical native serialisation, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(to_native_json(self).as_bytes()))
    }

    /// Checks every structural invariant; the first violation is returned.
    pub fn validate(&self) -> Result<(), CaseError> {
        if !(self.base_mva.is_finite() && self.base_mva > 0.0) {
            return Err(CaseError::invalid("base_mva", "must be positive"));
        }
        if self.buses.is_empty() {
            return Err(CaseError::invalid("buses", "case has no buses"));
        }
        let mut ids = HashSet::new();
        for (k, b) in self.buses.iter().enumerate() {
            if !ids.insert(b.id) {
                return Err(CaseError::invalid(format!("buses[{k}].id"), format!("duplicate bus id {}", b.id)));
            }
            if let Some(c) = &b.county {
                if c.trim().is_empty() {
                    return Err(CaseError::invalid(format!("buses[{k}].county"), "empty county name"));
                }
            }
        }
        let known = |location: String, bus: BusId| {
            if ids.contains(&bus) {
                Ok(())
            } else {
                Err(CaseError::DanglingBus { location, bus })
            }
        };

        for (k, br) in self.branches.iter().enumerate() {
            known(format!("branches[{k}].from_bus"), br.from_bus)?;
            known(format!("branches[{k}].to_bus"), br.to_bus)?;
            if br.from_bus == br.to_bus {
                return Err(CaseError::invalid(format!("branches[{k}]"), "branch connects a bus to itself"));
            }
            let x_ok = if br.in_service() {
                br.reactance.is_finite() && br.reactance > 0.0
            } else {
                br.reactance.is_finite() && br.reactance >= 0.0
            };
            if !x_ok {
                return Err(CaseError::invalid(
                    format!("branches[{k}].reactance"),
                    format!("reactance {} must be positive", br.reactance),
                ));
            }
            if let Some(lim) = br.flow_limit {
                if !(lim.is_finite() && lim > 0.0) {
                    return Err(CaseError::invalid(
                        format!("branches[{k}].flow_limit"),
                        format!("limit {lim} must be positive"),
                    ));
                }
            }
        }

        for (k, g) in self.generators.iter().enumerate() {
            let loc = |f: &str| format!("generators[{k}].{f}");
            known(loc("bus"), g.bus)?;
            if !(g.p_min.is_finite() && g.p_min >= 0.0) {
                return Err(CaseError::invalid(loc("p_min"), "must be a finite value >= 0"));
            }
            if !(g.p_max.is_finite() && g.p_max >= g.p_min) {
                return Err(CaseError::invalid(loc("p_max"), "must be finite and >= p_min"));
            }
            if let Some(r) = g.ramp_limit {
                if r.is_nan() || r <= 0.0 {
                    return Err(CaseError::invalid(loc("ramp_limit"), "must be positive"));
                }
            }
            for (f, v) in [("startup_cost", g.startup_cost), ("no_load_cost", g.no_load_cost)] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(CaseError::invalid(loc(f), "must be a finite value >= 0"));
                }
            }
            validate_curve(&g.cost_curve, g.p_min, g.p_max, &loc("cost_curve"))?;
        }

        let horizon = self.horizon();
        if !horizon.is_multiple_of(DAY) {
            return Err(CaseError::invalid("demand", format!("{horizon} intervals is not a whole number of days")));
        }
        for (bus, series) in &self.demand.series {
            known(format!("demand.{bus}"), *bus)?;
            check_series(series, horizon, &format!("demand.{bus}"))?;
        }
        for (k, r) in self.renewables.iter().enumerate() {
            known(format!("renewables[{k}].bus"), r.bus)?;
            check_series(&r.series, horizon, &format!("renewables[{k}].series"))?;
        }

        self.check_connected()
    }

    fn check_connected(&self) -> Result<(), CaseError> {
        let index: HashMap<BusId, usize> = self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        let mut parent: Vec<usize> = (0..self.buses.len()).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for br in self.branches.iter().filter(|b| b.in_service()) {
            let a = find(&mut parent, index[&br.from_bus]);
            let b = find(&mut parent, index[&br.to_bus]);
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let roots: Vec<usize> = (0..parent.len()).map(|i| find(&mut parent, i)).collect();
        let islands = roots.iter().enumerate().filter(|&(i, &r)| i == r).count();
        if islands > 1 {
            let stray = roots.iter().position(|&r| r != roots[0]).unwrap_or(0);
            return Err(CaseError::Island {
                islands,
                root: self.buses[0].id,
                bus: self.buses[stray].id,
            });
        }
        Ok(())
    }
}

fn validate_curve(curve: &CostCurve, p_min: f64, p_max: f64, loc: &str) -> Result<(), CaseError> {
    let segs = &curve.segments;
    if p_max == p_min {
        if !segs.is_empty() {
            return Err(CaseError::invalid(loc, "fixed-output unit must have no cost segments"));
        }
        return Ok(());
    }
    if segs.is_empty() {
        return Err(CaseError::invalid(loc, "no cost segments"));
    }
    let mut prev_bp = p_min;
    let mut prev_slope = f64::NEG_INFINITY;
    for (k, s) in segs.iter().enumerate() {
        if !s.breakpoint_mw.is_finite() || !s.slope.is_finite() {
            return Err(CaseError::invalid(format!("{loc}.segments[{k}]"), "non-finite value"));
        }
        if s.breakpoint_mw <= prev_bp {
            return Err(CaseError::invalid(
                format!("{loc}.segments[{k}].breakpoint_mw"),
                "breakpoints must be strictly increasing above p_min",
            ));
        }
        if s.slope < prev_slope {
            return Err(CaseError::invalid(
                format!("{loc}.segments[{k}].slope"),
                format!("non-convex cost curve: slope {} after {}", s.slope, prev_slope),
            ));
        }
        prev_bp = s.breakpoint_mw;
        prev_slope = s.slope;
    }
    if (prev_bp - p_max).abs() > 1e-9 * p_max.abs().max(1.0) {
        return Err(CaseError::invalid(
            loc,
            format!("final breakpoint {prev_bp} must equal p_max {p_max}"),
        ));
    }
    Ok(())
}

fn check_series(series: &[f64], horizon: usize, loc: &str) -> Result<(), CaseError> {
    if series.len() != horizon {
        return Err(CaseError::invalid(
            loc,
            format!("series has {} intervals, expected {horizon}", series.len()),
        ));
    }
    if let Some(t) = series.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(CaseError::invalid(format!("{loc}[{t}]"), "must be a finite value >= 0"));
    }
    Ok(())
}
