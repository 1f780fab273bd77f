//! Horizon price records and their CSV + JSON sidecar encoding.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::case::{BusId, DAY};

use super::{DayStatus, DispatchResult};

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("price CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("price sidecar: {0}")]
    Json(#[from] serde_json::Error),
    #[error("price record: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMetadata {
    pub scenario: String,
    pub seed: u64,
    pub case_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub day: usize,
    pub status: DayStatus,
    /// Total cost in $, absent for failed days.
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Per-bus LMPs over a run of whole days. Intervals of failed days hold
/// `None`, never zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceRecord {
    pub bus_ids: Vec<BusId>,
    pub first_day: usize,
    pub days: Vec<DayRecord>,
    /// `[bus][interval]`, interval 0 being hour 0 of `first_day`.
    pub lmp: Vec<Vec<Option<f64>>>,
    pub metadata: RecordMetadata,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    first_day: usize,
    intervals: usize,
    bus_ids: Vec<BusId>,
    days: Vec<DayRecord>,
    metadata: RecordMetadata,
    lmp_csv_sha256: String,
}

impl PriceRecord {
    pub fn new(bus_ids: Vec<BusId>, first_day: usize, metadata: RecordMetadata) -> Self {
        let n = bus_ids.len();
        PriceRecord {
            bus_ids,
            first_day,
            days: Vec::new(),
            lmp: vec![Vec::new(); n],
            metadata,
        }
    }

    pub fn push_day(&mut self, dispatch: &DispatchResult) {
        let ok = dispatch.status == DayStatus::Optimal;
        for (b, series) in self.lmp.iter_mut().enumerate() {
            for h in 0..DAY {
                series.push(if ok { Some(dispatch.intervals[h].lmp[b]) } else { None });
            }
        }
        self.days.push(DayRecord {
            day: dispatch.day,
            status: dispatch.status,
            objective: ok.then_some(dispatch.objective),
            detail: dispatch.detail.clone(),
        });
    }

    pub fn num_intervals(&self) -> usize {
        self.days.len() * DAY
    }

    pub fn interval_feasible(&self, t: usize) -> bool {
        self.days[t / DAY].status == DayStatus::Optimal
    }

    pub fn feasible_intervals(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_intervals()).filter(|&t| self.interval_feasible(t))
    }

    pub fn count(&self, status: DayStatus) -> usize {
        self.days.iter().filter(|d| d.status == status).count()
    }

    pub fn bus_position(&self, bus: BusId) -> Option<usize> {
        self.bus_ids.iter().position(|&b| b == bus)
    }

    /// Unweighted bus mean at interval `t`; `None` for infeasible intervals.
    pub fn average_lmp(&self, t: usize) -> Option<f64> {
        if !self.interval_feasible(t) || self.bus_ids.is_empty() {
            return None;
        }
        let sum: f64 = self.lmp.iter().map(|s| s[t].unwrap_or(0.0)).sum();
        Some(sum / self.bus_ids.len() as f64)
    }

    /// `interval,bus_id,lmp` rows; absent prices are empty cells.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["interval", "bus_id", "lmp"]).expect("in-memory write");
        let t0 = self.first_day * DAY;
        for t in 0..self.num_intervals() {
            for (b, bus) in self.bus_ids.iter().enumerate() {
                let price = self.lmp[b][t].map(|v| v.to_string()).unwrap_or_default();
                w.write_record([(t0 + t).to_string(), bus.to_string(), price])
                    .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
    }

    pub fn sidecar_json(&self) -> String {
        let csv = self.to_csv();
        let sidecar = Sidecar {
            first_day: self.first_day,
            intervals: self.num_intervals(),
            bus_ids: self.bus_ids.clone(),
            days: self.days.clone(),
            metadata: self.metadata.clone(),
            lmp_csv_sha256: hex::encode(Sha256::digest(csv.as_bytes())),
        };
        serde_json::to_string_pretty(&sidecar).expect("sidecar serialisation is infallible")
    }

    pub fn from_csv_and_sidecar(csv_text: &str, sidecar_json: &str) -> Result<Self, RecordError> {
        let side: Sidecar = serde_json::from_str(sidecar_json)?;
        if side.intervals != side.days.len() * DAY {
            return Err(RecordError::Shape(format!(
                "{} intervals for {} days",
                side.intervals,
                side.days.len()
            )));
        }
        let pos: HashMap<BusId, usize> = side.bus_ids.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        let mut lmp = vec![vec![None; side.intervals]; side.bus_ids.len()];
        let mut seen = vec![vec![false; side.intervals]; side.bus_ids.len()];
        let t0 = side.first_day * DAY;
        let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
        for rec in rdr.records() {
            let rec = rec?;
            let field = |k: usize| rec.get(k).unwrap_or("");
            let t: usize = field(0)
                .parse()
                .map_err(|_| RecordError::Shape(format!("bad interval `{}`", field(0))))?;
            let bus: BusId = field(1)
                .parse()
                .map_err(|_| RecordError::Shape(format!("bad bus id `{}`", field(1))))?;
            let b = *pos
                .get(&bus)
                .ok_or_else(|| RecordError::Shape(format!("bus {bus} not in sidecar")))?;
            let k = t
                .checked_sub(t0)
                .filter(|k| *k < side.intervals)
                .ok_or_else(|| RecordError::Shape(format!("interval {t} outside record")))?;
            seen[b][k] = true;
            lmp[b][k] = match field(2) {
                "" => None,
                s => Some(
                    s.parse()
                        .map_err(|_| RecordError::Shape(format!("bad price `{s}`")))?,
                ),
            };
        }
        if seen.iter().flatten().any(|s| !s) {
            return Err(RecordError::Shape("price CSV does not cover every bus and interval".into()));
        }
        let record = PriceRecord {
            bus_ids: side.bus_ids,
            first_day: side.first_day,
            days: side.days,
            lmp,
            metadata: side.metadata,
        };
        for t in 0..record.num_intervals() {
            let feasible = record.interval_feasible(t);
            if record.lmp.iter().any(|s| s[t].is_some() != feasible) {
                return Err(RecordError::Shape(format!("interval {t} prices disagree with its day status")));
            }
        }
        Ok(record)
    }
}
