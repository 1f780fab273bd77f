//! Day-ahead unit commitment, real-time dispatch and LMP extraction.
//!
//! `LMP_n = λ + Σ_l PTDF_{l,n} (μ⁻_l − μ⁺_l)` where λ is the dual of the
//! hourly balance row and μ± are the duals of the upper / lower flow limits.

mod formulation;
mod record;

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::{CaseError, GridCase, DAY};
use crate::lp::{solve_lp_with, solve_mbp, LpError, LpStatus, MbpOptions, MbpOutcome, MixedBinaryProgram};
use crate::mining::{inject, MiningError, MiningScenario};
use crate::network::{NetworkError, NetworkModel, Reference};

use formulation::{build_day, Mode};
pub use record::{DayRecord, PriceRecord, RecordError, RecordMetadata};

#[derive(Debug, Error)]
pub enum MarketError {
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Mining(#[from] MiningError),
    #[error("solver rejected the day {day} program: {source}")]
    Program { day: usize, source: LpError },
    #[error("day {day} is outside the {days}-day profile horizon")]
    DayOutOfRange { day: usize, days: usize },
    #[error("schedule is for day {schedule}, dispatch requested for day {day}")]
    ScheduleMismatch { schedule: usize, day: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayStatus {
    Optimal,
    Infeasible,
    FailedToConverge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketOptions {
    pub mbp: MbpOptions,
    pub reference: Reference,
}

impl Default for MarketOptions {
    fn default() -> Self {
        MarketOptions {
            mbp: MbpOptions::default(),
            reference: Reference::Auto,
        }
    }
}

/// End-of-day state of one unit, used as the next day's ramp baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitState {
    pub on: bool,
    pub output: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommitmentSchedule {
    pub day: usize,
    /// `[generator][hour]`; out-of-service units are always off.
    pub on_off: Vec<Vec<bool>>,
    /// SCUC objective including no-load and startup costs.
    pub objective: f64,
}

impl CommitmentSchedule {
    pub fn startups(&self, init: &[Option<UnitState>]) -> usize {
        let mut n = 0;
        for (g, hours) in self.on_off.iter().enumerate() {
            let mut prev = init.get(g).copied().flatten().map(|s| s.on);
            for &on in hours {
                if on && prev == Some(false) {
                    n += 1;
                }
                prev = Some(on);
            }
        }
        n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScucOutcome {
    Scheduled(CommitmentSchedule),
    Infeasible { day: usize },
    FailedToConverge { day: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalDispatch {
    /// MW per generator.
    pub generation: Vec<f64>,
    /// MW per renewable after curtailment.
    pub renewable: Vec<f64>,
    pub system_lambda: f64,
    /// Dual of the upper (`+limit`) flow bound per monitored line, >= 0.
    pub congestion_upper: Vec<f64>,
    /// Dual of the lower (`-limit`) flow bound per monitored line, >= 0.
    pub congestion_lower: Vec<f64>,
    /// $/MWh per bus, ordered like `NetworkModel::bus_ids`.
    pub lmp: Vec<f64>,
    pub flows: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchResult {
    pub day: usize,
    pub status: DayStatus,
    pub intervals: Vec<IntervalDispatch>,
    /// Total cost including fixed commitment costs; `NaN` when not optimal.
    pub objective: f64,
    pub detail: Option<String>,
}

impl DispatchResult {
    fn failed(day: usize, status: DayStatus, detail: String) -> Self {
        DispatchResult {
            day,
            status,
            intervals: Vec::new(),
            objective: f64::NAN,
            detail: Some(detail),
        }
    }

    /// Unit states after the last hour, for the next day's ramp limits.
    pub fn final_state(&self, schedule: &CommitmentSchedule) -> Vec<Option<UnitState>> {
        match self.intervals.last() {
            Some(last) => schedule
                .on_off
                .iter()
                .zip(&last.generation)
                .map(|(on, &p)| {
                    Some(UnitState {
                        on: on[DAY - 1],
                        output: p,
                    })
                })
                .collect(),
            None => vec![None; schedule.on_off.len()],
        }
    }
}

fn check_day(case: &GridCase, day: usize) -> Result<(), MarketError> {
    if day >= case.num_days() {
        return Err(MarketError::DayOutOfRange {
            day,
            days: case.num_days(),
        });
    }
    Ok(())
}

/// Day-ahead unit commitment for one day.
pub fn solve_scuc(
    net: &NetworkModel,
    case: &GridCase,
    day: usize,
    init: &[Option<UnitState>],
    opts: &MarketOptions,
) -> Result<ScucOutcome, MarketError> {
    check_day(case, day)?;
    let prog = build_day(net, case, day, init, Mode::Commit);
    let mbp = MixedBinaryProgram::new(prog.lp.clone(), prog.binaries.clone());
    let sol = solve_mbp(&mbp, &opts.mbp).map_err(|source| MarketError::Program { day, source })?;
    match sol.outcome {
        MbpOutcome::Optimal => {}
        MbpOutcome::Infeasible | MbpOutcome::Unbounded => return Ok(ScucOutcome::Infeasible { day }),
        MbpOutcome::FailedToConverge => {
            return Ok(ScucOutcome::FailedToConverge {
                day,
                reason: sol.failure.unwrap_or_default(),
            })
        }
    }
    let inc = sol.incumbent.expect("optimal outcome carries an incumbent");
    let on_off = (0..case.generators.len())
        .map(|g| {
            (0..DAY)
                .map(|h| match (prog.commit_vars[g][h], prog.commit_fixed[g][h]) {
                    (Some(v), _) => inc.x[v.0] > 0.5,
                    (None, Some(on)) => on,
                    (None, None) => false,
                })
                .collect()
        })
        .collect();
    Ok(ScucOutcome::Scheduled(CommitmentSchedule {
        day,
        on_off,
        objective: inc.objective + prog.constant_cost,
    }))
}

/// Real-time dispatch with commitments fixed; one LP couples the day's hours
/// through the ramp limits.
pub fn solve_sced(
    net: &NetworkModel,
    case: &GridCase,
    schedule: &CommitmentSchedule,
    day: usize,
    init: &[Option<UnitState>],
    opts: &MarketOptions,
) -> Result<DispatchResult, MarketError> {
    check_day(case, day)?;
    if schedule.day != day {
        return Err(MarketError::ScheduleMismatch {
            schedule: schedule.day,
            day,
        });
    }
    let prog = build_day(net, case, day, init, Mode::Dispatch(schedule));
    let sol = match solve_lp_with(&prog.lp, &opts.mbp.simplex) {
        Ok(s) => s,
        Err(LpError::InvalidProgram(msg)) => {
            return Err(MarketError::Program {
                day,
                source: LpError::InvalidProgram(msg),
            })
        }
        Err(e) => return Ok(DispatchResult::failed(day, DayStatus::FailedToConverge, e.to_string())),
    };
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Ok(DispatchResult::failed(day, DayStatus::Infeasible, "dispatch infeasible".into()));
        }
        LpStatus::Unbounded => {
            return Ok(DispatchResult::failed(day, DayStatus::FailedToConverge, "dispatch unbounded".into()));
        }
    }

    let n = net.num_buses();
    let ng = case.generators.len();
    let demand_idx: Vec<(usize, &Vec<f64>)> = case
        .demand
        .series
        .iter()
        .map(|(b, s)| (net.bus_index(*b).expect("validated bus"), s))
        .collect();
    let mut intervals = Vec::with_capacity(DAY);
    for h in 0..DAY {
        let generation: Vec<f64> = (0..ng).map(|g| prog.output(&sol.x, g, h)).collect();
        let renewable: Vec<f64> = prog.ren_vars.iter().map(|v| sol.x[v[h].0]).collect();
        let lambda = sol.duals[prog.balance[h].0];
        let y: Vec<f64> = prog.line_rows[h].iter().map(|r| sol.duals[r.0]).collect();
        let mut lmp = vec![lambda; n];
        for (l, &yl) in y.iter().enumerate() {
            if yl != 0.0 {
                for (price, a) in lmp.iter_mut().zip(net.ptdf_row(l)) {
                    *price += a * yl;
                }
            }
        }
        let mut inj = vec![0.0; n];
        for (g, gen) in case.generators.iter().enumerate() {
            inj[net.bus_index(gen.bus).expect("validated bus")] += generation[g];
        }
        for (r, ren) in case.renewables.iter().enumerate() {
            inj[net.bus_index(ren.bus).expect("validated bus")] += renewable[r];
        }
        for &(b, s) in &demand_idx {
            inj[b] -= s[day * DAY + h];
        }
        let flows = (0..net.lines.len())
            .map(|l| net.ptdf_row(l).iter().zip(&inj).map(|(a, p)| a * p).sum())
            .collect();
        intervals.push(IntervalDispatch {
            generation,
            renewable,
            system_lambda: lambda,
            congestion_upper: y.iter().map(|&v| (-v).max(0.0)).collect(),
            congestion_lower: y.iter().map(|&v| v.max(0.0)).collect(),
            lmp,
            flows,
        });
    }
    Ok(DispatchResult {
        day,
        status: DayStatus::Optimal,
        intervals,
        objective: sol.objective + prog.constant_cost,
        detail: None,
    })
}

/// SCUC then SCED for one day.
pub fn clear_day(
    net: &NetworkModel,
    case: &GridCase,
    day: usize,
    init: &[Option<UnitState>],
    opts: &MarketOptions,
) -> Result<(Option<CommitmentSchedule>, DispatchResult), MarketError> {
    match solve_scuc(net, case, day, init, opts)? {
        ScucOutcome::Scheduled(schedule) => {
            let dispatch = solve_sced(net, case, &schedule, day, init, opts)?;
            Ok((Some(schedule), dispatch))
        }
        ScucOutcome::Infeasible { day } => Ok((
            None,
            DispatchResult::failed(day, DayStatus::Infeasible, "commitment infeasible".into()),
        )),
        ScucOutcome::FailedToConverge { day, reason } => {
            Ok((None, DispatchResult::failed(day, DayStatus::FailedToConverge, reason)))
        }
    }
}

/// Clears every day in `days` in order and records the LMPs.
///
/// Each day's final dispatch seeds the next day's ramp limits; after a
/// failed day the next one starts unconstrained.
pub fn run_horizon(
    case: &GridCase,
    scenario: Option<&MiningScenario>,
    days: Range<usize>,
    opts: &MarketOptions,
) -> Result<PriceRecord, MarketError> {
    let injected;
    let case = match scenario {
        Some(s) => {
            injected = inject(case, s)?;
            &injected
        }
        None => case,
    };
    if days.end > case.num_days() || days.start > days.end {
        return Err(MarketError::DayOutOfRange {
            day: days.end.saturating_sub(1),
            days: case.num_days(),
        });
    }
    let net = NetworkModel::build(case, opts.reference)?;
    let label = scenario.map_or_else(|| "baseline".to_string(), |s| s.label.clone());
    let mut record = PriceRecord::new(
        net.bus_ids.clone(),
        days.start,
        RecordMetadata {
            scenario: label,
            seed: 0,
            case_hash: case.content_hash(),
        },
    );
    let mut init: Vec<Option<UnitState>> = vec![None; case.generators.len()];
    for day in days {
        let (schedule, dispatch) = clear_day(&net, case, day, &init, opts)?;
        init = match (&schedule, dispatch.status) {
            (Some(s), DayStatus::Optimal) => dispatch.final_state(s),
            _ => vec![None; case.generators.len()],
        };
        record.push_day(&dispatch);
    }
    Ok(record)
}

#[cfg(test)]
mod tests;
