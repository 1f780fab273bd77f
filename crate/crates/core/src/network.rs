//! DC network model: reference bus, reduced susceptance matrix and the PTDF
//! (shift-factor) rows of every monitored line.

use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, LU};
use thiserror::Error;

use crate::case::{BusId, GridCase};

/// Above this many buses PTDF rows are computed lazily per line.
pub const DENSE_PTDF_LIMIT: usize = 3000;

const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("unknown reference bus {0}")]
    UnknownReference(BusId),
    #[error("reduced susceptance matrix is singular: {0}")]
    Singular(String),
    #[error("injections sum to {0} MW, expected 0")]
    Unbalanced(f64),
    #[error("expected {expected} injections, got {found}")]
    Length { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    Auto,
    Bus(BusId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitoredLine {
    /// Index into `GridCase::branches`.
    pub branch: usize,
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub limit: f64,
}

#[derive(Debug)]
pub struct NetworkModel {
    pub reference_bus: BusId,
    /// Stable bus ordering used by every per-bus vector in this crate.
    pub bus_ids: Vec<BusId>,
    pub lines: Vec<MonitoredLine>,
    index: HashMap<BusId, usize>,
    rows: Vec<OnceLock<Vec<f64>>>,
    solver: ReducedSolver,
}

#[derive(Debug)]
struct ReducedSolver {
    /// Full-bus index → reduced index (`usize::MAX` for the reference).
    reduced: Vec<usize>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    matrix: DMatrix<f64>,
    reactance: Vec<f64>,
    ends: Vec<(usize, usize)>,
}

impl NetworkModel {
    pub fn build(case: &GridCase, reference: Reference) -> Result<Self, NetworkError> {
        let bus_ids = case.bus_ids();
        let index: HashMap<BusId, usize> = bus_ids.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        let reference_bus = match reference {
            Reference::Bus(b) if index.contains_key(&b) => b,
            Reference::Bus(b) => return Err(NetworkError::UnknownReference(b)),
            Reference::Auto => auto_reference(case),
        };
        let r = index[&reference_bus];
        let n = bus_ids.len();

        let mut reduced = vec![usize::MAX; n];
        let mut k = 0;
        for (i, slot) in reduced.iter_mut().enumerate() {
            if i != r {
                *slot = k;
                k += 1;
            }
        }

        let mut b = DMatrix::<f64>::zeros(n - 1, n - 1);
        for br in case.branches.iter().filter(|b| b.in_service()) {
            let y = 1.0 / br.reactance;
            let (i, j) = (reduced[index[&br.from_bus]], reduced[index[&br.to_bus]]);
            if i != usize::MAX {
                b[(i, i)] += y;
            }
            if j != usize::MAX {
                b[(j, j)] += y;
            }
            if i != usize::MAX && j != usize::MAX {
                b[(i, j)] -= y;
                b[(j, i)] -= y;
            }
        }

        let lu = b.clone().lu();
        if n > 1 {
            let u = lu.u();
            let diag: Vec<f64> = (0..n - 1).map(|i| u[(i, i)].abs()).collect();
            let max = diag.iter().cloned().fold(0.0, f64::max);
            let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
            if max.is_nan() || max <= 0.0 || min <= 1e-12 * max {
                return Err(NetworkError::Singular(format!("pivot ratio {:e}", min / max)));
            }
        }

        let mut lines = Vec::new();
        let mut reactance = Vec::new();
        let mut ends = Vec::new();
        for (k, br) in case.branches.iter().enumerate() {
            if let (true, Some(limit)) = (br.in_service(), br.flow_limit) {
                lines.push(MonitoredLine {
                    branch: k,
                    from_bus: br.from_bus,
                    to_bus: br.to_bus,
                    limit,
                });
                reactance.push(br.reactance);
                ends.push((index[&br.from_bus], index[&br.to_bus]));
            }
        }

        let model = NetworkModel {
            reference_bus,
            bus_ids,
            rows: (0..lines.len()).map(|_| OnceLock::new()).collect(),
            lines,
            index,
            solver: ReducedSolver {
                reduced,
                lu,
                matrix: b,
                reactance,
                ends,
            },
        };
        if n <= DENSE_PTDF_LIMIT {
            for l in 0..model.lines.len() {
                model.try_row(l)?;
            }
        }
        Ok(model)
    }

    pub fn num_buses(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn bus_index(&self, bus: BusId) -> Option<usize> {
        self.index.get(&bus).copied()
    }

    /// PTDF row of monitored line `l`, indexed like `bus_ids`.
    pub fn ptdf_row(&self, l: usize) -> &[f64] {
        self.try_row(l).expect("PTDF rows are verified at build time for dense models")
    }

    pub fn ptdf(&self, l: usize, bus_index: usize) -> f64 {
        self.ptdf_row(l)[bus_index]
    }

    fn try_row(&self, l: usize) -> Result<&[f64], NetworkError> {
        if let Some(row) = self.rows[l].get() {
            return Ok(row);
        }
        let row = self.solver.solve_row(l, self.num_buses())?;
        Ok(self.rows[l].get_or_init(|| row))
    }

    /// Flows on monitored lines for a balanced injection vector (MW,
    /// indexed like `bus_ids`). Positive means from-bus to to-bus.
    pub fn line_flows(&self, injections: &[f64]) -> Result<Vec<f64>, NetworkError> {
        if injections.len() != self.num_buses() {
            return Err(NetworkError::Length {
                expected: self.num_buses(),
                found: injections.len(),
            });
        }
        let total: f64 = injections.iter().sum();
        if total.abs() > 1e-6 {
            return Err(NetworkError::Unbalanced(total));
        }
        Ok((0..self.lines.len())
            .map(|l| self.ptdf_row(l).iter().zip(injections).map(|(a, p)| a * p).sum())
            .collect())
    }
}

impl ReducedSolver {
    fn solve_row(&self, l: usize, n: usize) -> Result<Vec<f64>, NetworkError> {
        let (i, j) = self.ends[l];
        let mut rhs = DVector::<f64>::zeros(n.saturating_sub(1));
        if self.reduced[i] != usize::MAX {
            rhs[self.reduced[i]] += 1.0;
        }
        if self.reduced[j] != usize::MAX {
            rhs[self.reduced[j]] -= 1.0;
        }
        let z = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| NetworkError::Singular("LU solve failed".into()))?;
        let residual = (&self.matrix * &z - &rhs).amax();
        let scale = self.matrix.amax() * z.amax() + 1.0;
        if residual > RESIDUAL_TOL * scale {
            return Err(NetworkError::Singular(format!("residual {residual:e}")));
        }
        let x = self.reactance[l];
        Ok((0..n)
            .map(|b| match self.reduced[b] {
                usize::MAX => 0.0,
                k => z[k] / x,
            })
            .collect())
    }
}

/// Bus with the most in-service generating capacity; lowest id on ties.
fn auto_reference(case: &GridCase) -> BusId {
    let mut cap: HashMap<BusId, f64> = HashMap::new();
    for g in case.generators.iter().filter(|g| g.in_service()) {
        *cap.entry(g.bus).or_default() += g.p_max;
    }
    let mut best = (f64::NEG_INFINITY, BusId::MAX);
    for b in &case.buses {
        let c = cap.get(&b.id).copied().unwrap_or(0.0);
        if c > best.0 || (c == best.0 && b.id < best.1) {
            best = (c, b.id);
        }
    }
    best.1
}
