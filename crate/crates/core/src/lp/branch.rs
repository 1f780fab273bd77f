//! Depth-first branch-and-bound over LP relaxations.

use super::simplex::{solve_lp_with, SimplexOptions};
use super::{LinearProgram, LpError, LpSolution, LpStatus, VarId};

const INTEGRALITY_TOL: f64 = 1e-6;
const RESORT_EVERY: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct MixedBinaryProgram {
    pub lp: LinearProgram,
    pub binaries: Vec<VarId>,
}

impl MixedBinaryProgram {
    pub fn new(lp: LinearProgram, binaries: Vec<VarId>) -> Self {
        MixedBinaryProgram { lp, binaries }
    }

    pub fn validate(&self) -> Result<(), LpError> {
        self.lp.validate()?;
        for &b in &self.binaries {
            let v = self
                .lp
                .vars
                .get(b.0)
                .ok_or_else(|| LpError::InvalidProgram(format!("binary index {} out of range", b.0)))?;
            if v.lo < 0.0 || v.hi > 1.0 {
                return Err(LpError::InvalidProgram(format!(
                    "binary `{}` has bounds [{}, {}] outside [0, 1]",
                    v.name, v.lo, v.hi
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MbpOptions {
    /// Relative optimality gap at which a node is pruned against the incumbent.
    pub gap: f64,
    pub node_cap: usize,
    /// Round fractional binaries up at the root and try the resulting fixing.
    pub rounding_heuristic: bool,
    pub simplex: SimplexOptions,
}

impl Default for MbpOptions {
    fn default() -> Self {
        MbpOptions {
            gap: 1e-6,
            node_cap: 1_000_000,
            rounding_heuristic: true,
            simplex: SimplexOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbpOutcome {
    Optimal,
    Infeasible,
    Unbounded,
    /// Node cap hit or a relaxation failed numerically. The incumbent, if
    /// any, is still reported.
    FailedToConverge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MbpSolution {
    pub outcome: MbpOutcome,
    /// LP solution at the incumbent (binaries fixed); `None` without one.
    pub incumbent: Option<LpSolution>,
    /// Values of `MixedBinaryProgram::binaries` at the incumbent.
    pub assignment: Vec<bool>,
    pub best_bound: f64,
    pub nodes: usize,
    pub failure: Option<String>,
}

impl MbpSolution {
    pub fn objective(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|s| s.objective)
    }
}

struct Node {
    bound: f64,
    /// -1 free, otherwise the fixed value of each binary.
    fix: Vec<i8>,
}

pub fn solve_mbp(mbp: &MixedBinaryProgram, opts: &MbpOptions) -> Result<MbpSolution, LpError> {
    mbp.validate()?;
    let nb = mbp.binaries.len();
    let mut lp = mbp.lp.clone();
    let base_bounds: Vec<(f64, f64)> = mbp
        .binaries
        .iter()
        .map(|b| (mbp.lp.vars[b.0].lo, mbp.lp.vars[b.0].hi))
        .collect();

    let mut stack = vec![Node {
        bound: f64::NEG_INFINITY,
        fix: vec![-1; nb],
    }];
    let mut incumbent: Option<LpSolution> = None;
    let mut nodes = 0;

    let prune_level = |inc: &Option<LpSolution>| match inc {
        Some(s) => s.objective - opts.gap * s.objective.abs().max(1.0) - 1e-12 * s.objective.abs().max(1.0),
        None => f64::INFINITY,
    };

    let finish = |outcome, incumbent: Option<LpSolution>, bound, nodes, failure| {
        let assignment = match &incumbent {
            Some(s) => mbp.binaries.iter().map(|b| s.x[b.0] > 0.5).collect(),
            None => Vec::new(),
        };
        Ok(MbpSolution {
            outcome,
            incumbent,
            assignment,
            best_bound: bound,
            nodes,
            failure,
        })
    };

    while let Some(node) = stack.pop() {
        if node.bound >= prune_level(&incumbent) {
            continue;
        }
        if nodes >= opts.node_cap {
            let bound = stack.iter().map(|n| n.bound).fold(node.bound, f64::min);
            return finish(
                MbpOutcome::FailedToConverge,
                incumbent,
                bound,
                nodes,
                Some(format!("node cap {} exceeded", opts.node_cap)),
            );
        }
        nodes += 1;

        apply_fixing(&mut lp, &mbp.binaries, &base_bounds, &node.fix);
        let sol = match solve_lp_with(&lp, &opts.simplex) {
            Ok(s) => s,
            Err(LpError::InvalidProgram(msg)) => return Err(LpError::InvalidProgram(msg)),
            Err(e) => {
                let bound = stack.iter().map(|n| n.bound).fold(node.bound, f64::min);
                return finish(MbpOutcome::FailedToConverge, incumbent, bound, nodes, Some(e.to_string()));
            }
        };
        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return finish(MbpOutcome::Unbounded, None, f64::NEG_INFINITY, nodes, None);
            }
            LpStatus::Optimal => {}
        }
        if sol.objective >= prune_level(&incumbent) {
            continue;
        }

        let branch_on = most_fractional(&sol.x, &mbp.binaries);
        let Some((k, value)) = branch_on else {
            incumbent = Some(sol);
            continue;
        };

        if nodes == 1 && opts.rounding_heuristic {
            let mut fix = node.fix.clone();
            for (slot, b) in fix.iter_mut().zip(&mbp.binaries) {
                if *slot < 0 {
                    *slot = if sol.x[b.0] > INTEGRALITY_TOL { 1 } else { 0 };
                }
            }
            apply_fixing(&mut lp, &mbp.binaries, &base_bounds, &fix);
            if let Ok(h) = solve_lp_with(&lp, &opts.simplex) {
                if h.is_optimal() && h.objective < prune_level(&incumbent) {
                    incumbent = Some(h);
                }
            }
            if sol.objective >= prune_level(&incumbent) {
                continue;
            }
        }

        let mut down = node.fix.clone();
        down[k] = 0;
        let mut up = node.fix;
        up[k] = 1;
        let (first, second) = if value >= 0.5 { (up, down) } else { (down, up) };
        stack.push(Node {
            bound: sol.objective,
            fix: second,
        });
        stack.push(Node {
            bound: sol.objective,
            fix: first,
        });

        if nodes % RESORT_EVERY == 0 {
            // Best bound ends up on top of the stack.
            stack.sort_by(|a, b| b.bound.total_cmp(&a.bound));
        }
    }

    match incumbent {
        Some(s) => {
            let bound = s.objective;
            finish(MbpOutcome::Optimal, Some(s), bound, nodes, None)
        }
        None => finish(MbpOutcome::Infeasible, None, f64::INFINITY, nodes, None),
    }
}

fn apply_fixing(lp: &mut LinearProgram, binaries: &[VarId], base: &[(f64, f64)], fix: &[i8]) {
    for ((b, &(lo, hi)), &f) in binaries.iter().zip(base).zip(fix) {
        match f {
            0 => lp.set_bounds(*b, 0.0, 0.0),
            1 => lp.set_bounds(*b, 1.0, 1.0),
            _ => lp.set_bounds(*b, lo, hi),
        }
    }
}

/// Binary with the largest distance to the nearest integer; lowest index wins ties.
fn most_fractional(x: &[f64], binaries: &[VarId]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (k, b) in binaries.iter().enumerate() {
        let v = x[b.0];
        let frac = (v - v.round()).abs();
        if frac > INTEGRALITY_TOL && best.is_none_or(|(_, f, _)| frac > f) {
            best = Some((k, frac, v));
        }
    }
    best.map(|(k, _, v)| (k, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Relation;

    /// Two units, demand 30: the cheap one has p_min 50 so it must stay off.
    fn uc_toy(demand: f64) -> (MixedBinaryProgram, [VarId; 4]) {
        let mut lp = LinearProgram::new();
        let p1 = lp.add_var("p_cheap", 10.0, 0.0, 100.0);
        let p2 = lp.add_var("p_dear", 40.0, 0.0, 100.0);
        let u1 = lp.add_var("u_cheap", 100.0, 0.0, 1.0);
        let u2 = lp.add_var("u_dear", 100.0, 0.0, 1.0);
        lp.add_row("balance", vec![(p1, 1.0), (p2, 1.0)], Relation::Eq, demand);
        lp.add_row("max_cheap", vec![(p1, 1.0), (u1, -100.0)], Relation::Le, 0.0);
        lp.add_row("min_cheap", vec![(p1, 1.0), (u1, -50.0)], Relation::Ge, 0.0);
        lp.add_row("max_dear", vec![(p2, 1.0), (u2, -100.0)], Relation::Le, 0.0);
        (MixedBinaryProgram::new(lp, vec![u1, u2]), [p1, p2, u1, u2])
    }

    #[test]
    fn cheap_unit_with_high_minimum_stays_off() {
        let (mbp, [p1, p2, _, _]) = uc_toy(30.0);
        let sol = solve_mbp(&mbp, &MbpOptions::default()).unwrap();
        assert_eq!(sol.outcome, MbpOutcome::Optimal);
        assert_eq!(sol.assignment, vec![false, true]);
        let x = &sol.incumbent.as_ref().unwrap().x;
        assert!(x[p1.0].abs() < 1e-9);
        assert!((x[p2.0] - 30.0).abs() < 1e-9);
        assert!((sol.objective().unwrap() - 1300.0).abs() < 1e-9);
    }

    #[test]
    fn integral_relaxation_needs_one_node() {
        let mut lp = LinearProgram::new();
        let u = lp.add_var("u", -1.0, 0.0, 1.0);
        lp.add_row("cap", vec![(u, 1.0)], Relation::Le, 1.0);
        let sol = solve_mbp(&MixedBinaryProgram::new(lp, vec![u]), &MbpOptions::default()).unwrap();
        assert_eq!(sol.nodes, 1);
        assert_eq!(sol.assignment, vec![true]);
    }

    #[test]
    fn demand_above_capacity_is_infeasible() {
        let (mbp, _) = uc_toy(250.0);
        let sol = solve_mbp(&mbp, &MbpOptions::default()).unwrap();
        assert_eq!(sol.outcome, MbpOutcome::Infeasible);
        assert!(sol.incumbent.is_none());
    }

    #[test]
    fn node_cap_yields_failed_to_converge() {
        let (mbp, _) = uc_toy(30.0);
        let opts = MbpOptions {
            node_cap: 1,
            rounding_heuristic: false,
            ..MbpOptions::default()
        };
        let sol = solve_mbp(&mbp, &opts).unwrap();
        assert_eq!(sol.outcome, MbpOutcome::FailedToConverge);
        assert!(sol.failure.unwrap().contains("node cap"));
    }

    #[test]
    fn binary_bounds_are_checked() {
        let mut lp = LinearProgram::new();
        let u = lp.add_var("u", 0.0, 0.0, 2.0);
        let err = solve_mbp(&MixedBinaryProgram::new(lp, vec![u]), &MbpOptions::default()).unwrap_err();
        assert!(matches!(err, LpError::InvalidProgram(_)));
    }
}
