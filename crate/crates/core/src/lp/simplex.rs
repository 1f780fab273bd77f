//! Bounded-variable primal simplex on a dense tableau.
//!
//! Every row `lo <= a·x <= hi` becomes `a·x - s = 0` with a slack column `s`
//! bounded by `[lo, hi]`, so the right-hand side is identically zero and all
//! constants live in bounds. The slack column of row `i` is `-e_i`, which
//! makes its reduced cost equal to the row dual `y_i`.
//!
//! Pricing is Dantzig's rule with lowest-index tie-break; after a run of
//! degenerate pivots the solver switches to Bland's rule until it makes
//! progress again. Variables with `lo == hi` are substituted out before the
//! tableau is built.

use super::{LinearProgram, LpError, LpSolution, LpStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Hard cap on pivots plus bound flips; `None` picks `max(10_000, 50 (m + n))`.
    pub max_iterations: Option<usize>,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    /// Consecutive degenerate steps before falling back to Bland's rule.
    pub bland_after: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_iterations: None,
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            bland_after: 50,
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_with(lp, &SimplexOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.num_vars();
    let m = lp.num_rows();
    let cap = opts.max_iterations.unwrap_or_else(|| (50 * (m + n)).max(10_000));

    let mut tab = Tableau::build(lp, opts);
    let mut iterations = 0;

    if tab.first_art < tab.ncols {
        let phase1: Vec<f64> = (0..tab.ncols)
            .map(|c| if c >= tab.first_art { 1.0 } else { 0.0 })
            .collect();
        tab.set_costs(&phase1);
        match tab.iterate(cap, &mut iterations)? {
            Step::Optimal => {}
            Step::Unbounded => {
                return Err(LpError::Numerical("phase one reported unbounded".into()));
            }
        }
        let infeasibility: f64 = (tab.first_art..tab.ncols).map(|c| tab.x[c].abs()).sum();
        if infeasibility > 1e-7 * (1.0 + tab.scale) {
            return Ok(LpSolution::non_optimal(LpStatus::Infeasible, n, m, iterations));
        }
        tab.retire_artificials();
    }

    let costs: Vec<f64> = (0..tab.ncols)
        .map(|c| if c < tab.na { lp.vars[tab.active[c]].cost } else { 0.0 })
        .collect();
    tab.set_costs(&costs);
    match tab.iterate(cap, &mut iterations)? {
        Step::Optimal => {}
        Step::Unbounded => {
            return Ok(LpSolution::non_optimal(LpStatus::Unbounded, n, m, iterations));
        }
    }
    tab.refresh_basic_values();

    let mut x = tab.fixed_x.clone();
    for (c, &j) in tab.active.iter().enumerate() {
        x[j] = tab.x[c];
    }
    let duals: Vec<f64> = (0..m).map(|i| tab.d[tab.na + i]).collect();
    let mut reduced_costs: Vec<f64> = lp.vars.iter().map(|v| v.cost).collect();
    for (row, &y) in lp.rows.iter().zip(&duals) {
        if y != 0.0 {
            for &(v, a) in &row.coeffs {
                reduced_costs[v.0] -= y * a;
            }
        }
    }
    let objective = lp.objective(&x);
    let solution = LpSolution {
        status: LpStatus::Optimal,
        x,
        duals,
        reduced_costs,
        objective,
        iterations,
    };
    certify(lp, &solution)?;
    Ok(solution)
}

/// Post-solve check of primal feasibility and strong duality.
fn certify(lp: &LinearProgram, sol: &LpSolution) -> Result<(), LpError> {
    for (v, &xj) in lp.vars.iter().zip(&sol.x) {
        if xj < v.lo - 1e-7 * (1.0 + v.lo.abs()) || xj > v.hi + 1e-7 * (1.0 + v.hi.abs()) {
            return Err(LpError::Numerical(format!(
                "variable `{}` = {} outside [{}, {}]",
                v.name, xj, v.lo, v.hi
            )));
        }
    }
    let mut dual_obj = 0.0;
    for (row, &y) in lp.rows.iter().zip(&sol.duals) {
        let act = row.activity(&sol.x);
        if act < row.lo - 1e-7 * (1.0 + row.lo.abs()) || act > row.hi + 1e-7 * (1.0 + row.hi.abs()) {
            return Err(LpError::Numerical(format!(
                "row `{}` activity {} outside [{}, {}]",
                row.name, act, row.lo, row.hi
            )));
        }
        dual_obj += y * bound_for_sign(y, row.lo, row.hi, act);
    }
    for (v, (&d, &xj)) in lp.vars.iter().zip(sol.reduced_costs.iter().zip(&sol.x)) {
        dual_obj += d * bound_for_sign(d, v.lo, v.hi, xj);
    }
    let gap = (sol.objective - dual_obj).abs();
    if gap > 1e-6 * (1.0 + sol.objective.abs()) {
        return Err(LpError::Numerical(format!(
            "duality gap {gap:e} (primal {}, dual {dual_obj})",
            sol.objective
        )));
    }
    Ok(())
}

/// The bound a multiplier of the given sign prices; falls back to the
/// current value when the multiplier is numerically zero or the bound is
/// infinite (the gap check then catches genuine dual infeasibility).
fn bound_for_sign(mult: f64, lo: f64, hi: f64, value: f64) -> f64 {
    if mult > 0.0 && lo.is_finite() {
        lo
    } else if mult < 0.0 && hi.is_finite() {
        hi
    } else {
        value
    }
}

enum Step {
    Optimal,
    Unbounded,
}

struct Tableau {
    m: usize,
    ncols: usize,
    /// Active (non-fixed) structural count; columns `0..na`.
    na: usize,
    first_art: usize,
    active: Vec<usize>,
    fixed_x: Vec<f64>,
    t: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    d: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    scale: f64,
    opts: SimplexOptions,
}

impl Tableau {
    fn build(lp: &LinearProgram, opts: &SimplexOptions) -> Self {
        let n = lp.num_vars();
        let m = lp.num_rows();
        let mut active = Vec::new();
        let mut col_of = vec![usize::MAX; n];
        let mut fixed_x = vec![0.0; n];
        for (j, v) in lp.vars.iter().enumerate() {
            if v.lo == v.hi {
                fixed_x[j] = v.lo;
            } else {
                col_of[j] = active.len();
                active.push(j);
            }
        }
        let na = active.len();
        let start = |lo: f64, hi: f64| {
            if lo.is_finite() {
                lo
            } else if hi.is_finite() {
                hi
            } else {
                0.0
            }
        };

        // Row activities split into the fixed part (moved into the slack
        // bounds) and the active part at the starting point.
        let mut slack_lo = Vec::with_capacity(m);
        let mut slack_hi = Vec::with_capacity(m);
        let mut act = Vec::with_capacity(m);
        let mut scale: f64 = 0.0;
        for row in &lp.rows {
            let mut off = 0.0;
            let mut a = 0.0;
            for &(v, coef) in &row.coeffs {
                let var = &lp.vars[v.0];
                if col_of[v.0] == usize::MAX {
                    off += coef * fixed_x[v.0];
                } else {
                    a += coef * start(var.lo, var.hi);
                }
            }
            slack_lo.push(row.lo - off);
            slack_hi.push(row.hi - off);
            act.push(a);
            for b in [row.lo, row.hi] {
                if b.is_finite() {
                    scale = scale.max(b.abs());
                }
            }
        }

        let tol = opts.feasibility_tol;
        let mut art_rows = Vec::new();
        for i in 0..m {
            if act[i] < slack_lo[i] - tol || act[i] > slack_hi[i] + tol {
                art_rows.push(i);
            }
        }
        let first_art = na + m;
        let ncols = first_art + art_rows.len();

        let mut lo = vec![0.0; ncols];
        let mut hi = vec![0.0; ncols];
        let mut x = vec![0.0; ncols];
        for (c, &j) in active.iter().enumerate() {
            let v = &lp.vars[j];
            lo[c] = v.lo;
            hi[c] = v.hi;
            x[c] = start(v.lo, v.hi);
        }
        lo[na..na + m].copy_from_slice(&slack_lo[..m]);
        hi[na..na + m].copy_from_slice(&slack_hi[..m]);
        for k in 0..art_rows.len() {
            lo[first_art + k] = 0.0;
            hi[first_art + k] = f64::INFINITY;
        }

        let mut t = vec![0.0; m * ncols];
        let mut basis = vec![0; m];
        let mut in_basis = vec![false; ncols];
        let mut art_of_row = vec![usize::MAX; m];
        for (k, &i) in art_rows.iter().enumerate() {
            art_of_row[i] = first_art + k;
        }
        for (i, row) in lp.rows.iter().enumerate() {
            let base = i * ncols;
            let s = na + i;
            if art_of_row[i] == usize::MAX {
                // Basic slack: row reads  -a·x + s = 0.
                for &(v, coef) in &row.coeffs {
                    let c = col_of[v.0];
                    if c != usize::MAX {
                        t[base + c] -= coef;
                    }
                }
                t[base + s] = 1.0;
                basis[i] = s;
                x[s] = act[i];
            } else {
                // Slack parked at the violated bound, artificial basic:
                // sigma (a·x - s) + art = 0 with art >= 0.
                let target = if act[i] < slack_lo[i] { slack_lo[i] } else { slack_hi[i] };
                let sigma = if target - act[i] >= 0.0 { 1.0 } else { -1.0 };
                for &(v, coef) in &row.coeffs {
                    let c = col_of[v.0];
                    if c != usize::MAX {
                        t[base + c] += sigma * coef;
                    }
                }
                t[base + s] = -sigma;
                let a = art_of_row[i];
                t[base + a] = 1.0;
                basis[i] = a;
                x[s] = target;
                x[a] = sigma * (target - act[i]);
            }
            in_basis[basis[i]] = true;
        }

        Tableau {
            m,
            ncols,
            na,
            first_art,
            active,
            fixed_x,
            t,
            lo,
            hi,
            cost: vec![0.0; ncols],
            x,
            d: vec![0.0; ncols],
            basis,
            in_basis,
            scale,
            opts: *opts,
        }
    }

    fn set_costs(&mut self, costs: &[f64]) {
        self.cost.copy_from_slice(costs);
        self.d.copy_from_slice(costs);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.ncols..(i + 1) * self.ncols];
                for (dc, &tc) in self.d.iter_mut().zip(row) {
                    *dc -= cb * tc;
                }
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
    }

    fn price(&self, bland: bool) -> Option<usize> {
        let tol = self.opts.optimality_tol;
        let mut best: Option<(usize, f64)> = None;
        for c in 0..self.ncols {
            if self.in_basis[c] || self.lo[c] == self.hi[c] {
                continue;
            }
            let dc = self.d[c];
            let eligible = (dc < -tol && self.x[c] < self.hi[c]) || (dc > tol && self.x[c] > self.lo[c]);
            if !eligible {
                continue;
            }
            if bland {
                return Some(c);
            }
            match best {
                Some((_, mag)) if dc.abs() <= mag => {}
                _ => best = Some((c, dc.abs())),
            }
        }
        best.map(|(c, _)| c)
    }

    fn iterate(&mut self, cap: usize, iterations: &mut usize) -> Result<Step, LpError> {
        let mut degenerate_streak = 0;
        loop {
            let bland = degenerate_streak >= self.opts.bland_after;
            let Some(enter) = self.price(bland) else {
                return Ok(Step::Optimal);
            };
            if *iterations >= cap {
                return Err(LpError::IterationLimit {
                    iterations: *iterations,
                });
            }
            *iterations += 1;
            let dir = if self.d[enter] < 0.0 { 1.0 } else { -1.0 };

            let span = self.hi[enter] - self.lo[enter];
            let mut theta = span;
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let alpha = self.t[i * self.ncols + enter] * dir;
                if alpha.abs() <= self.opts.pivot_tol {
                    continue;
                }
                let b = self.basis[i];
                let ratio = if alpha > 0.0 {
                    if !self.lo[b].is_finite() {
                        continue;
                    }
                    ((self.x[b] - self.lo[b]) / alpha).max(0.0)
                } else {
                    if !self.hi[b].is_finite() {
                        continue;
                    }
                    ((self.hi[b] - self.x[b]) / -alpha).max(0.0)
                };
                let tie = 1e-12 * (1.0 + theta.abs().min(ratio.abs()));
                let take = match leave {
                    _ if ratio < theta - tie => true,
                    Some((r, a)) if (ratio - theta).abs() <= tie => {
                        if bland {
                            b < self.basis[r]
                        } else {
                            alpha.abs() > a.abs()
                        }
                    }
                    _ => false,
                };
                if take {
                    theta = ratio;
                    leave = Some((i, alpha));
                }
            }
            if !theta.is_finite() {
                return Ok(Step::Unbounded);
            }

            if theta <= 1e-12 {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }

            if theta != 0.0 {
                for i in 0..self.m {
                    let a = self.t[i * self.ncols + enter];
                    if a != 0.0 {
                        let b = self.basis[i];
                        self.x[b] -= a * dir * theta;
                    }
                }
            }
            match leave {
                None => {
                    self.x[enter] = if dir > 0.0 { self.hi[enter] } else { self.lo[enter] };
                }
                Some((r, alpha)) => {
                    self.x[enter] += dir * theta;
                    let b = self.basis[r];
                    self.x[b] = if alpha > 0.0 { self.lo[b] } else { self.hi[b] };
                    self.pivot(r, enter);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, enter: usize) {
        let nc = self.ncols;
        let leaving = self.basis[r];
        let piv = self.t[r * nc + enter];
        let inv = 1.0 / piv;
        let mut nz = Vec::new();
        for c in 0..nc {
            let v = &mut self.t[r * nc + c];
            if *v != 0.0 {
                *v *= inv;
                nz.push(c);
            }
        }
        self.t[r * nc + enter] = 1.0;
        let (before, rest) = self.t.split_at_mut(r * nc);
        let (prow, after) = rest.split_at_mut(nc);
        for chunk in before.chunks_exact_mut(nc).chain(after.chunks_exact_mut(nc)) {
            let f = chunk[enter];
            if f != 0.0 {
                for &c in &nz {
                    chunk[c] -= f * prow[c];
                }
                chunk[enter] = 0.0;
            }
        }
        let f = self.d[enter];
        if f != 0.0 {
            for &c in &nz {
                self.d[c] -= f * prow[c];
            }
        }
        self.d[enter] = 0.0;
        self.basis[r] = enter;
        self.in_basis[leaving] = false;
        self.in_basis[enter] = true;
    }

    /// Pivots zero-valued artificials out of the basis where possible and
    /// fixes every artificial at zero.
    fn retire_artificials(&mut self) {
        for r in 0..self.m {
            let b = self.basis[r];
            if b < self.first_art {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for c in 0..self.first_art {
                if self.in_basis[c] {
                    continue;
                }
                let a = self.t[r * self.ncols + c].abs();
                if a > 1e-7 && best.is_none_or(|(_, m)| a > m) {
                    best = Some((c, a));
                }
            }
            if let Some((c, _)) = best {
                self.x[b] = 0.0;
                self.pivot(r, c);
            }
        }
        for c in self.first_art..self.ncols {
            self.hi[c] = 0.0;
            if !self.in_basis[c] {
                self.x[c] = 0.0;
            }
        }
    }

    /// Recomputes basic values from the nonbasic ones (`x_B = -T_N x_N`).
    fn refresh_basic_values(&mut self) {
        let nc = self.ncols;
        let nonbasic: Vec<(usize, f64)> = (0..nc)
            .filter(|&c| !self.in_basis[c] && self.x[c] != 0.0)
            .map(|c| (c, self.x[c]))
            .collect();
        for i in 0..self.m {
            let row = &self.t[i * nc..(i + 1) * nc];
            let v: f64 = nonbasic.iter().map(|&(c, xc)| row[c] * xc).sum();
            let b = self.basis[i];
            self.x[b] = -v;
        }
    }
}
