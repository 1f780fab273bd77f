//! One-day SCUC / SCED programs.
//!
//! Generator output is written as `p = p_min·u + Σ seg_k` with one variable
//! per cost segment, so the energy cost is linear in the segment variables.
//! Line limits are two-sided rows on the PTDF-weighted injections; demand and
//! fixed output live in the row bounds, so the row duals are exactly the
//! demand sensitivities needed for LMPs.

use crate::case::{GridCase, DAY};
use crate::lp::{LinearProgram, Relation, RowId, VarId};
use crate::network::NetworkModel;

use super::{CommitmentSchedule, UnitState};

pub(crate) enum Mode<'a> {
    Commit,
    Dispatch(&'a CommitmentSchedule),
}

/// Linear expression `Σ a·x + constant`.
#[derive(Clone, Default)]
struct Expr {
    terms: Vec<(VarId, f64)>,
    constant: f64,
}

impl Expr {
    fn add(&mut self, other: &Expr, scale: f64) {
        self.terms.extend(other.terms.iter().map(|&(v, a)| (v, a * scale)));
        self.constant += other.constant * scale;
    }
}

/// Commitment of one unit-hour: a binary variable or a known value.
#[derive(Clone, Copy)]
enum OnOff {
    Var(VarId),
    Fixed(f64),
}

impl OnOff {
    fn expr(self, scale: f64) -> Expr {
        match self {
            OnOff::Var(v) => Expr {
                terms: vec![(v, scale)],
                constant: 0.0,
            },
            OnOff::Fixed(u) => Expr {
                terms: vec![],
                constant: u * scale,
            },
        }
    }
}

pub(crate) struct DayProgram {
    pub lp: LinearProgram,
    pub binaries: Vec<VarId>,
    /// `[gen][hour]` commitment variables (SCUC, commitment-relevant units only).
    pub commit_vars: Vec<Vec<Option<VarId>>>,
    /// `[gen][hour]` commitment values known up front.
    pub commit_fixed: Vec<Vec<Option<bool>>>,
    p_expr: Vec<Vec<Expr>>,
    pub ren_vars: Vec<Vec<VarId>>,
    pub balance: Vec<RowId>,
    /// `[hour][line]`
    pub line_rows: Vec<Vec<RowId>>,
    /// Cost not represented by LP variables (fixed no-load and startups).
    pub constant_cost: f64,
}

impl DayProgram {
    pub fn output(&self, x: &[f64], g: usize, h: usize) -> f64 {
        let e = &self.p_expr[g][h];
        e.constant + e.terms.iter().map(|&(v, a)| a * x[v.0]).sum::<f64>()
    }
}

pub(crate) fn build_day(
    net: &NetworkModel,
    case: &GridCase,
    day: usize,
    init: &[Option<UnitState>],
    mode: Mode<'_>,
) -> DayProgram {
    let t0 = day * DAY;
    let ng = case.generators.len();
    let mut lp = LinearProgram::new();
    let mut binaries = Vec::new();
    let mut constant_cost = 0.0;

    let mut commit_vars = vec![vec![None; DAY]; ng];
    let mut commit_fixed = vec![vec![None; DAY]; ng];
    let mut on: Vec<Vec<OnOff>> = vec![vec![OnOff::Fixed(0.0); DAY]; ng];
    let mut p_expr: Vec<Vec<Expr>> = vec![vec![Expr::default(); DAY]; ng];

    for (g, gen) in case.generators.iter().enumerate() {
        for h in 0..DAY {
            let u = if !gen.in_service() {
                OnOff::Fixed(0.0)
            } else {
                match mode {
                    Mode::Commit if gen.needs_commitment() => {
                        let v = lp.add_var(format!("u_g{g}_h{h}"), gen.no_load_cost, 0.0, 1.0);
                        binaries.push(v);
                        commit_vars[g][h] = Some(v);
                        OnOff::Var(v)
                    }
                    Mode::Commit => OnOff::Fixed(1.0),
                    Mode::Dispatch(s) => OnOff::Fixed(if s.on_off[g][h] { 1.0 } else { 0.0 }),
                }
            };
            if let OnOff::Fixed(c) = u {
                commit_fixed[g][h] = Some(c > 0.5);
                constant_cost += gen.no_load_cost * c;
            }
            on[g][h] = u;

            let mut p = u.expr(gen.p_min);
            let cap = match u {
                OnOff::Var(_) => 1.0,
                OnOff::Fixed(c) => c,
            };
            let mut link = Vec::new();
            for (k, (width, slope)) in gen.cost_curve.widths(gen.p_min).enumerate() {
                let v = lp.add_var(format!("seg_g{g}_h{h}_k{k}"), slope, 0.0, width * cap);
                p.terms.push((v, 1.0));
                link.push((v, 1.0));
            }
            if let OnOff::Var(uv) = u {
                if !link.is_empty() {
                    link.push((uv, -(gen.p_max - gen.p_min)));
                    lp.add_row(format!("cap_g{g}_h{h}"), link, Relation::Le, 0.0);
                }
            }
            p_expr[g][h] = p;
        }

        // Startups.
        if !gen.in_service() {
            continue;
        }
        let prev_on = init.get(g).copied().flatten().map(|s| if s.on { 1.0 } else { 0.0 });
        for h in 0..DAY {
            let before = if h == 0 { prev_on.map(OnOff::Fixed) } else { Some(on[g][h - 1]) };
            let Some(before) = before else { continue };
            match (on[g][h], before) {
                (OnOff::Fixed(now), OnOff::Fixed(was)) => {
                    if now > 0.5 && was < 0.5 {
                        constant_cost += gen.startup_cost;
                    }
                }
                (now, before) if gen.startup_cost > 0.0 => {
                    let s = lp.add_var(format!("start_g{g}_h{h}"), gen.startup_cost, 0.0, 1.0);
                    let mut e = Expr {
                        terms: vec![(s, 1.0)],
                        constant: 0.0,
                    };
                    e.add(&now.expr(1.0), -1.0);
                    e.add(&before.expr(1.0), 1.0);
                    lp.add_row(format!("startup_g{g}_h{h}"), e.terms, Relation::Ge, -e.constant);
                }
                _ => {}
            }
        }

        // Ramping. A unit that was off (or is turning off) may jump.
        let Some(ramp) = gen.ramp_limit.filter(|r| *r < gen.p_max) else { continue };
        let init_state = init.get(g).copied().flatten();
        for h in 0..DAY {
            let (p_prev, u_prev) = if h == 0 {
                match init_state {
                    Some(s) => (
                        Expr {
                            terms: vec![],
                            constant: s.output,
                        },
                        OnOff::Fixed(if s.on { 1.0 } else { 0.0 }),
                    ),
                    None => continue,
                }
            } else {
                (p_expr[g][h - 1].clone(), on[g][h - 1])
            };
            let mut up = p_expr[g][h].clone();
            up.add(&p_prev, -1.0);
            up.add(&u_prev.expr(gen.p_max), 1.0);
            let rhs = ramp + gen.p_max - up.constant;
            if !up.terms.is_empty() {
                lp.add_row(format!("rampup_g{g}_h{h}"), up.terms, Relation::Le, rhs);
            }
            let mut down = p_prev;
            down.add(&p_expr[g][h], -1.0);
            down.add(&on[g][h].expr(gen.p_max), 1.0);
            let rhs = ramp + gen.p_max - down.constant;
            if !down.terms.is_empty() {
                lp.add_row(format!("rampdown_g{g}_h{h}"), down.terms, Relation::Le, rhs);
            }
        }
    }

    let mut ren_vars = vec![Vec::with_capacity(DAY); case.renewables.len()];
    for (r, ren) in case.renewables.iter().enumerate() {
        for h in 0..DAY {
            let v = lp.add_var(format!("ren_r{r}_h{h}"), 0.0, 0.0, ren.series[t0 + h]);
            ren_vars[r].push(v);
        }
    }

    let gen_bus: Vec<usize> = case
        .generators
        .iter()
        .map(|g| net.bus_index(g.bus).expect("validated bus"))
        .collect();
    let ren_bus: Vec<usize> = case
        .renewables
        .iter()
        .map(|r| net.bus_index(r.bus).expect("validated bus"))
        .collect();
    let demand_at: Vec<(usize, &Vec<f64>)> = case
        .demand
        .series
        .iter()
        .map(|(b, s)| (net.bus_index(*b).expect("validated bus"), s))
        .collect();

    let mut balance = Vec::with_capacity(DAY);
    let mut line_rows = Vec::with_capacity(DAY);
    for h in 0..DAY {
        let t = t0 + h;
        let mut total = Expr::default();
        for unit in p_expr.iter().take(ng) {
            total.add(&unit[h], 1.0);
        }
        for vars in &ren_vars {
            total.terms.push((vars[h], 1.0));
        }
        let demand: f64 = demand_at.iter().map(|(_, s)| s[t]).sum();
        balance.push(lp.add_row(format!("balance_h{h}"), total.terms, Relation::Eq, demand - total.constant));

        let mut rows = Vec::with_capacity(net.lines.len());
        for (l, line) in net.lines.iter().enumerate() {
            let ptdf = net.ptdf_row(l);
            let mut flow = Expr::default();
            for g in 0..ng {
                let a = ptdf[gen_bus[g]];
                if a != 0.0 {
                    flow.add(&p_expr[g][h], a);
                }
            }
            for (r, vars) in ren_vars.iter().enumerate() {
                let a = ptdf[ren_bus[r]];
                if a != 0.0 {
                    flow.terms.push((vars[h], a));
                }
            }
            let withdrawn: f64 = demand_at.iter().map(|&(b, s)| ptdf[b] * s[t]).sum();
            let centre = withdrawn - flow.constant;
            rows.push(lp.add_range(
                format!("line_l{l}_h{h}"),
                flow.terms,
                centre - line.limit,
                centre + line.limit,
            ));
        }
        line_rows.push(rows);
    }

    DayProgram {
        lp,
        binaries,
        commit_vars,
        commit_fixed,
        p_expr,
        ren_vars,
        balance,
        line_rows,
        constant_cost,
    }
}
