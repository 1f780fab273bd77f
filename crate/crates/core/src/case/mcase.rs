//! Matrix-block case files (`mpc.bus = [ ... ];` style).
//!
//! Only the DC-relevant columns are read. Polynomial generator costs are
//! replaced by their chord interpolation on equal-width segments between
//! `p_min` and `p_max`.

use std::collections::BTreeMap;

use super::{
    Branch, Bus, BusId, CaseError, CostCurve, DemandProfile, Generator, GridCase, Segment, Status, DAY,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McaseOptions {
    /// Chord segments per polynomial cost curve.
    pub segments: usize,
    /// Length of the flat demand series built from the `Pd` column.
    pub hours: usize,
}

impl Default for McaseOptions {
    fn default() -> Self {
        McaseOptions {
            segments: 4,
            hours: DAY,
        }
    }
}

pub fn parse_mcase(source: &str) -> Result<GridCase, CaseError> {
    parse_mcase_with(source, &McaseOptions::default())
}

pub fn parse_mcase_with(source: &str, opts: &McaseOptions) -> Result<GridCase, CaseError> {
    if opts.segments == 0 {
        return Err(CaseError::invalid("options.segments", "must be at least 1"));
    }
    let text = strip_comments(source);

    let base = block_text(&text, "mpc.baseMVA")?;
    let base_mva: f64 = base
        .trim()
        .parse()
        .map_err(|_| CaseError::invalid("mpc.baseMVA", format!("`{}` is not a number", base.trim())))?;

    let bus_rows = matrix(&text, "mpc.bus", 3)?;
    let gen_rows = matrix(&text, "mpc.gen", 10)?;
    let branch_rows = matrix(&text, "mpc.branch", 11)?;
    let cost_rows = matrix(&text, "mpc.gencost", 4)?;

    let mut buses = Vec::with_capacity(bus_rows.len());
    let mut demand = BTreeMap::new();
    for (k, row) in bus_rows.iter().enumerate() {
        let id = bus_id(row[0], "mpc.bus", k)?;
        buses.push(Bus { id, county: None });
        let pd = row[2];
        if pd < 0.0 {
            return Err(CaseError::invalid(format!("mpc.bus row {}", k + 1), format!("negative demand {pd}")));
        }
        if pd > 0.0 {
            demand.insert(id, vec![pd; opts.hours]);
        }
    }

    let mut branches = Vec::with_capacity(branch_rows.len());
    for (k, row) in branch_rows.iter().enumerate() {
        let status = if row[10] != 0.0 { Status::In } else { Status::Out };
        let x = row[3];
        if status == Status::In && x == 0.0 {
            return Err(CaseError::ZeroReactance { row: k + 1 });
        }
        branches.push(Branch {
            from_bus: bus_id(row[0], "mpc.branch", k)?,
            to_bus: bus_id(row[1], "mpc.branch", k)?,
            reactance: x,
            flow_limit: (row[5] > 0.0).then_some(row[5]),
            status,
        });
    }

    if cost_rows.len() < gen_rows.len() {
        return Err(CaseError::invalid(
            "mpc.gencost",
            format!("{} rows for {} generators", cost_rows.len(), gen_rows.len()),
        ));
    }
    let mut generators = Vec::with_capacity(gen_rows.len());
    for (k, (row, cost)) in gen_rows.iter().zip(&cost_rows).enumerate() {
        let p_max = row[8];
        let p_min = row[9];
        let status = if row.get(7).copied().unwrap_or(1.0) > 0.0 { Status::In } else { Status::Out };
        let ramp_per_min = row.get(16).copied().unwrap_or(0.0);
        let (no_load_cost, cost_curve) = convert_cost(cost, p_min, p_max, opts.segments, k + 1)?;
        generators.push(Generator {
            bus: bus_id(row[0], "mpc.gen", k)?,
            p_min,
            p_max,
            ramp_limit: (ramp_per_min > 0.0).then_some(ramp_per_min * 60.0),
            startup_cost: cost[1],
            no_load_cost,
            cost_curve,
            status,
        });
    }

    let case = GridCase {
        base_mva,
        buses,
        branches,
        generators,
        demand: DemandProfile { series: demand },
        renewables: Vec::new(),
    };
    case.validate()?;
    Ok(case)
}

/// Writes `case` as a matrix-block file. `Pd` is taken from `interval`;
/// counties and renewables have no matrix-block form and are dropped.
/// Costs are written as piecewise-linear (model 1) points.
pub fn to_mcase(case: &GridCase, interval: usize) -> String {
    let mut s = String::from("function mpc = case\nmpc.version = '2';\n");
    s += &format!("mpc.baseMVA = {};\n\nmpc.bus = [\n", case.base_mva);
    for b in &case.buses {
        let pd = case.demand.at(b.id, interval);
        s += &format!("\t{}\t1\t{pd}\t0\t0\t0\t1\t1\t0\t230\t1\t1.1\t0.9;\n", b.id);
    }
    s += "];\n\nmpc.gen = [\n";
    for g in &case.generators {
        let status = if g.in_service() { 1 } else { 0 };
        let ramp = g.ramp_limit.map_or(0.0, |r| r / 60.0);
        s += &format!(
            "\t{}\t0\t0\t0\t0\t1\t100\t{status}\t{}\t{}\t0\t0\t0\t0\t0\t0\t{ramp}\t0\t0\t0\t0;\n",
            g.bus, g.p_max, g.p_min
        );
    }
    s += "];\n\nmpc.branch = [\n";
    for br in &case.branches {
        let status = if br.in_service() { 1 } else { 0 };
        s += &format!(
            "\t{}\t{}\t0\t{}\t0\t{}\t0\t0\t0\t0\t{status}\t-360\t360;\n",
            br.from_bus,
            br.to_bus,
            br.reactance,
            br.flow_limit.unwrap_or(0.0)
        );
    }
    s += "];\n\nmpc.gencost = [\n";
    for g in &case.generators {
        let mut pts = vec![(g.p_min, g.no_load_cost)];
        let (mut prev, mut cost) = (g.p_min, g.no_load_cost);
        for seg in &g.cost_curve.segments {
            cost += (seg.breakpoint_mw - prev) * seg.slope;
            prev = seg.breakpoint_mw;
            pts.push((prev, cost));
        }
        s += &format!("\t1\t{}\t0\t{}", g.startup_cost, pts.len());
        for (p, c) in pts {
            s += &format!("\t{p}\t{c}");
        }
        s += ";\n";
    }
    s += "];\n";
    s
}

/// Converts one `mpc.gencost` row into `(no_load_cost, curve)`.
fn convert_cost(
    row: &[f64],
    p_min: f64,
    p_max: f64,
    segments: usize,
    row_no: usize,
) -> Result<(f64, CostCurve), CaseError> {
    let model = row[0];
    let n = row[3];
    if n < 1.0 || n.fract() != 0.0 {
        return Err(CaseError::invalid(format!("mpc.gencost row {row_no}"), format!("bad coefficient count {n}")));
    }
    let n = n as usize;
    let needed = if model == 1.0 { 4 + 2 * n } else { 4 + n };
    if row.len() < needed {
        return Err(CaseError::ColumnCount {
            block: "mpc.gencost".into(),
            row: row_no,
            expected: needed,
            found: row.len(),
        });
    }

    let (points, fixed): (Vec<(f64, f64)>, f64) = match model as i64 {
        2 => {
            let coeffs = &row[4..4 + n];
            if n == 3 && coeffs[0] < 0.0 {
                return Err(CaseError::NonConvexCost { row: row_no });
            }
            let constant = coeffs[n - 1];
            let variable = |p: f64| coeffs[..n - 1].iter().fold(0.0, |acc, c| acc * p + c) * p;
            let pts = (0..=segments)
                .map(|k| {
                    let p = if k == segments {
                        p_max
                    } else {
                        p_min + (p_max - p_min) * k as f64 / segments as f64
                    };
                    (p, variable(p))
                })
                .collect();
            (pts, constant)
        }
        1 => {
            let pts: Vec<(f64, f64)> = (0..n).map(|k| (row[4 + 2 * k], row[5 + 2 * k])).collect();
            (pts, 0.0)
        }
        other => {
            return Err(CaseError::invalid(
                format!("mpc.gencost row {row_no}"),
                format!("unsupported cost model {other}"),
            ));
        }
    };

    if p_max <= p_min {
        let at_min = interpolate(&points, p_min);
        return Ok((fixed + at_min, CostCurve::default()));
    }

    let mut segs: Vec<Segment> = Vec::new();
    let mut prev = (p_min, interpolate(&points, p_min));
    let mut knots: Vec<f64> = points.iter().map(|p| p.0).filter(|&p| p > p_min && p < p_max).collect();
    knots.push(p_max);
    for p in knots {
        let cost = interpolate(&points, p);
        let slope = (cost - prev.1) / (p - prev.0);
        match segs.last_mut() {
            Some(last) if (slope - last.slope).abs() <= 1e-12 * slope.abs().max(1.0) => {
                last.breakpoint_mw = p;
            }
            Some(last) if slope < last.slope => return Err(CaseError::NonConvexCost { row: row_no }),
            _ => segs.push(Segment { breakpoint_mw: p, slope }),
        }
        prev = (p, cost);
    }
    Ok((fixed + interpolate(&points, p_min), CostCurve { segments: segs }))
}

/// Linear interpolation through sorted `(p, cost)` points, extrapolating
/// from the end segments.
fn interpolate(points: &[(f64, f64)], p: f64) -> f64 {
    if let Some(&(_, c)) = points.iter().find(|(x, _)| *x == p) {
        return c;
    }
    if points.len() == 1 {
        return points[0].1;
    }
    let k = points
        .windows(2)
        .position(|w| p <= w[1].0)
        .unwrap_or(points.len() - 2);
    let (x0, y0) = points[k];
    let (x1, y1) = points[k + 1];
    y0 + (y1 - y0) * (p - x0) / (x1 - x0)
}

fn bus_id(v: f64, block: &str, row: usize) -> Result<BusId, CaseError> {
    if v >= 0.0 && v.fract() == 0.0 && v <= BusId::MAX as f64 {
        Ok(v as BusId)
    } else {
        Err(CaseError::invalid(format!("{block} row {}", row + 1), format!("bad bus id {v}")))
    }
}

fn strip_comments(source: &str) -> String {
    source
        .lines()
        .map(|l| l.split('%').next().unwrap_or(""))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Text between `name =` and the terminating `;` (scalars) or the
/// enclosing brackets (matrices).
fn block_text<'a>(text: &'a str, name: &str) -> Result<&'a str, CaseError> {
    let mut search = 0;
    while let Some(pos) = text[search..].find(name) {
        let start = search + pos;
        let after = &text[start + name.len()..];
        let before_ok = start == 0 || !is_ident(text.as_bytes()[start - 1]);
        let rest = after.trim_start();
        if before_ok && rest.starts_with('=') {
            let body = rest[1..].trim_start();
            if let Some(inner) = body.strip_prefix('[') {
                let end = inner
                    .find(']')
                    .ok_or_else(|| CaseError::invalid(name, "unterminated matrix"))?;
                return Ok(&inner[..end]);
            }
            let end = body.find(';').unwrap_or(body.len());
            return Ok(&body[..end]);
        }
        search = start + name.len();
    }
    Err(CaseError::MissingBlock(name.to_string()))
}

fn is_ident(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'.'
}

fn matrix(text: &str, name: &str, min_cols: usize) -> Result<Vec<Vec<f64>>, CaseError> {
    let body = block_text(text, name)?;
    let mut rows = Vec::new();
    let mut width = None;
    for line in body.split([';', '\n']) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row_no = rows.len() + 1;
        let row: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>().map_err(|_| {
                    CaseError::invalid(format!("{name} row {row_no}"), format!("`{t}` is not a number"))
                })
            })
            .collect::<Result<_, _>>()?;
        let expected = *width.get_or_insert(row.len().max(min_cols));
        // gencost rows may legitimately differ in length (different n).
        let mismatch = if name == "mpc.gencost" { row.len() < min_cols } else { row.len() != expected };
        if mismatch || row.len() < min_cols {
            return Err(CaseError::ColumnCount {
                block: name.to_string(),
                row: row_no,
                expected,
                found: row.len(),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_bus(gencost: &str, branch_x: f64) -> String {
        format!(
            "function mpc = toy\n\
             mpc.version = '2';\n\
             mpc.baseMVA = 100;\n\
             %% bus data\n\
             mpc.bus = [\n\
             \t1\t3\t0\t0\t0\t0\t1\t1\t0\t230\t1\t1.1\t0.9;\n\
             \t2\t1\t80\t0\t0\t0\t1\t1\t0\t230\t1\t1.1\t0.9;\n\
             ];\n\
             mpc.gen = [\n\
             \t1\t0\t0\t0\t0\t1\t100\t1\t100\t0;\n\
             ];\n\
             mpc.branch = [\n\
             \t1\t2\t0.01\t{branch_x}\t0\t150\t0\t0\t0\t0\t1\t-360\t360;\n\
             ];\n\
             mpc.gencost = [\n\
             \t{gencost};\n\
             ];\n"
        )
    }

    #[test]
    fn linear_cost_is_one_segment() {
        let case = parse_mcase(&two_bus("2 0 0 2 10 0", 0.1)).unwrap();
        let g = &case.generators[0];
        assert_eq!(g.cost_curve.segments, vec![Segment { breakpoint_mw: 100.0, slope: 10.0 }]);
        assert_eq!(g.no_load_cost, 0.0);
        assert_eq!(case.branches[0].flow_limit, Some(150.0));
        assert_eq!(case.demand.series[&2], vec![80.0; 24]);
        assert_eq!(g.ramp_limit, None);
    }

    #[test]
    fn constant_term_becomes_no_load_cost() {
        // Coefficients are highest degree first: 0·p + 10.
        let case = parse_mcase(&two_bus("2 0 0 2 0 10", 0.1)).unwrap();
        let g = &case.generators[0];
        assert_eq!(g.no_load_cost, 10.0);
        assert_eq!(g.cost_curve.segments, vec![Segment { breakpoint_mw: 100.0, slope: 0.0 }]);
    }

    #[test]
    fn quadratic_chords() {
        let opts = McaseOptions { segments: 2, hours: 24 };
        let case = parse_mcase_with(&two_bus("2 0 0 3 0.01 20 0", 0.1), &opts).unwrap();
        let segs = &case.generators[0].cost_curve.segments;
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].breakpoint_mw, 50.0);
        assert!((segs[0].slope - 20.5).abs() < 1e-12);
        assert!((segs[1].slope - 21.5).abs() < 1e-12);
    }

    #[test]
    fn concave_quadratic_is_rejected() {
        let err = parse_mcase(&two_bus("2 0 0 3 -0.01 20 0", 0.1)).unwrap_err();
        assert_eq!(err, CaseError::NonConvexCost { row: 1 });
    }

    #[test]
    fn zero_reactance_is_rejected() {
        let err = parse_mcase(&two_bus("2 0 0 2 10 0", 0.0)).unwrap_err();
        assert_eq!(err, CaseError::ZeroReactance { row: 1 });
        assert!(err.to_string().contains("zero reactance"));
    }

    #[test]
    fn missing_block_is_named() {
        let text = two_bus("2 0 0 2 10 0", 0.1).replace("mpc.branch", "mpc.brunch");
        assert_eq!(parse_mcase(&text).unwrap_err(), CaseError::MissingBlock("mpc.branch".into()));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let text = two_bus("2 0 0 2 10 0", 0.1).replace("\t2\t1\t80\t0\t0\t0\t1\t1\t0\t230\t1\t1.1\t0.9;", "\t2\t1\t80;");
        assert!(matches!(parse_mcase(&text), Err(CaseError::ColumnCount { row: 2, .. })));
    }

    #[test]
    fn bus_name_block_does_not_shadow_bus() {
        let text = two_bus("2 0 0 2 10 0", 0.1).replace("mpc.bus = [", "mpc.bus_name = {\n'a';\n};\nmpc.bus = [");
        assert_eq!(parse_mcase(&text).unwrap().buses.len(), 2);
    }

    #[test]
    fn ramp_column_is_per_minute() {
        let text = two_bus("2 0 0 2 10 0", 0.1).replace(
            "\t1\t0\t0\t0\t0\t1\t100\t1\t100\t0;",
            "\t1\t0\t0\t0\t0\t1\t100\t1\t100\t0\t0\t0\t0\t0\t0\t0\t2;",
        );
        assert_eq!(parse_mcase(&text).unwrap().generators[0].ramp_limit, Some(120.0));
    }

    #[test]
    fn writer_round_trips_the_dc_model() {
        let mut case = crate::case::tests::three_bus();
        case.branches[1].status = Status::Out;
        case.generators[0].startup_cost = 250.0;
        case.generators[0].p_min = 20.0;
        case.generators[0].no_load_cost = 200.0;
        let back = parse_mcase(&to_mcase(&case, 0)).unwrap();
        assert_eq!(back.branches, case.branches);
        assert_eq!(back.demand, case.demand);
        for (a, b) in back.generators.iter().zip(&case.generators) {
            assert_eq!((a.bus, a.p_min, a.p_max, a.startup_cost), (b.bus, b.p_min, b.p_max, b.startup_cost));
            assert_eq!(a.ramp_limit, b.ramp_limit);
            assert!((a.no_load_cost - b.no_load_cost).abs() < 1e-9);
            for (x, y) in a.cost_curve.segments.iter().zip(&b.cost_curve.segments) {
                assert!((x.breakpoint_mw - y.breakpoint_mw).abs() < 1e-9);
                assert!((x.slope - y.slope).abs() < 1e-9);
            }
        }
    }
}
