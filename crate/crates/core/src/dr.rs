//! Demand-response economics for a flexible mining load: net mining reward,
//! the static portfolio LP, price-driven deployment and Monte-Carlo profit
//! bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{solve_lp, LinearProgram, LpError, LpStatus, Relation};
use crate::market::PriceRecord;

pub const HOURS_PER_YEAR: f64 = 8760.0;
/// Lower and upper percentile of the reported profit band.
pub const PERCENTILES: (f64, f64) = (2.5, 97.5);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DrError {
    #[error("no demand-response programs given")]
    NoPrograms,
    #[error("capacity must be positive, got {0} MW")]
    Capacity(f64),
    #[error("{what} has {found} intervals, expected {expected}")]
    Length { what: String, expected: usize, found: usize },
    #[error("{what}[{t}] = {value} is out of range")]
    Value { what: String, t: usize, value: f64 },
    #[error("price record has no feasible interval")]
    NoFeasibleInterval,
    #[error("at least one Monte-Carlo draw is required")]
    NoDraws,
    #[error("bad noise specification: {0}")]
    Noise(String),
    #[error("{0}")]
    Csv(String),
    #[error("portfolio LP: {0}")]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningEconomics {
    /// $/BTC per interval.
    pub btc_usd: Vec<f64>,
    /// MWh per BTC per interval.
    pub difficulty_mwh_per_btc: Vec<f64>,
    /// Electricity price paid by the miner, $/MWh.
    pub elec_price_usd_mwh: Vec<f64>,
}

impl MiningEconomics {
    pub fn constant(btc_usd: f64, difficulty: f64, elec_price: f64, intervals: usize) -> Self {
        MiningEconomics {
            btc_usd: vec![btc_usd; intervals],
            difficulty_mwh_per_btc: vec![difficulty; intervals],
            elec_price_usd_mwh: vec![elec_price; intervals],
        }
    }

    pub fn len(&self) -> usize {
        self.btc_usd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.btc_usd.is_empty()
    }

    pub fn validate(&self) -> Result<(), DrError> {
        let n = self.len();
        for (what, s) in [
            ("difficulty_mwh_per_btc", &self.difficulty_mwh_per_btc),
            ("elec_price_usd_mwh", &self.elec_price_usd_mwh),
        ] {
            if s.len() != n {
                return Err(DrError::Length {
                    what: what.into(),
                    expected: n,
                    found: s.len(),
                });
            }
        }
        for (t, &d) in self.difficulty_mwh_per_btc.iter().enumerate() {
            if !(d.is_finite() && d > 0.0) {
                return Err(DrError::Value {
                    what: "difficulty_mwh_per_btc".into(),
                    t,
                    value: d,
                });
            }
        }
        let finite = |what: &str, s: &[f64]| match s.iter().position(|v| !v.is_finite()) {
            Some(t) => Err(DrError::Value {
                what: what.into(),
                t,
                value: s[t],
            }),
            None => Ok(()),
        };
        finite("btc_usd", &self.btc_usd)?;
        finite("elec_price_usd_mwh", &self.elec_price_usd_mwh)
    }

    /// Net reward of mining one MWh at `t`, $/MWh. Negative when mining loses money.
    pub fn net_reward(&self, t: usize) -> f64 {
        self.btc_usd[t] / self.difficulty_mwh_per_btc[t] - self.elec_price_usd_mwh[t]
    }

    /// The series restricted to `intervals`, in that order.
    pub fn select(&self, intervals: &[usize]) -> Self {
        let pick = |s: &[f64]| intervals.iter().map(|&t| s[t]).collect();
        MiningEconomics {
            btc_usd: pick(&self.btc_usd),
            difficulty_mwh_per_btc: pick(&self.difficulty_mwh_per_btc),
            elec_price_usd_mwh: pick(&self.elec_price_usd_mwh),
        }
    }

    /// `interval,btc_usd,difficulty_mwh_per_btc,elec_price_usd_mwh`; rows are
    /// positional.
    pub fn from_csv(text: &str) -> Result<Self, DrError> {
        let rows = read_table(text, &["interval", "btc_usd", "difficulty_mwh_per_btc", "elec_price_usd_mwh"])?;
        let col = |k: usize| rows.iter().map(|r| r[k]).collect();
        let econ = MiningEconomics {
            btc_usd: col(1),
            difficulty_mwh_per_btc: col(2),
            elec_price_usd_mwh: col(3),
        };
        econ.validate()?;
        Ok(econ)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["interval", "btc_usd", "difficulty_mwh_per_btc", "elec_price_usd_mwh"])
            .expect("in-memory write");
        for t in 0..self.len() {
            w.write_record([
                t.to_string(),
                self.btc_usd[t].to_string(),
                self.difficulty_mwh_per_btc[t].to_string(),
                self.elec_price_usd_mwh[t].to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
    }
}

fn read_table(text: &str, header: &[&str]) -> Result<Vec<Vec<f64>>, DrError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let found = rdr.headers().map_err(|e| DrError::Csv(e.to_string()))?;
    if found.iter().collect::<Vec<_>>() != header {
        return Err(DrError::Csv(format!("expected header `{}`", header.join(","))));
    }
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| DrError::Csv(e.to_string()))?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| DrError::Csv(format!("row {}: non-numeric value", k + 1)))?;
        out.push(row);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProgramKind {
    /// Revenue and deployment taken from an operator record.
    ReserveRecord,
    /// Deployed whenever the bus-average LMP exceeds `threshold`; paid the
    /// bus-average LMP for availability.
    PriceDriven { threshold: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrProgram {
    pub name: String,
    /// Availability payment, $/MWh per interval.
    pub revenue: Vec<f64>,
    /// Deployed fraction of enrolled capacity per interval, in [0, 1].
    pub deployment: Vec<f64>,
    pub kind: ProgramKind,
}

impl DrProgram {
    pub fn reserve(name: impl Into<String>, revenue: Vec<f64>, deployment: Vec<f64>) -> Self {
        DrProgram {
            name: name.into(),
            revenue,
            deployment,
            kind: ProgramKind::ReserveRecord,
        }
    }

    /// Price-driven program over the record's feasible intervals.
    pub fn price_driven(name: impl Into<String>, record: &PriceRecord, threshold: f64) -> Result<Self, DrError> {
        let avg = feasible_average(record)?;
        Ok(DrProgram {
            name: name.into(),
            deployment: deployment_for(&avg, threshold),
            revenue: avg,
            kind: ProgramKind::PriceDriven { threshold },
        })
    }

    pub fn len(&self) -> usize {
        self.revenue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.revenue.is_empty()
    }

    pub fn validate(&self, horizon: usize) -> Result<(), DrError> {
        for (what, s) in [("revenue", &self.revenue), ("deployment", &self.deployment)] {
            if s.len() != horizon {
                return Err(DrError::Length {
                    what: format!("{} {what}", self.name),
                    expected: horizon,
                    found: s.len(),
                });
            }
        }
        if let Some(t) = self.revenue.iter().position(|v| !v.is_finite()) {
            return Err(DrError::Value {
                what: format!("{} revenue", self.name),
                t,
                value: self.revenue[t],
            });
        }
        if let Some(t) = self.deployment.iter().position(|d| !(0.0..=1.0).contains(d)) {
            return Err(DrError::Value {
                what: format!("{} deployment", self.name),
                t,
                value: self.deployment[t],
            });
        }
        Ok(())
    }

    /// Per-MW profit over the horizon: `Σ_t [p̂(t) − d̂(t)·r̂(t)]`.
    pub fn score(&self, econ: &MiningEconomics) -> f64 {
        (0..self.len())
            .map(|t| self.revenue[t] - self.deployment[t] * econ.net_reward(t))
            .sum()
    }

    /// `interval,revenue_usd_mwh,deployment_frac`.
    pub fn from_csv(name: impl Into<String>, text: &str) -> Result<Self, DrError> {
        let rows = read_table(text, &["interval", "revenue_usd_mwh", "deployment_frac"])?;
        let p = DrProgram::reserve(name, rows.iter().map(|r| r[1]).collect(), rows.iter().map(|r| r[2]).collect());
        p.validate(p.len())?;
        Ok(p)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["interval", "revenue_usd_mwh", "deployment_frac"])
            .expect("in-memory write");
        for t in 0..self.len() {
            w.write_record([t.to_string(), self.revenue[t].to_string(), self.deployment[t].to_string()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
    }

    /// Reserve record with constant revenue, deployed fully in each interval
    /// with probability `frequency`.
    pub fn synthetic_reserve(name: impl Into<String>, intervals: usize, revenue: f64, frequency: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let deployment = (0..intervals)
            .map(|_| if rng.random::<f64>() < frequency { 1.0 } else { 0.0 })
            .collect();
        DrProgram::reserve(name, vec![revenue; intervals], deployment)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSolution {
    /// MW enrolled per program.
    pub capacities: Vec<f64>,
    /// $ over the horizon.
    pub expected_profit: f64,
    /// Program holding all capacity, `None` for the opt-out vertex.
    pub binding: Option<usize>,
}

fn check_portfolio(programs: &[DrProgram], econ: &MiningEconomics, capacity: f64) -> Result<(), DrError> {
    if programs.is_empty() {
        return Err(DrError::NoPrograms);
    }
    if !(capacity.is_finite() && capacity > 0.0) {
        return Err(DrError::Capacity(capacity));
    }
    econ.validate()?;
    for p in programs {
        p.validate(econ.len())?;
    }
    Ok(())
}

/// Objective of the portfolio problem evaluated at `capacities`.
pub fn portfolio_profit(programs: &[DrProgram], econ: &MiningEconomics, capacities: &[f64]) -> f64 {
    let mut total = 0.0;
    for t in 0..econ.len() {
        let r = econ.net_reward(t);
        for (p, &c) in programs.iter().zip(capacities) {
            total += c * p.revenue[t] - c * p.deployment[t] * r;
        }
    }
    total
}

fn solution_at(programs: &[DrProgram], econ: &MiningEconomics, capacities: Vec<f64>) -> PortfolioSolution {
    let binding = capacities.iter().position(|&c| c > 0.0);
    PortfolioSolution {
        expected_profit: portfolio_profit(programs, econ, &capacities),
        capacities,
        binding,
    }
}

/// Chooses static enrolments `c ≥ 0, Σc ≤ C` maximising expected profit by
/// linear programming. Ties go to the lowest program index.
pub fn solve_portfolio(programs: &[DrProgram], econ: &MiningEconomics, capacity: f64) -> Result<PortfolioSolution, DrError> {
    check_portfolio(programs, econ, capacity)?;
    let scores: Vec<f64> = programs.iter().map(|p| p.score(econ)).collect();
    // Normalised so the simplex tolerances act on O(1) reduced costs.
    let scale = scores.iter().fold(0.0_f64, |m, s| m.max(s.abs())).max(f64::MIN_POSITIVE);
    let mut lp = LinearProgram::new();
    let vars: Vec<_> = scores
        .iter()
        .enumerate()
        .map(|(i, s)| lp.add_var(format!("c{i}"), -s / scale, 0.0, f64::INFINITY))
        .collect();
    lp.add_row("capacity", vars.iter().map(|&v| (v, 1.0)).collect(), Relation::Le, capacity);
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(DrError::Lp(LpError::Numerical(format!("portfolio LP ended {:?}", sol.status))));
    }
    Ok(solution_at(programs, econ, sol.x))
}

/// Evaluates the objective at the N+1 vertices `{0} ∪ {C·e_i}` and keeps the
/// best, preferring the earlier candidate on ties.
pub fn vertex_oracle(programs: &[DrProgram], econ: &MiningEconomics, capacity: f64) -> Result<PortfolioSolution, DrError> {
    check_portfolio(programs, econ, capacity)?;
    let mut best = solution_at(programs, econ, vec![0.0; programs.len()]);
    for i in 0..programs.len() {
        let mut c = vec![0.0; programs.len()];
        c[i] = capacity;
        let cand = solution_at(programs, econ, c);
        if cand.expected_profit > best.expected_profit {
            best = cand;
        }
    }
    Ok(best)
}

/// Bus-average LMP at each feasible interval of the record.
pub fn feasible_average(record: &PriceRecord) -> Result<Vec<f64>, DrError> {
    let avg: Vec<f64> = record.feasible_intervals().filter_map(|t| record.average_lmp(t)).collect();
    if avg.is_empty() {
        return Err(DrError::NoFeasibleInterval);
    }
    Ok(avg)
}

fn deployment_for(avg: &[f64], threshold: f64) -> Vec<f64> {
    avg.iter().map(|&a| if a > threshold { 1.0 } else { 0.0 }).collect()
}

/// 1 where the bus-average LMP exceeds `threshold`, else 0; infeasible
/// intervals are left out of the series.
pub fn price_driven_deployment(record: &PriceRecord, threshold: f64) -> Result<Vec<f64>, DrError> {
    Ok(deployment_for(&feasible_average(record)?, threshold))
}

/// Perturbation added to the bus-average LMP of every interval in a draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NoiseSpec {
    None,
    /// Zero-mean normal noise with standard deviation `sigma` $/MWh.
    Gaussian { sigma: f64 },
    /// Residuals resampled with replacement.
    Bootstrap { residuals: Vec<f64> },
}

impl NoiseSpec {
    /// Bootstrap residuals from a historical price series (deviations from its mean).
    pub fn from_history(prices: &[f64]) -> Result<Self, DrError> {
        if prices.is_empty() {
            return Err(DrError::Noise("empty price history".into()));
        }
        let mean = prices.iter().sum::<f64>() / prices.len() as f64;
        let spec = NoiseSpec::Bootstrap {
            residuals: prices.iter().map(|p| p - mean).collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DrError> {
        match self {
            NoiseSpec::None => Ok(()),
            NoiseSpec::Gaussian { sigma } if sigma.is_finite() && *sigma >= 0.0 => Ok(()),
            NoiseSpec::Gaussian { sigma } => Err(DrError::Noise(format!("sigma {sigma}"))),
            NoiseSpec::Bootstrap { residuals } if residuals.is_empty() => Err(DrError::Noise("no residuals".into())),
            NoiseSpec::Bootstrap { residuals } if residuals.iter().any(|r| !r.is_finite()) => {
                Err(DrError::Noise("non-finite residual".into()))
            }
            NoiseSpec::Bootstrap { .. } => Ok(()),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            NoiseSpec::None => "none".into(),
            NoiseSpec::Gaussian { sigma } => format!("gaussian(sigma={sigma})"),
            NoiseSpec::Bootstrap { residuals } => format!("bootstrap({} residuals)", residuals.len()),
        }
    }

    /// Noise for draw `draw`; a function of `(seed, draw)` only.
    fn sample(&self, seed: u64, draw: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(draw);
        match self {
            NoiseSpec::None => vec![0.0; n],
            NoiseSpec::Gaussian { sigma } => {
                let normal = Normal::new(0.0, *sigma).expect("validated sigma");
                (0..n).map(|_| normal.sample(&mut rng)).collect()
            }
            NoiseSpec::Bootstrap { residuals } => {
                (0..n).map(|_| residuals[rng.random_range(0..residuals.len())]).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitPoint {
    pub threshold: Option<f64>,
    /// $/MW·yr.
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitReport {
    pub program: String,
    pub points: Vec<ProfitPoint>,
    pub draws: usize,
    pub seed: u64,
    /// `8760 / T` with `T` the feasible intervals in the record.
    pub annualization_factor: f64,
    pub percentiles: (f64, f64),
    pub noise: String,
}

impl ProfitReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialisation is infallible")
    }

    /// `threshold,mean,lower,upper`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["threshold", "mean", "lower", "upper"]).expect("in-memory write");
        for p in &self.points {
            w.write_record([
                p.threshold.map(|v| v.to_string()).unwrap_or_default(),
                p.mean.to_string(),
                p.lower.to_string(),
                p.upper.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
    }
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 100].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn band(threshold: Option<f64>, mut profits: Vec<f64>) -> ProfitPoint {
    let mean = profits.iter().sum::<f64>() / profits.len() as f64;
    profits.sort_by(f64::total_cmp);
    ProfitPoint {
        threshold,
        mean,
        lower: percentile(&profits, PERCENTILES.0),
        upper: percentile(&profits, PERCENTILES.1),
    }
}

struct Horizon {
    intervals: Vec<usize>,
    avg: Vec<f64>,
    econ: MiningEconomics,
}

fn horizon(econ: &MiningEconomics, record: &PriceRecord) -> Result<Horizon, DrError> {
    econ.validate()?;
    if econ.len() != record.num_intervals() {
        return Err(DrError::Length {
            what: "economics series".into(),
            expected: record.num_intervals(),
            found: econ.len(),
        });
    }
    let intervals: Vec<usize> = record.feasible_intervals().collect();
    if intervals.is_empty() {
        return Err(DrError::NoFeasibleInterval);
    }
    Ok(Horizon {
        avg: feasible_average(record)?,
        econ: econ.select(&intervals),
        intervals,
    })
}

/// Per-MW profit of one draw over the feasible horizon, not annualised.
fn draw_profit(program: &DrProgram, h: &Horizon, noise: &[f64]) -> f64 {
    let mut total = 0.0;
    for (k, &t) in h.intervals.iter().enumerate() {
        let r = h.econ.net_reward(k);
        total += match program.kind {
            ProgramKind::PriceDriven { threshold } => {
                let a = h.avg[k] + noise[k];
                a - if a > threshold { r } else { 0.0 }
            }
            ProgramKind::ReserveRecord => program.revenue[t] - program.deployment[t] * r,
        };
    }
    total
}

/// Annual per-MW profit band of `program` over the record. Reserve
/// programs use their recorded series and are unaffected by price noise.
pub fn annual_profit(
    program: &DrProgram,
    econ: &MiningEconomics,
    record: &PriceRecord,
    draws: usize,
    seed: u64,
    noise: &NoiseSpec,
) -> Result<ProfitReport, DrError> {
    let threshold = match program.kind {
        ProgramKind::PriceDriven { threshold } => Some(threshold),
        ProgramKind::ReserveRecord => {
            program.validate(record.num_intervals())?;
            None
        }
    };
    let mut report = sweep(program, econ, record, &[threshold], draws, seed, noise)?;
    report.program = program.name.clone();
    Ok(report)
}

/// Price-driven profit band at each threshold. Draw `k` sees the same
/// price noise at every threshold, so the curves are comparable.
pub fn threshold_sweep(
    econ: &MiningEconomics,
    record: &PriceRecord,
    thresholds: &[f64],
    draws: usize,
    seed: u64,
    noise: &NoiseSpec,
) -> Result<ProfitReport, DrError> {
    let th: Vec<Option<f64>> = thresholds.iter().map(|&t| Some(t)).collect();
    let program = DrProgram {
        name: "price_driven".into(),
        revenue: vec![],
        deployment: vec![],
        kind: ProgramKind::PriceDriven { threshold: 0.0 },
    };
    sweep(&program, econ, record, &th, draws, seed, noise)
}

fn sweep(
    program: &DrProgram,
    econ: &MiningEconomics,
    record: &PriceRecord,
    thresholds: &[Option<f64>],
    draws: usize,
    seed: u64,
    noise: &NoiseSpec,
) -> Result<ProfitReport, DrError> {
    if draws == 0 {
        return Err(DrError::NoDraws);
    }
    noise.validate()?;
    let h = horizon(econ, record)?;
    let factor = HOURS_PER_YEAR / h.intervals.len() as f64;
    let noisy = program.kind != ProgramKind::ReserveRecord;
    // [draw][threshold]
    let per_draw: Vec<Vec<f64>> = (0..draws as u64)
        .into_par_iter()
        .map(|d| {
            let eps = if noisy {
                noise.sample(seed, d, h.avg.len())
            } else {
                vec![0.0; h.avg.len()]
            };
            thresholds
                .iter()
                .map(|th| {
                    let p = match th {
                        Some(t) => DrProgram {
                            kind: ProgramKind::PriceDriven { threshold: *t },
                            ..program.clone()
                        },
                        None => program.clone(),
                    };
                    draw_profit(&p, &h, &eps) * factor
                })
                .collect()
        })
        .collect();
    let points = thresholds
        .iter()
        .enumerate()
        .map(|(k, th)| band(*th, per_draw.iter().map(|d| d[k]).collect()))
        .collect();
    Ok(ProfitReport {
        program: program.name.clone(),
        points,
        draws,
        seed,
        annualization_factor: factor,
        percentiles: PERCENTILES,
        noise: if noisy { noise.describe() } else { "none".into() },
    })
}
