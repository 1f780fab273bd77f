//! LMP statistics over a price record: bus averages, hour-of-day profile,
//! peak-window means, volatility and county means.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::{GridCase, DAY};
use crate::market::PriceRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("price record has no feasible interval")]
    AllInfeasible,
    #[error("interval {0} is infeasible")]
    IntervalInfeasible(usize),
    #[error("interval {interval} is outside the {intervals}-interval record")]
    IntervalOutOfRange { interval: usize, intervals: usize },
    #[error("horizons differ: {baseline} vs {scenario} intervals")]
    HorizonMismatch { baseline: usize, scenario: usize },
    #[error("bad hour window {0}..{1}")]
    Window(usize, usize),
}

/// What the standard deviation is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdMode {
    /// Population std of the per-interval bus-average series.
    #[default]
    AverageSeries,
    /// Population std over every bus-interval price.
    AllSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsOptions {
    /// Weight bus prices by their demand in the interval.
    pub weighted: bool,
    pub std_mode: StdMode,
    /// Hour-of-day window `[start, end)`.
    pub peak_window: (usize, usize),
}

impl Default for StatsOptions {
    fn default() -> Self {
        StatsOptions {
            weighted: false,
            std_mode: StdMode::AverageSeries,
            peak_window: (15, 17),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmpStats {
    /// Absolute index of the record's first interval.
    pub first_interval: usize,
    /// Bus-mean price per interval, `None` when infeasible.
    pub avg_lmp: Vec<Option<f64>>,
    /// Mean of `avg_lmp` per hour of day over feasible days.
    pub hourly_lmp: Vec<Option<f64>>,
    pub overall_mean: f64,
    pub std_dev: f64,
    pub peak_window: (usize, usize),
    pub peak_mean: f64,
    pub county_lmp: BTreeMap<String, Vec<Option<f64>>>,
    pub feasible_intervals: usize,
}

impl LmpStats {
    /// Mean of `avg_lmp` over feasible intervals whose hour of day is in
    /// `[start, end)`.
    pub fn window_mean(&self, start: usize, end: usize) -> Result<f64, AnalyticsError> {
        if start >= end || end > DAY {
            return Err(AnalyticsError::Window(start, end));
        }
        mean(
            self.avg_lmp
                .iter()
                .enumerate()
                .filter(|(t, _)| (start..end).contains(&(t % DAY)))
                .filter_map(|(_, v)| *v),
        )
        .ok_or(AnalyticsError::AllInfeasible)
    }

    pub fn summary(&self) -> Summary {
        Summary {
            overall_mean: self.overall_mean,
            peak_mean: self.peak_mean,
            std_dev: self.std_dev,
        }
    }

    pub fn stats_csv(&self) -> String {
        let mut s = String::from("interval,avg_lmp\n");
        for (t, v) in self.avg_lmp.iter().enumerate() {
            let _ = writeln!(s, "{},{}", self.first_interval + t, fmt_opt(*v));
        }
        s
    }

    pub fn hourly_csv(&self) -> String {
        let mut s = String::from("hour,lmp\n");
        for (h, v) in self.hourly_lmp.iter().enumerate() {
            let _ = writeln!(s, "{h},{}", fmt_opt(*v));
        }
        s
    }
}

/// The three Table-II-style figures of one setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub overall_mean: f64,
    pub peak_mean: f64,
    pub std_dev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub baseline: Summary,
    pub scenario: Summary,
    pub delta_overall: f64,
    pub delta_peak: f64,
    pub delta_std: f64,
    /// Peak-window prices rose more than the overall mean.
    pub non_uniform: bool,
}

impl ComparisonRow {
    pub fn from_summaries(baseline: Summary, scenario: Summary) -> Self {
        let delta_overall = scenario.overall_mean - baseline.overall_mean;
        let delta_peak = scenario.peak_mean - baseline.peak_mean;
        ComparisonRow {
            baseline,
            scenario,
            delta_overall,
            delta_peak,
            delta_std: scenario.std_dev - baseline.std_dev,
            non_uniform: delta_peak > delta_overall,
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn mean(it: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in it {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

fn population_std(values: &[f64]) -> f64 {
    let Some(m) = mean(values.iter().copied()) else { return 0.0 };
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Bus-mean at absolute record interval `t` over the positions in `buses`.
fn bus_mean(record: &PriceRecord, case: &GridCase, buses: &[usize], t: usize, weighted: bool) -> Option<f64> {
    if !record.interval_feasible(t) || buses.is_empty() {
        return None;
    }
    let price = |b: usize| record.lmp[b][t].expect("feasible interval has prices");
    if weighted {
        let at = record.first_day * DAY + t;
        let w: Vec<f64> = buses
            .iter()
            .map(|&b| case.demand.series.get(&record.bus_ids[b]).map_or(0.0, |s| s.get(at).copied().unwrap_or(0.0)))
            .collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            return Some(buses.iter().zip(&w).map(|(&b, wi)| wi * price(b)).sum::<f64>() / total);
        }
    }
    mean(buses.iter().map(|&b| price(b)))
}

fn counties(record: &PriceRecord, case: &GridCase) -> BTreeMap<String, Vec<usize>> {
    let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (b, &id) in record.bus_ids.iter().enumerate() {
        if let Some(c) = case.county_of(id) {
            out.entry(c.to_string()).or_default().push(b);
        }
    }
    out
}

pub fn compute_stats(record: &PriceRecord, case: &GridCase, opts: &StatsOptions) -> Result<LmpStats, AnalyticsError> {
    let (ps, pe) = opts.peak_window;
    if ps >= pe || pe > DAY {
        return Err(AnalyticsError::Window(ps, pe));
    }
    let all: Vec<usize> = (0..record.bus_ids.len()).collect();
    let n = record.num_intervals();
    let avg_lmp: Vec<Option<f64>> = (0..n).map(|t| bus_mean(record, case, &all, t, opts.weighted)).collect();
    let feasible: Vec<f64> = avg_lmp.iter().filter_map(|v| *v).collect();
    let overall_mean = mean(feasible.iter().copied()).ok_or(AnalyticsError::AllInfeasible)?;
    let hourly_lmp = (0..DAY)
        .map(|h| mean((h..n).step_by(DAY).filter_map(|t| avg_lmp[t])))
        .collect();
    let std_dev = match opts.std_mode {
        StdMode::AverageSeries => population_std(&feasible),
        StdMode::AllSamples => {
            let samples: Vec<f64> = record
                .feasible_intervals()
                .flat_map(|t| record.lmp.iter().map(move |s| s[t].expect("feasible")))
                .collect();
            population_std(&samples)
        }
    };
    let county_lmp = counties(record, case)
        .into_iter()
        .map(|(c, buses)| {
            let series = (0..n).map(|t| bus_mean(record, case, &buses, t, opts.weighted)).collect();
            (c, series)
        })
        .collect();
    let mut stats = LmpStats {
        first_interval: record.first_day * DAY,
        avg_lmp,
        hourly_lmp,
        overall_mean,
        std_dev,
        peak_window: opts.peak_window,
        peak_mean: 0.0,
        county_lmp,
        feasible_intervals: feasible.len(),
    };
    stats.peak_mean = stats.window_mean(ps, pe)?;
    Ok(stats)
}

pub fn compare(baseline: &LmpStats, scenario: &LmpStats, peak_window: (usize, usize)) -> Result<ComparisonRow, AnalyticsError> {
    if baseline.avg_lmp.len() != scenario.avg_lmp.len() {
        return Err(AnalyticsError::HorizonMismatch {
            baseline: baseline.avg_lmp.len(),
            scenario: scenario.avg_lmp.len(),
        });
    }
    let (s, e) = peak_window;
    let b = Summary {
        peak_mean: baseline.window_mean(s, e)?,
        ..baseline.summary()
    };
    let c = Summary {
        peak_mean: scenario.window_mean(s, e)?,
        ..scenario.summary()
    };
    Ok(ComparisonRow::from_summaries(b, c))
}

/// Unweighted bus-mean price per county at one record interval.
pub fn county_table(record: &PriceRecord, case: &GridCase, interval: usize) -> Result<BTreeMap<String, f64>, AnalyticsError> {
    if interval >= record.num_intervals() {
        return Err(AnalyticsError::IntervalOutOfRange {
            interval,
            intervals: record.num_intervals(),
        });
    }
    if !record.interval_feasible(interval) {
        return Err(AnalyticsError::IntervalInfeasible(interval));
    }
    Ok(counties(record, case)
        .into_iter()
        .map(|(c, buses)| {
            let v = bus_mean(record, case, &buses, interval, false).expect("feasible interval");
            (c, v)
        })
        .collect())
}

pub fn county_csv(table: &BTreeMap<String, f64>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["county", "lmp"]).expect("in-memory write");
    for (c, v) in table {
        w.write_record([c.as_str(), &v.to_string()]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
}

pub fn comparison_csv(rows: &[(String, ComparisonRow)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "setting",
        "overall_mean",
        "peak_mean",
        "std_dev",
        "delta_overall",
        "delta_peak",
        "delta_std",
        "non_uniform",
    ])
    .expect("in-memory write");
    for (name, r) in rows {
        w.write_record([
            name.clone(),
            r.scenario.overall_mean.to_string(),
            r.scenario.peak_mean.to_string(),
            r.scenario.std_dev.to_string(),
            r.delta_overall.to_string(),
            r.delta_peak.to_string(),
            r.delta_std.to_string(),
            r.non_uniform.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::tests::three_bus;
    use crate::market::{DayRecord, DayStatus, RecordMetadata};

    /// Builds a record directly from `[bus][interval]` prices; a day with any
    /// `None` is marked infeasible.
    pub(crate) fn record(bus_ids: Vec<u32>, lmp: Vec<Vec<Option<f64>>>) -> PriceRecord {
        let days = lmp[0].len() / DAY;
        PriceRecord {
            bus_ids,
            first_day: 0,
            days: (0..days)
                .map(|d| {
                    let ok = lmp[0][d * DAY].is_some();
                    DayRecord {
                        day: d,
                        status: if ok { DayStatus::Optimal } else { DayStatus::Infeasible },
                        objective: ok.then_some(0.0),
                        detail: None,
                    }
                })
                .collect(),
            lmp,
            metadata: RecordMetadata {
                scenario: "test".into(),
                seed: 0,
                case_hash: String::new(),
            },
        }
    }

    fn flat(bus_ids: Vec<u32>, prices: &[f64], days: usize) -> PriceRecord {
        let lmp = prices.iter().map(|&p| vec![Some(p); days * DAY]).collect();
        record(bus_ids, lmp)
    }

    #[test]
    fn constant_prices() {
        let case = three_bus();
        let s = compute_stats(&flat(vec![1, 2, 3], &[30.0; 3], 1), &case, &StatsOptions::default()).unwrap();
        assert_eq!(s.overall_mean, 30.0);
        assert_eq!(s.std_dev, 0.0);
        assert_eq!(s.county_lmp["North"], vec![Some(30.0); DAY]);
        assert_eq!(s.window_mean(0, 24).unwrap(), s.overall_mean);
    }

    #[test]
    fn two_bus_average() {
        let case = three_bus();
        let s = compute_stats(&flat(vec![1, 2], &[20.0, 40.0], 1), &case, &StatsOptions::default()).unwrap();
        assert!(s.avg_lmp.iter().all(|v| *v == Some(30.0)));
    }

    #[test]
    fn diurnal_profile_matches_hand_means() {
        // Day 0 price = h, day 1 price = 2h + 1 on a single bus.
        let series: Vec<Option<f64>> = (0..2 * DAY)
            .map(|t| Some(if t < DAY { t as f64 } else { 2.0 * (t - DAY) as f64 + 1.0 }))
            .collect();
        let s = compute_stats(&record(vec![1], vec![series]), &three_bus(), &StatsOptions::default()).unwrap();
        for h in 0..DAY {
            let expect = (h as f64 + 2.0 * h as f64 + 1.0) / 2.0;
            assert!((s.hourly_lmp[h].unwrap() - expect).abs() < 1e-12);
        }
        assert!((s.window_mean(0, 24).unwrap() - s.overall_mean).abs() < 1e-9);
    }

    #[test]
    fn infeasible_days_shrink_the_divisor() {
        let mut series = vec![Some(10.0); DAY];
        series.extend(vec![None; DAY]);
        let s = compute_stats(&record(vec![1], vec![series]), &three_bus(), &StatsOptions::default()).unwrap();
        assert_eq!(s.overall_mean, 10.0);
        assert_eq!(s.feasible_intervals, DAY);
        let dead = record(vec![1], vec![vec![None; DAY]]);
        assert_eq!(
            compute_stats(&dead, &three_bus(), &StatsOptions::default()),
            Err(AnalyticsError::AllInfeasible)
        );
    }

    #[test]
    fn reported_table_rows_flag_non_uniformity() {
        let row = ComparisonRow::from_summaries(
            Summary {
                overall_mean: 27.18,
                peak_mean: 42.60,
                std_dev: 11.63,
            },
            Summary {
                overall_mean: 30.19,
                peak_mean: 49.10,
                std_dev: 51.06,
            },
        );
        assert!((row.delta_overall - 3.01).abs() < 1e-9);
        assert!((row.delta_peak - 6.50).abs() < 1e-9);
        assert!((row.delta_std - 39.43).abs() < 1e-9);
        assert!(row.non_uniform);
    }

    #[test]
    fn off_peak_rise_is_uniform() {
        let case = three_bus();
        let base = compute_stats(&flat(vec![1], &[20.0], 1), &case, &StatsOptions::default()).unwrap();
        let series = (0..DAY).map(|h| Some(if (15..17).contains(&h) { 20.0 } else { 30.0 })).collect();
        let scen = compute_stats(&record(vec![1], vec![series]), &case, &StatsOptions::default()).unwrap();
        let row = compare(&base, &scen, (15, 17)).unwrap();
        assert!(row.delta_overall > 0.0);
        assert!(!row.non_uniform);
        let same = compare(&base, &base, (15, 17)).unwrap();
        assert_eq!((same.delta_overall, same.delta_peak, same.delta_std), (0.0, 0.0, 0.0));
    }

    #[test]
    fn county_rows() {
        let mut case = three_bus();
        case.buses[2].county = Some("South".into());
        let rec = flat(vec![1, 2, 3], &[10.0, 20.0, 30.0], 1);
        let table = county_table(&rec, &case, 5).unwrap();
        assert_eq!(table["North"], 15.0);
        assert_eq!(table["South"], 30.0);
        assert!(county_csv(&table).starts_with("county,lmp\nNorth,15\n"));
    }

    #[test]
    fn unmapped_buses_leave_county_means_alone() {
        // Bus 3 has no county in the fixture.
        let rec = flat(vec![1, 2, 3], &[10.0, 20.0, 90.0], 1);
        let table = county_table(&rec, &three_bus(), 0).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table["North"], 15.0);
    }

    #[test]
    fn weighted_means_follow_demand() {
        // Demand sits at buses 2 (120 MW) and 3 (30 MW).
        let rec = flat(vec![1, 2, 3], &[0.0, 10.0, 60.0], 1);
        let opts = StatsOptions {
            weighted: true,
            ..Default::default()
        };
        let s = compute_stats(&rec, &three_bus(), &opts).unwrap();
        assert!((s.overall_mean - (120.0 * 10.0 + 30.0 * 60.0) / 150.0).abs() < 1e-12);
    }

    #[test]
    fn bad_window_is_rejected() {
        let s = compute_stats(&flat(vec![1], &[1.0], 1), &three_bus(), &StatsOptions::default()).unwrap();
        assert!(s.window_mean(17, 15).is_err());
        assert!(s.window_mean(0, 25).is_err());
    }
}
