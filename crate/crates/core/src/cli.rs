//! Command-line front end: `simulate`, `sweep`, `portfolio`, `profit`,
//! `validate`, plus `rerun` (replay a manifest) and `demo` (write the bundled
//! inputs).
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 every market day
//! failed.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Component, Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::{comparison_csv, compute_stats, county_csv, county_table, StatsOptions, StdMode};
use crate::case::{parse_case, parse_county_csv, parse_mcase, parse_profile_csv, to_mcase, to_native_json, BusId, GridCase, DAY};
use crate::dr::{
    annual_profit, feasible_average, solve_portfolio, threshold_sweep, DrProgram, MiningEconomics, NoiseSpec,
    ProfitReport,
};
use crate::lp::{MbpOptions, SimplexOptions};
use crate::market::{run_horizon, DayStatus, MarketOptions, PriceRecord};
use crate::mining::{capacity_sweep, inject, MiningScenario, SweepSpec};
use crate::network::Reference;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_ALL_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gridmarket", version, about = "Market clearing and mining-load studies on DC grid cases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clear every day of the horizon and export prices and statistics.
    Simulate(RunArgs),
    /// Run a capacity × location sweep.
    Sweep(RunArgs),
    /// Solve the demand-response portfolio problem.
    Portfolio(RunArgs),
    /// Monte-Carlo profit bands over price thresholds, plus the portfolio.
    Profit(RunArgs),
    /// Parse and check a case without solving it.
    Validate(RunArgs),
    /// Repeat a run from its manifest.
    Rerun(RerunArgs),
    /// Write the bundled demo inputs and configs.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for sweeps and Monte-Carlo draws.
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<CaseFormat>,
    /// Overrides the config output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RerunArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CaseFormat {
    Native,
    Mcase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub gap: f64,
    pub node_cap: usize,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub max_iterations: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let m = MbpOptions::default();
        SolverConfig {
            gap: m.gap,
            node_cap: m.node_cap,
            feasibility_tol: m.simplex.feasibility_tol,
            optimality_tol: m.simplex.optimality_tol,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticsConfig {
    pub peak_window: (usize, usize),
    pub weighted: bool,
    pub std_mode: StdMode,
    /// Absolute intervals for `county_<interval>.csv`; default is the
    /// feasible interval with the highest average price.
    pub county_intervals: Option<Vec<usize>>,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        AnalyticsConfig {
            peak_window: (15, 17),
            weighted: false,
            std_mode: StdMode::AverageSeries,
            county_intervals: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramConfig {
    pub name: String,
    /// `interval,revenue_usd_mwh,deployment_frac`.
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum NoiseConfig {
    None,
    Gaussian { sigma: f64 },
    /// Residuals of a historical price file (`interval,price_usd_mwh`).
    Bootstrap { history: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfitConfig {
    /// Price CSV; its JSON sidecar sits next to it with a `.json` extension.
    pub price_record: PathBuf,
    pub economics: PathBuf,
    #[serde(default)]
    pub programs: Vec<ProgramConfig>,
    #[serde(default)]
    pub thresholds: Vec<f64>,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_noise")]
    pub noise: NoiseConfig,
    /// Mining capacity available for enrolment, MW.
    #[serde(default = "default_capacity")]
    pub capacity_mw: f64,
    /// Adds a price-driven program at this threshold to the portfolio.
    #[serde(default)]
    pub portfolio_threshold: Option<f64>,
}

fn default_draws() -> usize {
    1000
}

fn default_noise() -> NoiseConfig {
    NoiseConfig::None
}

fn default_capacity() -> f64 {
    1.0
}

/// JSON run configuration. Relative paths resolve against the config file's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub case: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<CaseFormat>,
    /// Hourly demand table replacing the case's own demand.
    #[serde(default)]
    pub demand: Option<PathBuf>,
    #[serde(default)]
    pub counties: Option<PathBuf>,
    #[serde(default)]
    pub scenario: Option<PathBuf>,
    #[serde(default)]
    pub sweep: Option<PathBuf>,
    /// `[start, end)` day indices; default is the whole profile.
    #[serde(default)]
    pub days: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub reference_bus: Option<BusId>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub analytics: AnalyticsConfig,
    #[serde(default)]
    pub profit: Option<ProfitConfig>,
}

impl RunConfig {
    fn resolve(mut self, base: &Path) -> Result<Self> {
        let abs = |p: &mut PathBuf| -> Result<()> {
            *p = std::path::absolute(base.join(&*p)).with_context(|| format!("resolving {}", p.display()))?;
            Ok(())
        };
        for p in [&mut self.case, &mut self.demand, &mut self.counties, &mut self.scenario, &mut self.sweep, &mut self.output]
            .into_iter()
            .flatten()
        {
            abs(p)?;
        }
        if let Some(pc) = &mut self.profit {
            abs(&mut pc.price_record)?;
            abs(&mut pc.economics)?;
            for prog in &mut pc.programs {
                abs(&mut prog.path)?;
            }
            if let NoiseConfig::Bootstrap { history } = &mut pc.noise {
                abs(history)?;
            }
        }
        Ok(self)
    }

    fn market_options(&self) -> MarketOptions {
        let s = &self.solver;
        MarketOptions {
            mbp: MbpOptions {
                gap: s.gap,
                node_cap: s.node_cap,
                rounding_heuristic: true,
                simplex: SimplexOptions {
                    max_iterations: s.max_iterations,
                    feasibility_tol: s.feasibility_tol,
                    optimality_tol: s.optimality_tol,
                    ..SimplexOptions::default()
                },
            },
            reference: self.reference_bus.map_or(Reference::Auto, Reference::Bus),
        }
    }

    fn stats_options(&self) -> StatsOptions {
        StatsOptions {
            weighted: self.analytics.weighted,
            std_mode: self.analytics.std_mode,
            peak_window: self.analytics.peak_window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    /// Fully resolved configuration; the output directory is left out.
    pub config: RunConfig,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub day_statuses: Vec<(String, Vec<DayStatus>)>,
}

/// Collects artifacts under one directory, written atomically.
struct Output {
    dir: PathBuf,
    written: BTreeMap<String, String>,
}

impl Output {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            written: BTreeMap::new(),
        })
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let rel_path = Path::new(rel);
        if rel_path.components().any(|c| !matches!(c, Component::Normal(_))) {
            bail!("refusing to write `{rel}` outside the output directory");
        }
        let target = self.dir.join(rel_path);
        let parent = target.parent().expect("joined path has a parent");
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        let name = target.file_name().expect("normal component").to_string_lossy();
        let tmp = parent.join(format!(".{name}.tmp"));
        fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, &target).with_context(|| format!("renaming into {}", target.display()))?;
        self.written.insert(rel.to_string(), sha256(bytes));
        Ok(())
    }

    fn hashes(&self) -> Vec<FileHash> {
        self.written
            .iter()
            .map(|(path, sha256)| FileHash {
                path: path.clone(),
                sha256: sha256.clone(),
            })
            .collect()
    }
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads input files and remembers their hashes for the manifest.
#[derive(Default)]
struct Inputs {
    read: BTreeMap<String, String>,
}

impl Inputs {
    fn text(&mut self, path: &Path) -> Result<String> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.read.insert(path.display().to_string(), sha256(text.as_bytes()));
        Ok(text)
    }

    fn hashes(&self) -> Vec<FileHash> {
        self.read
            .iter()
            .map(|(path, sha256)| FileHash {
                path: path.clone(),
                sha256: sha256.clone(),
            })
            .collect()
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INPUT
        }
    }
}

fn set_jobs(jobs: Option<usize>) {
    if let Some(n) = jobs {
        // Only the first call in a process takes effect; later ones keep the pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("cannot read config {}", args.config.display()))?;
    let cfg: RunConfig =
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", args.config.display()))?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let mut cfg = cfg.resolve(base)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(f) = args.format {
        cfg.format = Some(f);
    }
    if let Some(out) = &args.output {
        cfg.output = Some(std::path::absolute(out)?);
    }
    Ok(cfg)
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Demo(a) => {
            write_demo(&a.output)?;
            Ok(EXIT_OK)
        }
        Command::Rerun(a) => {
            set_jobs(a.jobs);
            rerun(&a.manifest, &a.output)
        }
        Command::Simulate(a) => {
            set_jobs(a.jobs);
            execute("simulate", load_config(&a)?)
        }
        Command::Sweep(a) => {
            set_jobs(a.jobs);
            execute("sweep", load_config(&a)?)
        }
        Command::Portfolio(a) => {
            set_jobs(a.jobs);
            execute("portfolio", load_config(&a)?)
        }
        Command::Profit(a) => {
            set_jobs(a.jobs);
            execute("profit", load_config(&a)?)
        }
        Command::Validate(a) => validate(&load_config(&a)?),
    }
}

fn execute(command: &str, cfg: RunConfig) -> Result<i32> {
    let out_dir = cfg
        .output
        .clone()
        .ok_or_else(|| anyhow!("no output directory: set `output` in the config or pass --output"))?;
    let mut inputs = Inputs::default();
    let mut out = Output::create(&out_dir)?;
    let (code, day_statuses) = match command {
        "simulate" => simulate(&cfg, &mut inputs, &mut out)?,
        "sweep" => sweep(&cfg, &mut inputs, &mut out)?,
        "portfolio" => (portfolio(&cfg, &mut inputs, &mut out)?, vec![]),
        "profit" => (profit(&cfg, &mut inputs, &mut out)?, vec![]),
        other => bail!("unknown command {other}"),
    };
    let manifest = Manifest {
        command: command.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        config: RunConfig { output: None, ..cfg },
        inputs: inputs.hashes(),
        outputs: out.hashes(),
        day_statuses,
    };
    let json = serde_json::to_string_pretty(&manifest)? + "\n";
    out.write("run_manifest.json", json.as_bytes())?;
    Ok(code)
}

fn rerun(manifest_path: &Path, output: &Path) -> Result<i32> {
    let text = fs::read_to_string(manifest_path).with_context(|| format!("cannot read manifest {}", manifest_path.display()))?;
    let m: Manifest = serde_json::from_str(&text).with_context(|| format!("invalid manifest {}", manifest_path.display()))?;
    for input in &m.inputs {
        let bytes = fs::read(&input.path).with_context(|| format!("manifest input {} is missing", input.path))?;
        if sha256(&bytes) != input.sha256 {
            bail!("manifest input {} has changed since the recorded run", input.path);
        }
    }
    let cfg = RunConfig {
        output: Some(std::path::absolute(output)?),
        ..m.config
    };
    execute(&m.command, cfg)
}

fn load_case(cfg: &RunConfig, inputs: &mut Inputs) -> Result<GridCase> {
    let path = cfg.case.as_ref().ok_or_else(|| anyhow!("config has no `case`"))?;
    let text = inputs.text(path)?;
    let format = cfg.format.unwrap_or_else(|| {
        if path.extension().is_some_and(|e| e == "m") {
            CaseFormat::Mcase
        } else {
            CaseFormat::Native
        }
    });
    let mut case = match format {
        CaseFormat::Native => parse_case(&text),
        CaseFormat::Mcase => parse_mcase(&text),
    }
    .with_context(|| format!("in case {}", path.display()))?;
    if let Some(p) = &cfg.demand {
        let series = parse_profile_csv(&inputs.text(p)?).with_context(|| format!("in demand {}", p.display()))?;
        case.demand.series = series;
    }
    if let Some(p) = &cfg.counties {
        let map = parse_county_csv(&inputs.text(p)?).with_context(|| format!("in counties {}", p.display()))?;
        for bus in &mut case.buses {
            if let Some(c) = map.get(&bus.id) {
                bus.county = Some(c.clone());
            }
        }
    }
    case.validate().with_context(|| format!("case {} with its side tables", path.display()))?;
    Ok(case)
}

fn day_range(cfg: &RunConfig, case: &GridCase) -> Result<std::ops::Range<usize>> {
    let [start, end] = cfg.days.unwrap_or([0, case.num_days()]);
    if start >= end || end > case.num_days() {
        bail!("days [{start}, {end}) do not fit the {}-day profile", case.num_days());
    }
    Ok(start..end)
}

fn write_record(out: &mut Output, prefix: &str, record: &PriceRecord) -> Result<()> {
    out.write(&format!("{prefix}prices.csv"), record.to_csv().as_bytes())?;
    out.write(&format!("{prefix}prices.json"), (record.sidecar_json() + "\n").as_bytes())
}

fn write_stats(out: &mut Output, prefix: &str, record: &PriceRecord, case: &GridCase, cfg: &RunConfig) -> Result<()> {
    let Ok(stats) = compute_stats(record, case, &cfg.stats_options()) else {
        return Ok(());
    };
    out.write(&format!("{prefix}stats.csv"), stats.stats_csv().as_bytes())?;
    out.write(&format!("{prefix}hourly.csv"), stats.hourly_csv().as_bytes())?;
    let t0 = record.first_day * DAY;
    let intervals = match &cfg.analytics.county_intervals {
        Some(v) => v.clone(),
        None => stats
            .avg_lmp
            .iter()
            .enumerate()
            .filter_map(|(t, v)| v.map(|v| (t, v)))
            .fold(None, |best: Option<(usize, f64)>, (t, v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((t, v)),
            })
            .map(|(t, _)| vec![t0 + t])
            .unwrap_or_default(),
    };
    for abs in intervals {
        let local = abs.checked_sub(t0).ok_or_else(|| anyhow!("county interval {abs} precedes the record"))?;
        let table = county_table(record, case, local).with_context(|| format!("county table at interval {abs}"))?;
        out.write(&format!("{prefix}county_{abs}.csv"), county_csv(&table).as_bytes())?;
    }
    Ok(())
}

type Statuses = Vec<(String, Vec<DayStatus>)>;

fn statuses(record: &PriceRecord) -> Vec<DayStatus> {
    record.days.iter().map(|d| d.status).collect()
}

fn simulate(cfg: &RunConfig, inputs: &mut Inputs, out: &mut Output) -> Result<(i32, Statuses)> {
    let case = load_case(cfg, inputs)?;
    let days = day_range(cfg, &case)?;
    let scenario = match &cfg.scenario {
        Some(p) => Some(
            serde_json::from_str::<MiningScenario>(&inputs.text(p)?)
                .with_context(|| format!("invalid scenario {}", p.display()))?,
        ),
        None => None,
    };
    let mut record = run_horizon(&case, scenario.as_ref(), days, &cfg.market_options())?;
    record.metadata.seed = cfg.seed;
    write_record(out, "", &record)?;
    let stats_case = match &scenario {
        Some(s) => inject(&case, s)?,
        None => case,
    };
    write_stats(out, "", &record, &stats_case, cfg)?;
    for d in &record.days {
        if d.status != DayStatus::Optimal {
            eprintln!("day {}: {:?}{}", d.day, d.status, d.detail.as_deref().map(|s| format!(" ({s})")).unwrap_or_default());
        }
    }
    let code = if record.count(DayStatus::Optimal) == 0 { EXIT_ALL_FAILED } else { EXIT_OK };
    Ok((code, vec![(record.metadata.scenario.clone(), statuses(&record))]))
}

#[derive(Serialize)]
struct CellReport<'a> {
    id: String,
    location_set: Option<&'a str>,
    total_mw: f64,
    per_facility_mw: f64,
    optimal_days: usize,
    infeasible_days: usize,
    failed_days: usize,
    lost_days: Vec<usize>,
    summary: Option<crate::analytics::Summary>,
    comparison: Option<crate::analytics::ComparisonRow>,
}

fn sweep(cfg: &RunConfig, inputs: &mut Inputs, out: &mut Output) -> Result<(i32, Statuses)> {
    let case = load_case(cfg, inputs)?;
    let spec_path = cfg.sweep.as_ref().ok_or_else(|| anyhow!("config has no `sweep` specification"))?;
    let spec = SweepSpec::parse(&inputs.text(spec_path)?).with_context(|| format!("in {}", spec_path.display()))?;
    let days = spec.day_range();
    if days.end > case.num_days() || days.is_empty() {
        bail!("sweep days {:?} do not fit the {}-day profile", spec.days, case.num_days());
    }
    let report = capacity_sweep(&case, &spec.location_sets, &spec.capacities_mw, days, &cfg.market_options(), &cfg.stats_options())?;
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    let mut day_statuses = Vec::new();
    for cell in std::iter::once(&report.baseline).chain(&report.cells) {
        let id = cell.id();
        let mut record = cell.record.clone();
        record.metadata.seed = cfg.seed;
        write_record(out, &format!("{id}/"), &record)?;
        let stats_case = match &cell.set {
            Some(set) if cell.total_mw > 0.0 => {
                inject(&case, &MiningScenario::equal_split(&id, &spec.location_sets[set], cell.total_mw))?
            }
            _ => case.clone(),
        };
        write_stats(out, &format!("{id}/"), &record, &stats_case, cfg)?;
        let comparison = report.comparison(cell);
        if let Some(c) = comparison {
            rows.push((id.clone(), c));
        }
        day_statuses.push((id.clone(), statuses(&record)));
        cells.push(CellReport {
            id,
            location_set: cell.set.as_deref(),
            total_mw: cell.total_mw,
            per_facility_mw: cell.per_facility_mw,
            optimal_days: cell.optimal_days(),
            infeasible_days: cell.infeasible_days(),
            failed_days: cell.failed_days(),
            lost_days: cell.lost_days(),
            summary: cell.stats.as_ref().map(|s| s.summary()),
            comparison,
        });
    }
    out.write("sweep_summary.csv", report.summary_csv().as_bytes())?;
    out.write("comparison.csv", comparison_csv(&rows).as_bytes())?;
    let detail = serde_json::json!({
        "lost_days_monotone": report.lost_days_monotone(),
        "peak_window": cfg.analytics.peak_window,
        "cells": cells,
    });
    out.write("sweep_report.json", (serde_json::to_string_pretty(&detail)? + "\n").as_bytes())?;
    let any_ok = std::iter::once(&report.baseline).chain(&report.cells).any(|c| c.optimal_days() > 0);
    Ok((if any_ok { EXIT_OK } else { EXIT_ALL_FAILED }, day_statuses))
}

struct ProfitInputs {
    record: PriceRecord,
    econ: MiningEconomics,
    programs: Vec<DrProgram>,
    noise: NoiseSpec,
}

fn load_profit_inputs(pc: &ProfitConfig, inputs: &mut Inputs) -> Result<ProfitInputs> {
    let csv = inputs.text(&pc.price_record)?;
    let sidecar_path = pc.price_record.with_extension("json");
    let sidecar = inputs.text(&sidecar_path)?;
    let record = PriceRecord::from_csv_and_sidecar(&csv, &sidecar)
        .with_context(|| format!("price record {}", pc.price_record.display()))?;
    let econ = MiningEconomics::from_csv(&inputs.text(&pc.economics)?)
        .with_context(|| format!("economics {}", pc.economics.display()))?;
    if econ.len() != record.num_intervals() {
        bail!(
            "economics {} has {} intervals, the price record has {}",
            pc.economics.display(),
            econ.len(),
            record.num_intervals()
        );
    }
    let mut programs = Vec::new();
    for p in &pc.programs {
        let prog = DrProgram::from_csv(&p.name, &inputs.text(&p.path)?).with_context(|| format!("program {}", p.path.display()))?;
        prog.validate(record.num_intervals())
            .with_context(|| format!("program {}", p.path.display()))?;
        programs.push(prog);
    }
    let noise = match &pc.noise {
        NoiseConfig::None => NoiseSpec::None,
        NoiseConfig::Gaussian { sigma } => NoiseSpec::Gaussian { sigma: *sigma },
        NoiseConfig::Bootstrap { history } => {
            let text = inputs.text(history)?;
            let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
            let mut prices = Vec::new();
            for rec in rdr.records() {
                let rec = rec.with_context(|| format!("history {}", history.display()))?;
                let v = rec.get(rec.len().saturating_sub(1)).unwrap_or("");
                prices.push(v.parse::<f64>().map_err(|_| anyhow!("history {}: bad price `{v}`", history.display()))?);
            }
            NoiseSpec::from_history(&prices)?
        }
    };
    noise.validate()?;
    Ok(ProfitInputs {
        record,
        econ,
        programs,
        noise,
    })
}

fn portfolio_json(pc: &ProfitConfig, p: &ProfitInputs) -> Result<String> {
    let feasible: Vec<usize> = p.record.feasible_intervals().collect();
    let econ = p.econ.select(&feasible);
    let mut programs: Vec<DrProgram> = p
        .programs
        .iter()
        .map(|prog| DrProgram {
            revenue: feasible.iter().map(|&t| prog.revenue[t]).collect(),
            deployment: feasible.iter().map(|&t| prog.deployment[t]).collect(),
            ..prog.clone()
        })
        .collect();
    if let Some(th) = pc.portfolio_threshold {
        programs.push(DrProgram::price_driven("price_driven", &p.record, th)?);
    }
    let sol = solve_portfolio(&programs, &econ, pc.capacity_mw)?;
    let doc = serde_json::json!({
        "capacity_mw": pc.capacity_mw,
        "intervals": feasible.len(),
        "programs": programs.iter().map(|p| &p.name).collect::<Vec<_>>(),
        "scores_usd_per_mw": programs.iter().map(|p| p.score(&econ)).collect::<Vec<_>>(),
        "capacities_mw": sol.capacities,
        "expected_profit_usd": sol.expected_profit,
        "binding": sol.binding.map(|i| programs[i].name.clone()),
    });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

fn profit_config(cfg: &RunConfig) -> Result<&ProfitConfig> {
    cfg.profit.as_ref().ok_or_else(|| anyhow!("config has no `profit` section"))
}

fn portfolio(cfg: &RunConfig, inputs: &mut Inputs, out: &mut Output) -> Result<i32> {
    let pc = profit_config(cfg)?;
    let p = load_profit_inputs(pc, inputs)?;
    if p.programs.is_empty() && pc.portfolio_threshold.is_none() {
        bail!("portfolio needs at least one program or a `portfolio_threshold`");
    }
    out.write("portfolio.json", portfolio_json(pc, &p)?.as_bytes())?;
    Ok(EXIT_OK)
}

fn profit(cfg: &RunConfig, inputs: &mut Inputs, out: &mut Output) -> Result<i32> {
    let pc = profit_config(cfg)?;
    let p = load_profit_inputs(pc, inputs)?;
    feasible_average(&p.record)?;
    let mut thresholds = pc.thresholds.clone();
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        bail!("thresholds must be sorted ascending");
    }
    if thresholds.is_empty() {
        thresholds.push(0.0);
    }
    let sweep = threshold_sweep(&p.econ, &p.record, &thresholds, pc.draws, cfg.seed, &p.noise)?;
    out.write("profit_report.json", (sweep.to_json() + "\n").as_bytes())?;
    out.write("profit_vs_threshold.csv", sweep.to_csv().as_bytes())?;
    let reserve: Vec<ProfitReport> = p
        .programs
        .iter()
        .map(|prog| annual_profit(prog, &p.econ, &p.record, pc.draws, cfg.seed, &p.noise))
        .collect::<Result<_, _>>()?;
    out.write("program_profits.json", (serde_json::to_string_pretty(&reserve)? + "\n").as_bytes())?;
    if !p.programs.is_empty() || pc.portfolio_threshold.is_some() {
        out.write("portfolio.json", portfolio_json(pc, &p)?.as_bytes())?;
    }
    Ok(EXIT_OK)
}

fn validate(cfg: &RunConfig) -> Result<i32> {
    let mut inputs = Inputs::default();
    let case = load_case(cfg, &mut inputs)?;
    let monitored = case.branches.iter().filter(|b| b.in_service() && b.flow_limit.is_some()).count();
    println!(
        "ok: {} buses, {} branches ({} monitored), {} generators, {} renewables, {} days",
        case.buses.len(),
        case.branches.len(),
        monitored,
        case.generators.len(),
        case.renewables.len(),
        case.num_days()
    );
    if let Some(p) = &cfg.scenario {
        let s: MiningScenario = serde_json::from_str(&inputs.text(p)?).with_context(|| format!("invalid scenario {}", p.display()))?;
        s.validate(&case)?;
        println!("ok: scenario `{}` with {} MW", s.label, s.total());
    }
    Ok(EXIT_OK)
}

/// Writes the bundled demo inputs and ready-to-run configs into `dir`.
pub fn write_demo(dir: &Path) -> Result<()> {
    use crate::demo;
    let mut out = Output::create(dir)?;
    let case = demo::demo_case();
    out.write("demo_case.json", (to_native_json(&case) + "\n").as_bytes())?;
    out.write("demo_snapshot.m", to_mcase(&case, 16).as_bytes())?;
    let small = demo::three_bus_case();
    out.write("three_bus.json", (to_native_json(&small) + "\n").as_bytes())?;
    let overload = MiningScenario::equal_split("overload", &[2], 400.0);
    out.write("overload_scenario.json", (serde_json::to_string_pretty(&overload)? + "\n").as_bytes())?;
    let sets = demo::location_sets();
    let scenario = MiningScenario::equal_split(
        format!("{}_{}mw", demo::CONGESTED_SET, demo::COMPARISON_MW),
        &sets[demo::CONGESTED_SET],
        demo::COMPARISON_MW,
    );
    out.write("scenario_a.json", (serde_json::to_string_pretty(&scenario)? + "\n").as_bytes())?;
    let spec = SweepSpec {
        location_sets: sets,
        capacities_mw: demo::SWEEP_MW.to_vec(),
        days: [0, demo::DAYS],
    };
    out.write("sweep_spec.json", (serde_json::to_string_pretty(&spec)? + "\n").as_bytes())?;
    out.write("economics.csv", demo::demo_economics(demo::HORIZON).to_csv().as_bytes())?;
    for p in demo::demo_programs(demo::HORIZON) {
        out.write(&format!("{}.csv", p.name), p.to_csv().as_bytes())?;
    }

    let base = RunConfig {
        case: Some("demo_case.json".into()),
        format: None,
        demand: None,
        counties: None,
        scenario: None,
        sweep: None,
        days: None,
        output: None,
        seed: 0,
        reference_bus: None,
        solver: SolverConfig::default(),
        analytics: AnalyticsConfig::default(),
        profit: None,
    };
    let configs = [
        (
            "simulate.config.json",
            RunConfig {
                output: Some("out/simulate".into()),
                ..base.clone()
            },
        ),
        (
            "simulate_a.config.json",
            RunConfig {
                scenario: Some("scenario_a.json".into()),
                output: Some("out/simulate_a".into()),
                ..base.clone()
            },
        ),
        (
            "sweep.config.json",
            RunConfig {
                sweep: Some("sweep_spec.json".into()),
                output: Some("out/sweep".into()),
                ..base.clone()
            },
        ),
        (
            "three_bus.config.json",
            RunConfig {
                case: Some("three_bus.json".into()),
                output: Some("out/three_bus".into()),
                ..base.clone()
            },
        ),
        (
            "overload.config.json",
            RunConfig {
                case: Some("three_bus.json".into()),
                scenario: Some("overload_scenario.json".into()),
                output: Some("out/overload".into()),
                ..base.clone()
            },
        ),
        (
            "profit.config.json",
            RunConfig {
                case: None,
                output: Some("out/profit".into()),
                seed: demo::SEED,
                profit: Some(ProfitConfig {
                    price_record: "out/simulate/prices.csv".into(),
                    economics: "economics.csv".into(),
                    programs: ["rrs", "ers"]
                        .iter()
                        .map(|n| ProgramConfig {
                            name: n.to_string(),
                            path: format!("{n}.csv").into(),
                        })
                        .collect(),
                    thresholds: (0..=16).map(|k| 5.0 * k as f64).collect(),
                    draws: 1000,
                    noise: NoiseConfig::Gaussian { sigma: 3.0 },
                    capacity_mw: 100.0,
                    portfolio_threshold: Some(40.0),
                }),
                ..base.clone()
            },
        ),
    ];
    for (name, cfg) in configs {
        out.write(name, (serde_json::to_string_pretty(&cfg)? + "\n").as_bytes())?;
    }
    Ok(())
}
