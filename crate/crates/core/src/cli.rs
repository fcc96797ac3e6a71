//! Command-line driver. Each subcommand reads declared inputs, writes its
//! outputs, and records a manifest with the config echo and SHA-256
//! digests of every file read and written.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::fdr::{self, EvalOptions, HurdleResult, RwConfig};
use crate::month::Month;
use crate::panel::{self, Family, LoadOptions, ReturnsPanel, StrategyStats};
use crate::prior::{FamilyParams, ModelSpec};
use crate::qmlfit::{self, FitConfig};
use crate::select::{self, BacktestConfig, Rule, SortConfig};
use crate::signals::{self, Weighting};
use crate::simgen::{self, FdpConfig, GeneratorSpec, Prop1Config, Prop1Mode, Ranking, Vol};

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "EBMINE_THREADS";

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "ebmine",
    version,
    about = "Empirical-Bayes data mining of long-short strategies"
)]
pub struct Cli {
    /// Manifest path; defaults to the primary output with `.manifest.json` appended.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic returns panel and its truth table.
    Simulate(SimulateArgs),
    /// Enumerate signal definitions and optionally build strategy returns.
    Signals(SignalsArgs),
    /// Per-strategy summary statistics over a window.
    Summarize(SummarizeArgs),
    /// Fit the two-component prior per family.
    Fit(FitArgs),
    /// Posterior predictions for each strategy.
    Predict(PredictArgs),
    /// Annual-rebalance top-slice backtest.
    Backtest(BacktestArgs),
    /// Predicted vs realized returns of sorted groups.
    SortAccuracy(SortArgs),
    /// Multiple-testing hurdles.
    Fdr(FdrArgs),
    /// Monte Carlo of the false discovery proportion.
    FdpSim(FdpArgs),
    /// Overlap of EB and naive selections on simulated data.
    Prop1(Prop1Args),
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Generator spec JSON.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out_panel: PathBuf,
    #[arg(long)]
    pub out_truth: PathBuf,
    /// Overrides the seed in the generator file.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalSource {
    Acct,
    Pastret,
    Ticker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightArg {
    Ew,
    Vw,
}

impl From<WeightArg> for Weighting {
    fn from(w: WeightArg) -> Self {
        match w {
            WeightArg::Ew => Weighting::Ew,
            WeightArg::Vw => Weighting::Vw,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SignalsArgs {
    #[arg(long, value_delimiter = ',', default_values = ["pastret", "ticker"])]
    pub sources: Vec<SignalSource>,
    /// Accounting variables (numerators).
    #[arg(long, value_delimiter = ',')]
    pub acct_vars: Vec<String>,
    /// Accounting denominators; must be among the variables.
    #[arg(long, value_delimiter = ',')]
    pub acct_denoms: Vec<String>,
    /// Write the definitions as JSON lines.
    #[arg(long)]
    pub defs_out: Option<PathBuf>,
    /// Stock panel CSV; when given, strategy returns are built.
    #[arg(long, requires = "out_panel")]
    pub stocks: Option<PathBuf>,
    #[arg(long)]
    pub out_panel: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values = ["ew", "vw"])]
    pub weighting: Vec<WeightArg>,
    #[arg(long, default_value_t = signals::DEFAULT_DECILES)]
    pub deciles: usize,
    /// Build only the first N definitions.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct PanelInput {
    /// Returns panel CSV (`strategy_id,family,month,ret`).
    #[arg(long)]
    pub panel: PathBuf,
    /// Accept family labels beyond the six built-in ones.
    #[arg(long)]
    pub allow_custom_families: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SummarizeArgs {
    #[command(flatten)]
    pub input: PanelInput,
    #[arg(long)]
    pub out: PathBuf,
    /// Last month of the window (YYYY-MM); whole panel if omitted.
    #[arg(long)]
    pub end: Option<Month>,
    #[arg(long, default_value_t = panel::DEFAULT_WINDOW_MONTHS)]
    pub window: u32,
    #[arg(long, default_value_t = panel::DEFAULT_MIN_OBS)]
    pub min_obs: usize,
    /// Also write t-stat histograms per family and pooled.
    #[arg(long)]
    pub hist_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.25)]
    pub bin_width: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct FitOpts {
    #[arg(long, default_value_t = 10)]
    pub n_starts: usize,
    #[arg(long, default_value_t = 5000)]
    pub max_evals: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub min_tstats: usize,
}

impl FitOpts {
    fn config(&self) -> FitConfig {
        FitConfig {
            n_starts: self.n_starts,
            max_evals: self.max_evals,
            seed: self.seed,
            min_tstats: self.min_tstats,
            ..FitConfig::default()
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Stats CSV to fit once; writes a ModelSpec JSON.
    #[arg(long, conflicts_with = "panel", required_unless_present = "panel")]
    pub stats: Option<PathBuf>,
    /// Returns panel to fit once per forecast year; writes a year -> ModelSpec map.
    #[arg(long, requires_all = ["first_year", "last_year"])]
    pub panel: Option<PathBuf>,
    #[arg(long)]
    pub first_year: Option<i32>,
    #[arg(long)]
    pub last_year: Option<i32>,
    #[arg(long, default_value_t = panel::DEFAULT_WINDOW_MONTHS)]
    pub window: u32,
    #[arg(long, default_value_t = panel::DEFAULT_MIN_OBS)]
    pub min_obs: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-start diagnostics CSV (single fit only).
    #[arg(long)]
    pub starts_out: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitOpts,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub stats: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleArg {
    Eb,
    Naive,
}

impl From<RuleArg> for Rule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Eb => Rule::Eb,
            RuleArg::Naive => Rule::Naive,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct YearRange {
    #[arg(long)]
    pub first_year: i32,
    #[arg(long)]
    pub last_year: i32,
    #[arg(long, default_value_t = panel::DEFAULT_WINDOW_MONTHS)]
    pub window: u32,
    #[arg(long, default_value_t = panel::DEFAULT_MIN_OBS)]
    pub min_obs: usize,
    /// Restrict to these family labels.
    #[arg(long, value_delimiter = ',')]
    pub families: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub input: PanelInput,
    /// Year -> ModelSpec JSON from `fit --panel`; required for the eb rule.
    #[arg(long)]
    pub models: Option<PathBuf>,
    #[command(flatten)]
    pub years: YearRange,
    #[arg(long, value_delimiter = ',', default_values = ["0.01"])]
    pub top_pct: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["eb", "naive"])]
    pub rule: Vec<RuleArg>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SortArgs {
    #[command(flatten)]
    pub input: PanelInput,
    #[arg(long)]
    pub models: PathBuf,
    #[command(flatten)]
    pub years: YearRange,
    /// Last holding year of the early era.
    #[arg(long)]
    pub split_year: i32,
    #[arg(long, default_value_t = 20)]
    pub groups: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    By13,
    Storey,
    Rw,
}

#[derive(Debug, Args, Serialize)]
pub struct FdrArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["by13", "storey"])]
    pub method: Vec<MethodArg>,
    #[arg(long, default_value_t = 0.05)]
    pub q: f64,
    /// FDP threshold for rw.
    #[arg(long, default_value_t = 0.05)]
    pub p: f64,
    /// Stats CSV; t-stats are computed from `--panel` when omitted.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Returns panel over the test window; required for rw.
    #[arg(long)]
    pub panel: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub min_obs: usize,
    #[arg(long, default_value_t = fdr::STOREY_NULL_CUTOFF)]
    pub null_cutoff: f64,
    #[arg(long, default_value_t = 2000)]
    pub n_boot: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hurdle JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Out-of-sample returns panel for the bin comparison.
    #[arg(long)]
    pub oos_panel: Option<PathBuf>,
    /// Bin comparison CSV.
    #[arg(long)]
    pub bins_out: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub n_bins: usize,
    #[arg(long)]
    pub by_family: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct PriorArgs {
    /// `theta1,sigma1,theta2,sigma2,lambda`.
    #[arg(
        long,
        required = true,
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    pub params: Vec<f64>,
}

impl PriorArgs {
    fn params(&self) -> Result<FamilyParams, CliError> {
        match self.params[..] {
            [a, b, c, d, l] => FamilyParams::new(a, b, c, d, l).map_err(CliError::config),
            _ => Err(CliError::Config("--params needs five values".into())),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FdpArgs {
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long, default_value_t = 29_000)]
    pub n_strategies: usize,
    #[arg(long, default_value_t = 3.0)]
    pub hurdle: f64,
    #[arg(long, default_value_t = 2000)]
    pub n_sims: usize,
    #[arg(long, default_value_t = 0.1)]
    pub null_band: f64,
    #[arg(long, default_value_t = 0.5)]
    pub bin_width: f64,
    #[arg(long, default_value_t = 8.0)]
    pub max_mu: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub exclude_empty: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub bins_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankingArg {
    Sharpe,
    MeanReturn,
}

#[derive(Debug, Args, Serialize)]
pub struct Prop1Args {
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long, default_value_t = 20_000)]
    pub n_strategies: usize,
    #[arg(long, default_value_t = 240)]
    pub n_months: usize,
    #[arg(long, default_value_t = 0.01)]
    pub top_pct: f64,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use fitted rather than true prior parameters.
    #[arg(long)]
    pub fitted: bool,
    #[arg(long, value_enum, default_value = "sharpe")]
    pub ranking: RankingArg,
    /// Monthly volatility range; equal bounds give constant volatility.
    #[arg(long, default_value_t = 0.03)]
    pub vol_low: f64,
    #[arg(long, default_value_t = 0.03)]
    pub vol_high: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure classes with distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, values or missing input files: exit 2.
    Config(String),
    /// Failure while running: exit 1.
    Runtime(Error),
}

impl CliError {
    fn config(e: Error) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::UnknownFamily(_) => CliError::Config(e.to_string()),
            e => CliError::Runtime(e),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Serialize)]
struct FileDigest {
    path: PathBuf,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a Cli,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

/// Declared inputs and produced outputs of one run.
#[derive(Default)]
struct Io {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Io {
    fn input(&mut self, p: &Path) -> CliResult<PathBuf> {
        if !p.is_file() {
            return Err(CliError::Config(format!(
                "input file {} not found",
                p.display()
            )));
        }
        self.inputs.push(p.to_path_buf());
        Ok(p.to_path_buf())
    }

    fn create(&mut self, p: &Path) -> CliResult<BufWriter<File>> {
        let f = File::create(p).map_err(|e| Error::io(p, e))?;
        self.outputs.push(p.to_path_buf());
        Ok(BufWriter::new(f))
    }

    fn write_json<T: Serialize>(&mut self, p: &Path, v: &T) -> CliResult<()> {
        let mut w = self.create(p)?;
        serde_json::to_writer_pretty(&mut w, v).map_err(Error::from)?;
        w.write_all(b"\n").map_err(|e| Error::io(p, e))?;
        w.flush().map_err(|e| Error::io(p, e))?;
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn digests(paths: &[PathBuf]) -> CliResult<Vec<FileDigest>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.clone(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

fn load(io: &mut Io, input: &PanelInput) -> CliResult<ReturnsPanel> {
    let path = io.input(&input.panel)?;
    let opts = LoadOptions {
        allow_custom_families: input.allow_custom_families,
        ..LoadOptions::default()
    };
    Ok(panel::read_panel_file(&path, &opts)?.0)
}

fn load_models(io: &mut Io, path: &Path) -> CliResult<BTreeMap<i32, ModelSpec>> {
    let p = io.input(path)?;
    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    Ok(serde_json::from_str(&text).map_err(Error::from)?)
}

fn families(labels: &[String]) -> CliResult<Option<Vec<Family>>> {
    if labels.is_empty() {
        return Ok(None);
    }
    labels
        .iter()
        .map(|l| Family::parse(l, true).map_err(CliError::config))
        .collect::<CliResult<Vec<_>>>()
        .map(Some)
}

fn primary_output(cmd: &Command) -> PathBuf {
    match cmd {
        Command::Simulate(a) => a.out_panel.clone(),
        Command::Signals(a) => a
            .out_panel
            .clone()
            .or_else(|| a.defs_out.clone())
            .unwrap_or_else(|| PathBuf::from("signals")),
        Command::Summarize(a) => a.out.clone(),
        Command::Fit(a) => a.out.clone(),
        Command::Predict(a) => a.out.clone(),
        Command::Backtest(a) => a.out_dir.join("backtest"),
        Command::SortAccuracy(a) => a.out.clone(),
        Command::Fdr(a) => a.out.clone(),
        Command::FdpSim(a) => a.out.clone(),
        Command::Prop1(a) => a.out.clone(),
    }
}

fn simulate(a: &SimulateArgs, io: &mut Io) -> CliResult<()> {
    let path = io.input(&a.spec)?;
    let mut spec = GeneratorSpec::read_file(&path).map_err(|e| match e {
        Error::Json(_) | Error::InvalidParameter(_) => CliError::config(e),
        e => e.into(),
    })?;
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let g = simgen::generate_panel(&spec)?;
    let w = io.create(&a.out_panel)?;
    panel::save_panel(&g.panel, w)?;
    let w = io.create(&a.out_truth)?;
    simgen::write_truth_csv(&g.truth, w)?;
    Ok(())
}

fn signals_cmd(a: &SignalsArgs, io: &mut Io) -> CliResult<()> {
    let mut defs = Vec::new();
    for s in &a.sources {
        match s {
            SignalSource::Pastret => defs.extend(signals::enumerate_pastret_signals()),
            SignalSource::Ticker => defs.extend(signals::enumerate_ticker_signals()),
            SignalSource::Acct => defs.extend(signals::enumerate_acct_signals(
                &a.acct_vars,
                &a.acct_denoms,
            )?),
        }
    }
    if let Some(n) = a.limit {
        defs.truncate(n);
    }
    if a.defs_out.is_none() && a.stocks.is_none() {
        return Err(CliError::Config(
            "give --defs-out, --stocks, or both".into(),
        ));
    }
    if let Some(p) = &a.defs_out {
        let mut w = io.create(p)?;
        signals::write_signal_defs(&defs, &mut w)?;
        w.flush().map_err(|e| Error::io(p, e))?;
    }
    if let (Some(stocks), Some(out)) = (&a.stocks, &a.out_panel) {
        let sp = signals::read_stock_panel_file(&io.input(stocks)?)?;
        let ws: Vec<Weighting> = a.weighting.iter().map(|&w| w.into()).collect();
        let built = signals::build_panel(&sp, &defs, &ws, a.deciles)?;
        let w = io.create(out)?;
        panel::save_panel(&built, w)?;
    }
    Ok(())
}

fn summarize(a: &SummarizeArgs, io: &mut Io) -> CliResult<()> {
    let p = load(io, &a.input)?;
    let summary = match a.end {
        Some(end) => panel::summarize_window(&p, end, a.window, a.min_obs)?,
        None => panel::summarize(&p, a.min_obs)?,
    };
    let w = io.create(&a.out)?;
    panel::write_stats(&summary.stats, w)?;
    if let Some(h) = &a.hist_out {
        let mut hists = vec![panel::tstat_histogram(&summary.stats, None, a.bin_width)?];
        for f in p.families() {
            hists.push(panel::tstat_histogram(
                &summary.stats,
                Some(&f),
                a.bin_width,
            )?);
        }
        let w = io.create(h)?;
        panel::write_histogram_csv(&hists, w)?;
    }
    Ok(())
}

fn read_stats(io: &mut Io, p: &Path) -> CliResult<Vec<StrategyStats>> {
    Ok(panel::read_stats_file(&io.input(p)?)?)
}

fn fit(a: &FitArgs, io: &mut Io) -> CliResult<()> {
    let cfg = a.fit.config();
    cfg.validate()?;
    if let Some(stats) = &a.stats {
        let stats = read_stats(io, stats)?;
        let fit = qmlfit::fit_all(&stats, &cfg)?;
        io.write_json(&a.out, &fit.spec)?;
        if let Some(p) = &a.starts_out {
            let w = io.create(p)?;
            qmlfit::write_start_table(&fit.fits, w)?;
        }
        return Ok(());
    }
    let (Some(path), Some(y0), Some(y1)) = (&a.panel, a.first_year, a.last_year) else {
        return Err(CliError::Config(
            "fit needs --stats, or --panel with --first-year and --last-year".into(),
        ));
    };
    if y0 > y1 {
        return Err(CliError::Config("--first-year is after --last-year".into()));
    }
    let input = PanelInput {
        panel: path.clone(),
        allow_custom_families: true,
    };
    let p = load(io, &input)?;
    let fits = qmlfit::fit_by_year(&p, y0..=y1, a.window, a.min_obs, &cfg)?;
    let specs: BTreeMap<i32, ModelSpec> = fits.into_iter().map(|(y, f)| (y, f.spec)).collect();
    io.write_json(&a.out, &specs)
}

fn predict(a: &PredictArgs, io: &mut Io) -> CliResult<()> {
    let stats = read_stats(io, &a.stats)?;
    let mp = io.input(&a.model)?;
    let model = ModelSpec::read(File::open(&mp).map_err(|e| Error::io(&mp, e))?)?;
    let preds = crate::ebpredict::predict_all(&stats, &model, select::PERIODS_PER_YEAR)?;
    let w = io.create(&a.out)?;
    crate::ebpredict::write_predictions(&preds, w)?;
    Ok(())
}

#[derive(Serialize)]
struct BacktestRun {
    rule: Rule,
    top_pct: f64,
    summary: select::BacktestSummary,
    n_skipped_months: usize,
    selected_per_year: BTreeMap<i32, usize>,
}

fn backtest(a: &BacktestArgs, io: &mut Io) -> CliResult<()> {
    let p = load(io, &a.input)?;
    let models = match &a.models {
        Some(m) => load_models(io, m)?,
        None if a.rule.contains(&RuleArg::Eb) => {
            return Err(CliError::Config("the eb rule needs --models".into()));
        }
        None => BTreeMap::new(),
    };
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let fams = families(&a.years.families)?;
    let mut runs = Vec::new();
    for &rule in &a.rule {
        for &top in &a.top_pct {
            let cfg = BacktestConfig {
                window_months: a.years.window,
                min_obs: a.years.min_obs,
                families: fams.clone(),
                ..BacktestConfig::new(a.years.first_year, a.years.last_year, top, rule.into())
            };
            let res = select::run_backtest(&p, &models, &cfg)?;
            let tag = format!(
                "{}_{}",
                match rule {
                    RuleArg::Eb => "eb",
                    RuleArg::Naive => "naive",
                },
                top
            );
            let w = io.create(&a.out_dir.join(format!("monthly_{tag}.csv")))?;
            select::write_monthly_csv(&res, w)?;
            let w = io.create(&a.out_dir.join(format!("cumret_{tag}.csv")))?;
            select::write_cumret_csv(&res, w)?;
            runs.push(BacktestRun {
                rule: rule.into(),
                top_pct: top,
                n_skipped_months: res.skipped_months.len(),
                selected_per_year: res.years.iter().map(|y| (y.year, y.picks.len())).collect(),
                summary: res.summary,
            });
        }
    }
    io.write_json(&a.out_dir.join("summary.json"), &runs)
}

fn sort_accuracy(a: &SortArgs, io: &mut Io) -> CliResult<()> {
    let p = load(io, &a.input)?;
    let models = load_models(io, &a.models)?;
    let cfg = SortConfig {
        window_months: a.years.window,
        min_obs: a.years.min_obs,
        n_groups: a.groups,
        families: families(&a.years.families)?,
        ..SortConfig::new(a.years.first_year, a.years.last_year, a.split_year)
    };
    let res = select::sort_accuracy(&p, &models, &cfg)?;
    for d in &res.dropped {
        eprintln!(
            "dropped empty group {} of {} in {}",
            d.group, d.family, d.year
        );
    }
    let w = io.create(&a.out)?;
    select::write_sort_accuracy_csv(&res.rows, w)?;
    Ok(())
}

#[derive(Serialize)]
struct FdrOutput {
    hurdles: Vec<HurdleResult>,
    evaluation: Vec<fdr::HurdleEval>,
}

fn fdr_cmd(a: &FdrArgs, io: &mut Io) -> CliResult<()> {
    let panel = match &a.panel {
        Some(p) => Some(load(
            io,
            &PanelInput {
                panel: p.clone(),
                allow_custom_families: true,
            },
        )?),
        None => None,
    };
    let stats = match (&a.stats, &panel) {
        (Some(s), _) => read_stats(io, s)?,
        (None, Some(p)) => panel::summarize(p, a.min_obs)?.stats,
        (None, None) => return Err(CliError::Config("fdr needs --stats or --panel".into())),
    };
    let t: Vec<f64> = stats.iter().map(|s| s.tstat).collect();
    let mut hurdles = Vec::new();
    for m in &a.method {
        hurdles.push(match m {
            MethodArg::By13 => fdr::hurdle_by13(&t, a.q)?,
            MethodArg::Storey => fdr::hurdle_storey(&t, a.q, a.null_cutoff)?,
            MethodArg::Rw => {
                let Some(p) = &panel else {
                    return Err(CliError::Config("the rw method needs --panel".into()));
                };
                let cfg = RwConfig {
                    n_boot: a.n_boot,
                    ..RwConfig::new(a.p, a.q, a.seed)
                };
                fdr::hurdle_rw(p, &cfg)?
            }
        });
    }
    let oos = match &a.oos_panel {
        Some(p) => Some(load(
            io,
            &PanelInput {
                panel: p.clone(),
                allow_custom_families: true,
            },
        )?),
        None => None,
    };
    let opts = EvalOptions {
        n_bins: a.n_bins,
        by_family: a.by_family,
        ..EvalOptions::default()
    };
    let ev = fdr::evaluate_hurdles(&stats, &hurdles, oos.as_ref(), &opts)?;
    io.write_json(
        &a.out,
        &FdrOutput {
            hurdles,
            evaluation: ev.hurdles,
        },
    )?;
    if let Some(b) = &a.bins_out {
        let w = io.create(b)?;
        fdr::write_bins_csv(&ev.bins, w)?;
    }
    Ok(())
}

fn fdp_sim(a: &FdpArgs, io: &mut Io) -> CliResult<()> {
    let cfg = FdpConfig {
        null_band: a.null_band,
        bin_width: a.bin_width,
        max_mu: a.max_mu,
        exclude_empty: a.exclude_empty,
        ..FdpConfig::new(
            a.prior.params()?,
            a.n_strategies,
            a.hurdle,
            a.n_sims,
            a.seed,
        )
    };
    cfg.validate()?;
    let res = simgen::fdp_simulate(&cfg)?;
    io.write_json(&a.out, &res)?;
    if let Some(b) = &a.bins_out {
        let w = io.create(b)?;
        simgen::write_fdp_bins_csv(&res, w)?;
    }
    Ok(())
}

fn prop1(a: &Prop1Args, io: &mut Io) -> CliResult<()> {
    let vol = if a.vol_low == a.vol_high {
        Vol::Constant { sd: a.vol_low }
    } else {
        Vol::Uniform {
            low: a.vol_low,
            high: a.vol_high,
        }
    };
    let cfg = Prop1Config {
        n_months: a.n_months,
        vol,
        mode: if a.fitted {
            Prop1Mode::Fitted(FitConfig::default())
        } else {
            Prop1Mode::True
        },
        naive_ranking: match a.ranking {
            RankingArg::Sharpe => Ranking::Sharpe,
            RankingArg::MeanReturn => Ranking::MeanReturn,
        },
        ..Prop1Config::new(a.prior.params()?, a.n_strategies, a.top_pct, a.reps, a.seed)
    };
    let res = simgen::prop1_harness(&cfg)?;
    io.write_json(&a.out, &res)
}

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV}=`{v}` is not a thread count")))?;
        // a pool configured earlier in the process wins
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

/// Run a parsed command and write its manifest.
pub fn execute(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    let mut io = Io::default();
    match &cli.command {
        Command::Simulate(a) => simulate(a, &mut io),
        Command::Signals(a) => signals_cmd(a, &mut io),
        Command::Summarize(a) => summarize(a, &mut io),
        Command::Fit(a) => fit(a, &mut io),
        Command::Predict(a) => predict(a, &mut io),
        Command::Backtest(a) => backtest(a, &mut io),
        Command::SortAccuracy(a) => sort_accuracy(a, &mut io),
        Command::Fdr(a) => fdr_cmd(a, &mut io),
        Command::FdpSim(a) => fdp_sim(a, &mut io),
        Command::Prop1(a) => prop1(a, &mut io),
    }?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cli,
        inputs: digests(&io.inputs)?,
        outputs: digests(&io.outputs)?,
    };
    let path = cli.manifest.clone().unwrap_or_else(|| {
        let mut s: OsString = primary_output(&cli.command).into_os_string();
        s.push(".manifest.json");
        PathBuf::from(s)
    });
    let mut sink = Io::default();
    sink.write_json(&path, &manifest)
}

/// Parse `argv`, run, and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn unknown_flag_is_config_error() {
        assert_eq!(
            run([
                "ebmine",
                "summarize",
                "--panel",
                "x.csv",
                "--out",
                "y",
                "--bogus"
            ]),
            2
        );
        assert_eq!(run(["ebmine", "nope"]), 2);
    }

    #[test]
    fn missing_input_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("s.csv");
        let code = run([
            "ebmine".as_ref(),
            "summarize".as_ref(),
            "--panel".as_ref(),
            dir.path().join("missing.csv").as_os_str(),
            "--out".as_ref(),
            out.as_os_str(),
        ]);
        assert_eq!(code, 2);
    }

    #[test]
    fn help_lists_subcommands() {
        let help = Cli::command().render_long_help().to_string();
        for sub in [
            "simulate",
            "signals",
            "summarize",
            "fit",
            "predict",
            "backtest",
            "sort-accuracy",
            "fdr",
            "fdp-sim",
            "prop1",
        ] {
            assert!(help.contains(sub), "{sub}");
        }
    }
}
