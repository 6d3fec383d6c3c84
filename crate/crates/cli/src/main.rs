use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info, warn};

use marketcast::adf::LagSelection;
use marketcast::arima::OrderGrid;
use marketcast::benchmark::{BenchmarkConfig, EvalMode};
use marketcast::forecaster::{ModelKind, ModelSettings};
use marketcast::knn::KnnConfig;
use marketcast::lstm::NetConfig;
use marketcast::market_data::{PeriodSpec, PriceColumn, PriceSeries};
use marketcast::report::{self, AdfTarget, DataSource, OutputFormat, RunManifest};

const EXIT_PARTIAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "marketcast", version, about = "Market return diagnostics and forecasting benchmarks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Input file as ASSET=PATH (repeatable)
    #[arg(long = "data", global = true, value_name = "ASSET=PATH")]
    data: Vec<String>,
    /// Directory searched for <ASSET>.csv when no --data is given
    #[arg(long, global = true, env = "MARKETCAST_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Comma-separated periods: full, 2018-2021, yearly, all, or years
    #[arg(long, global = true)]
    periods: Option<String>,
    /// Price column to read
    #[arg(long, global = true, value_enum, default_value_t = ColumnArg::Close)]
    column: ColumnArg,
    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Output directory (reports go to stdout when omitted, except benchmark)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// More log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ColumnArg {
    Close,
    AdjClose,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Md,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Static,
    Rolling,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TargetArg {
    Returns,
    Levels,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Descriptive statistics of daily log returns per asset and period
    Describe {
        /// Per-period risk-free rate for the Sharpe ratio
        #[arg(long, default_value_t = 0.0)]
        rf: f64,
        /// ADF lag rule: aic, schwert, or a fixed count
        #[arg(long, default_value = "aic")]
        adf_lags: String,
    },
    /// Correlation matrix of daily log returns
    Corr,
    /// Augmented Dickey-Fuller unit-root tests
    Adf {
        #[arg(long, value_enum, default_value_t = TargetArg::Returns)]
        target: TargetArg,
        #[arg(long, default_value = "aic")]
        adf_lags: String,
    },
    /// Forecasting benchmark over models x assets x periods
    Benchmark(BenchArgs),
    /// Per-asset CSV of dates, closes and log returns for plotting
    ExportPlotdata,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated models: arima, ets-ann, knn
    #[arg(long, default_value = "arima,ets-ann,knn")]
    models: String,
    /// Training fraction of each period
    #[arg(long, default_value_t = 0.8)]
    ratio: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Static)]
    mode: ModeArg,
    /// Use this k for every kNN cell instead of the tuned table
    #[arg(long)]
    knn_k: Option<usize>,
    /// kNN lag-embedding dimension
    #[arg(long, default_value_t = 5)]
    knn_embed: usize,
    /// Fit kNN on min-max scaled prices
    #[arg(long)]
    knn_scaled: bool,
    /// LSTM input window
    #[arg(long, default_value_t = 10)]
    window: usize,
    #[arg(long, default_value_t = 50)]
    hidden: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    max_p: usize,
    #[arg(long, default_value_t = 5)]
    max_q: usize,
    /// Re-run the benchmark recorded in a manifest and compare grid hashes
    #[arg(long, value_name = "MANIFEST")]
    replay: Option<PathBuf>,
}

/// Failure class deciding the exit status.
enum Failure {
    Config(anyhow::Error),
    Partial(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Partial(msg)) => {
            error!("{msg}");
            eprintln!("marketcast: {msg}");
            ExitCode::from(EXIT_PARTIAL)
        }
        Err(Failure::Config(e)) => {
            eprintln!("marketcast: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let c = &cli.common;
    let format = match c.format {
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Json => OutputFormat::Json,
        FormatArg::Md => OutputFormat::Md,
    };
    let column = match c.column {
        ColumnArg::Close => PriceColumn::Close,
        ColumnArg::AdjClose => PriceColumn::AdjClose,
    };
    if let Command::Benchmark(b) = &cli.command {
        if let Some(m) = &b.replay {
            return replay(m);
        }
    }
    let sources = resolve_sources(c)?;
    match &cli.command {
        Command::Describe { rf, adf_lags } => {
            let periods = parse_periods(c.periods.as_deref(), PeriodSpec::yearly_periods())?;
            let loaded = report::load_sources(&sources, column);
            let rows = report::describe_table(&loaded, &periods, *rf, parse_lags(adf_lags)?);
            emit(
                &report::render_rows(&rows, format).map_err(anyhow::Error::from)?,
                c.out.as_deref(),
                "describe",
                format,
            )?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            partial(failed, rows.len(), "rows")
        }
        Command::Adf { target, adf_lags } => {
            let periods = parse_periods(c.periods.as_deref(), PeriodSpec::yearly_periods())?;
            let target = match target {
                TargetArg::Returns => AdfTarget::Returns,
                TargetArg::Levels => AdfTarget::Levels,
            };
            let loaded = report::load_sources(&sources, column);
            let rows = report::adf_table(&loaded, &periods, target, parse_lags(adf_lags)?);
            emit(&report::render_rows(&rows, format).map_err(anyhow::Error::from)?, c.out.as_deref(), "adf", format)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            partial(failed, rows.len(), "rows")
        }
        Command::Corr => {
            let periods = parse_periods(c.periods.as_deref(), vec![PeriodSpec::full()])?;
            let series = load_all(&sources, column)?;
            let mut failed = 0;
            for p in &periods {
                match report::corr_table(&series, p) {
                    Ok(t) => {
                        let text = t.render(format).map_err(anyhow::Error::from)?;
                        emit(&text, c.out.as_deref(), &format!("corr_{}", p.label), format)?;
                    }
                    Err(e) => {
                        warn!("correlation for {}: {e}", p.label);
                        failed += 1;
                    }
                }
            }
            partial(failed, periods.len(), "periods")
        }
        Command::Benchmark(b) => {
            let periods = parse_periods(c.periods.as_deref(), PeriodSpec::standard_periods())?;
            let cfg = bench_config(b)?;
            let out = c.out.clone().unwrap_or_else(|| PathBuf::from("benchmark_out"));
            let args: Vec<String> = std::env::args().collect();
            let res =
                report::cmd_benchmark(&sources, column, &periods, &cfg, format, &out, args).map_err(|e| anyhow!(e))?;
            println!(
                "{} cells ({} failed), grid hash {}; outputs in {}",
                res.manifest.cells,
                res.manifest.failed_cells,
                res.manifest.grid_hash,
                out.display()
            );
            partial(res.manifest.failed_cells, res.manifest.cells, "cells")
        }
        Command::ExportPlotdata => {
            let out = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut failed = 0;
            for (asset, r) in report::load_sources(&sources, column) {
                let res = r.and_then(|s| report::write_plotdata(&s, &out.join(report::plotdata_file_name(&asset))));
                if let Err(e) = res {
                    warn!("{asset}: {e}");
                    failed += 1;
                }
            }
            partial(failed, sources.len(), "assets")
        }
    }
}

fn partial(failed: usize, total: usize, what: &str) -> Result<(), Failure> {
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Partial(format!("{failed} of {total} {what} failed")))
    }
}

fn resolve_sources(c: &Common) -> anyhow::Result<Vec<DataSource>> {
    let sources: Vec<DataSource> = if c.data.is_empty() {
        let dir = c
            .data_dir
            .as_ref()
            .ok_or_else(|| anyhow!("no input: pass --data ASSET=PATH or set MARKETCAST_DATA_DIR"))?;
        if !dir.is_dir() {
            bail!("data directory {} does not exist", dir.display());
        }
        let found = report::discover_sources(dir);
        if found.is_empty() {
            bail!("no <ASSET>.csv files for the default assets in {}", dir.display());
        }
        found
    } else {
        c.data.iter().map(|d| d.parse::<DataSource>().map_err(anyhow::Error::from)).collect::<anyhow::Result<_>>()?
    };
    for s in &sources {
        if !s.path.is_file() {
            bail!("input file for {} not found: {}", s.asset, s.path.display());
        }
    }
    Ok(sources)
}

fn load_all(sources: &[DataSource], column: PriceColumn) -> anyhow::Result<Vec<PriceSeries>> {
    report::load_sources(sources, column).into_iter().map(|(a, r)| r.with_context(|| format!("loading {a}"))).collect()
}

fn parse_periods(arg: Option<&str>, default: Vec<PeriodSpec>) -> anyhow::Result<Vec<PeriodSpec>> {
    let Some(arg) = arg else { return Ok(default) };
    let mut out = Vec::new();
    for part in arg.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match part {
            "all" => out.extend(PeriodSpec::standard_periods()),
            "yearly" => out.extend(PeriodSpec::yearly_periods()),
            _ => out.push(PeriodSpec::from_label(part)?),
        }
    }
    if out.is_empty() {
        bail!("--periods selected nothing");
    }
    Ok(out)
}

fn parse_lags(arg: &str) -> anyhow::Result<LagSelection> {
    match arg.trim().to_ascii_lowercase().as_str() {
        "aic" => Ok(LagSelection::AicUpToSchwert),
        "schwert" => Ok(LagSelection::Schwert),
        k => k
            .parse::<usize>()
            .map(LagSelection::Fixed)
            .map_err(|_| anyhow!("--adf-lags must be aic, schwert or an integer, got {arg:?}")),
    }
}

fn bench_config(b: &BenchArgs) -> anyhow::Result<BenchmarkConfig> {
    if !(b.ratio > 0.0 && b.ratio < 1.0) {
        bail!("--ratio must lie in (0, 1), got {}", b.ratio);
    }
    let models = b
        .models
        .split(',')
        .map(|m| m.parse::<ModelKind>().map_err(anyhow::Error::from))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let net = NetConfig { hidden_units: b.hidden, epochs: b.epochs, window: b.window, ..NetConfig::default() };
    net.validate()?;
    let settings = ModelSettings {
        arima_grid: OrderGrid { max_p: b.max_p, max_q: b.max_q, ..OrderGrid::default() },
        net,
        knn: KnnConfig { embed: b.knn_embed, ..KnnConfig::default() },
        knn_scaled: b.knn_scaled,
    };
    if b.max_p > marketcast::arima::MAX_AR || b.max_q > marketcast::arima::MAX_MA {
        bail!("--max-p/--max-q must not exceed 5");
    }
    if b.knn_embed == 0 || b.knn_k == Some(0) {
        bail!("--knn-embed and --knn-k must be positive");
    }
    Ok(BenchmarkConfig {
        ratio: b.ratio,
        seed: b.seed,
        mode: match b.mode {
            ModeArg::Static => EvalMode::Static,
            ModeArg::Rolling => EvalMode::Rolling,
        },
        models,
        settings,
        knn_k: b.knn_k,
    })
}

fn replay(path: &Path) -> Result<(), Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let manifest = RunManifest::from_json(&text).map_err(anyhow::Error::from)?;
    let grid = report::rerun_manifest(&manifest).map_err(|e| anyhow!(e))?;
    let hash = grid.grid_hash().map_err(|e| anyhow!(e))?;
    info!("replayed {} cells", grid.cells.len());
    if hash == manifest.grid_hash {
        println!("grid hash {hash} matches");
        Ok(())
    } else {
        Err(Failure::Partial(format!("grid hash {hash} differs from recorded {}", manifest.grid_hash)))
    }
}

fn emit(text: &str, out: Option<&Path>, stem: &str, format: OutputFormat) -> anyhow::Result<()> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let p = dir.join(format!("{stem}.{}", format.extension()));
            fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
            info!("wrote {}", p.display());
            Ok(())
        }
    }
}
