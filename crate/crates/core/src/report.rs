//! Report tables behind the command-line subcommands, and their CSV, JSON
//! and Markdown renderings.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adf::{adf_test_with, LagSelection, SignificanceLevel};
use crate::benchmark::{run_benchmark, BenchmarkConfig, BenchmarkGrid};
use crate::descriptive::{correlation_matrix, describe_with};
use crate::error::{Error, Result};
use crate::market_data::{align_series, ingest_csv_with, slice_period, PeriodSpec, PriceColumn, PriceSeries};
use crate::preprocess::log_returns;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
    Md,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
            OutputFormat::Md => "md",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "md" | "markdown" => Ok(OutputFormat::Md),
            other => Err(Error::InvalidParameter(format!("unknown output format {other:?}"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

/// One asset's input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSource {
    pub asset: String,
    pub path: PathBuf,
}

impl FromStr for DataSource {
    type Err = Error;

    /// Parses `ASSET=PATH`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('=') {
            Some((a, p)) if !a.trim().is_empty() && !p.trim().is_empty() => {
                Ok(Self { asset: a.trim().to_string(), path: PathBuf::from(p.trim()) })
            }
            _ => Err(Error::InvalidParameter(format!("expected ASSET=PATH, got {s:?}"))),
        }
    }
}

/// The default market set, as file stems.
pub const DEFAULT_ASSETS: [&str; 6] = ["BTC-USD", "FCHI", "FTSE", "GDAXI", "N100", "SSMI"];

/// `<dir>/<ASSET>.csv` for each default asset that exists.
pub fn discover_sources(dir: &Path) -> Vec<DataSource> {
    DEFAULT_ASSETS
        .iter()
        .map(|a| DataSource { asset: a.to_string(), path: dir.join(format!("{a}.csv")) })
        .filter(|s| s.path.is_file())
        .collect()
}

/// Loads each source, keeping failures alongside successes.
pub fn load_sources(sources: &[DataSource], column: PriceColumn) -> Vec<(String, Result<PriceSeries>)> {
    sources
        .iter()
        .map(|s| {
            let r = ingest_csv_with(&s.path, &s.asset, column).map(|(series, _)| series);
            (s.asset.clone(), r)
        })
        .collect()
}

fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

// ---------------------------------------------------------------- describe

/// Summary statistics of log returns for one asset and period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescribeRow {
    pub period: String,
    pub asset: String,
    pub n: Option<usize>,
    pub mean: Option<f64>,
    pub std_dev: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub sharpe: Option<f64>,
    pub std_err: Option<f64>,
    pub adf_stat: Option<f64>,
    pub adf_p_value: Option<f64>,
    pub adf_lags: Option<usize>,
    pub adf_signif: Option<String>,
    pub jb_stat: Option<f64>,
    pub jb_p_value: Option<f64>,
    pub error: Option<String>,
}

impl DescribeRow {
    fn failed(period: &str, asset: &str, e: &Error) -> Self {
        Self {
            period: period.to_string(),
            asset: asset.to_string(),
            n: None,
            mean: None,
            std_dev: None,
            min: None,
            max: None,
            sharpe: None,
            std_err: None,
            adf_stat: None,
            adf_p_value: None,
            adf_lags: None,
            adf_signif: None,
            jb_stat: None,
            jb_p_value: None,
            error: Some(e.to_string()),
        }
    }
}

fn stars(level: Option<SignificanceLevel>) -> String {
    level.map_or(String::new(), |l| l.stars().to_string())
}

/// One row per (period, asset); rows of one period are contiguous.
pub fn describe_table(
    series: &[(String, Result<PriceSeries>)],
    periods: &[PeriodSpec],
    risk_free: f64,
    lags: LagSelection,
) -> Vec<DescribeRow> {
    let mut rows = Vec::new();
    for p in periods {
        for (asset, s) in series {
            let row = s
                .as_ref()
                .map_err(|e| Error::InvalidParameter(format!("ingestion failed: {e}")))
                .and_then(|s| slice_period(s, p))
                .and_then(|s| describe_with(&log_returns(&s), risk_free, lags));
            rows.push(match row {
                Ok(r) => DescribeRow {
                    period: p.label.clone(),
                    asset: asset.clone(),
                    n: Some(r.n),
                    mean: Some(r.mean),
                    std_dev: Some(r.std_dev),
                    min: Some(r.min),
                    max: Some(r.max),
                    sharpe: Some(r.sharpe),
                    std_err: Some(r.std_err),
                    adf_stat: Some(r.adf.statistic),
                    adf_p_value: Some(r.adf.p_value),
                    adf_lags: Some(r.adf.lags_used),
                    adf_signif: Some(stars(r.adf.reject_at)),
                    jb_stat: Some(r.jb.statistic),
                    jb_p_value: Some(r.jb.p_value),
                    error: None,
                },
                Err(e) => DescribeRow::failed(&p.label, asset, &e),
            });
        }
    }
    rows
}

// ---------------------------------------------------------------- corr

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrTable {
    pub period: String,
    pub assets: Vec<String>,
    /// Common dates after the inner join, before differencing.
    pub n_dates: usize,
    pub matrix: Vec<Vec<f64>>,
}

/// Pearson correlation of log returns. Prices are first restricted to the
/// period and inner-joined on dates, so each return spans the same interval
/// for every asset.
pub fn corr_table(series: &[PriceSeries], period: &PeriodSpec) -> Result<CorrTable> {
    if series.len() < 2 {
        return Err(Error::InsufficientData { what: "assets for correlation", needed: 2, got: series.len() });
    }
    let sliced = series.iter().map(|s| slice_period(s, period)).collect::<Result<Vec<_>>>()?;
    let aligned = align_series(&sliced)?;
    let returns: Vec<Vec<f64>> = aligned.iter().map(log_returns).collect();
    Ok(CorrTable {
        period: period.label.clone(),
        assets: aligned.iter().map(|s| s.asset_id().to_string()).collect(),
        n_dates: aligned[0].len(),
        matrix: correlation_matrix(&returns)?,
    })
}

impl CorrTable {
    /// Lower triangle with unit diagonal; cells above it are empty.
    pub fn lower_triangle(&self) -> Vec<Vec<String>> {
        let mut out = vec![std::iter::once(String::new()).chain(self.assets.iter().cloned()).collect()];
        for (i, a) in self.assets.iter().enumerate() {
            let mut row = vec![a.clone()];
            for j in 0..self.assets.len() {
                row.push(if j < i {
                    format!("{:.3}", self.matrix[i][j])
                } else if j == i {
                    "1".to_string()
                } else {
                    String::new()
                });
            }
            out.push(row);
        }
        out
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Json => Ok(serde_json::to_string_pretty(self)?),
            OutputFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(std::iter::once("").chain(self.assets.iter().map(String::as_str)))?;
                for (a, row) in self.assets.iter().zip(&self.matrix) {
                    let cells = row.iter().map(|v| v.to_string());
                    w.write_record(std::iter::once(a.clone()).chain(cells))?;
                }
                csv_string(w)
            }
            OutputFormat::Md => Ok(markdown_grid(&self.lower_triangle())),
        }
    }

    /// Reads the full-matrix CSV rendering back.
    pub fn from_csv(text: &str, period: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let assets: Vec<String> = r.headers()?.iter().skip(1).map(str::to_string).collect();
        let mut matrix = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .skip(1)
                .map(|v| v.parse::<f64>().map_err(|e| Error::InvalidParameter(format!("{v:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            matrix.push(row);
        }
        Ok(Self { period: period.to_string(), assets, n_dates: 0, matrix })
    }
}

// ---------------------------------------------------------------- adf

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdfTarget {
    #[default]
    Returns,
    Levels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfRow {
    pub period: String,
    pub asset: String,
    pub target: AdfTarget,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub lags: Option<usize>,
    pub nobs: Option<usize>,
    pub cv_0_1pct: Option<f64>,
    pub cv_1pct: Option<f64>,
    pub cv_5pct: Option<f64>,
    pub cv_10pct: Option<f64>,
    pub signif: Option<String>,
    pub error: Option<String>,
}

pub fn adf_table(
    series: &[(String, Result<PriceSeries>)],
    periods: &[PeriodSpec],
    target: AdfTarget,
    lags: LagSelection,
) -> Vec<AdfRow> {
    let mut rows = Vec::new();
    for p in periods {
        for (asset, s) in series {
            let res = s
                .as_ref()
                .map_err(|e| Error::InvalidParameter(format!("ingestion failed: {e}")))
                .and_then(|s| slice_period(s, p))
                .and_then(|s| {
                    let x = match target {
                        AdfTarget::Returns => log_returns(&s),
                        AdfTarget::Levels => s.closes().to_vec(),
                    };
                    adf_test_with(&x, lags)
                });
            let mut row = AdfRow {
                period: p.label.clone(),
                asset: asset.clone(),
                target,
                statistic: None,
                p_value: None,
                lags: None,
                nobs: None,
                cv_0_1pct: None,
                cv_1pct: None,
                cv_5pct: None,
                cv_10pct: None,
                signif: None,
                error: None,
            };
            match res {
                Ok(r) => {
                    let cv = |l| r.critical_values.get(&l).copied();
                    row.statistic = Some(r.statistic);
                    row.p_value = Some(r.p_value);
                    row.lags = Some(r.lags_used);
                    row.nobs = Some(r.nobs);
                    row.cv_0_1pct = cv(SignificanceLevel::P001);
                    row.cv_1pct = cv(SignificanceLevel::P01);
                    row.cv_5pct = cv(SignificanceLevel::P05);
                    row.cv_10pct = cv(SignificanceLevel::P10);
                    row.signif = Some(stars(r.reject_at));
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            rows.push(row);
        }
    }
    rows
}

// ---------------------------------------------------------------- benchmark

/// Flat view of one benchmark cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub model: String,
    pub asset: String,
    pub period: String,
    pub mode: String,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub mape: Option<f64>,
    pub avg_rel_mae: Option<f64>,
    pub status: String,
    pub spec: String,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelMaeRow {
    pub model: String,
    pub period: String,
    /// Asset name, or `pooled` for the geometric mean over assets.
    pub asset: String,
    pub n: usize,
    pub avg_rel_mae: Option<f64>,
    pub error: Option<String>,
}

pub fn grid_rows(grid: &BenchmarkGrid) -> Vec<GridRow> {
    grid.cells
        .iter()
        .map(|c| GridRow {
            model: c.model.to_string(),
            asset: c.asset.clone(),
            period: c.period.clone(),
            mode: c.mode.to_string(),
            mae: c.mae,
            rmse: c.rmse,
            mape: c.mape,
            avg_rel_mae: c.avg_rel_mae,
            status: c.status().to_string(),
            spec: c.spec.clone(),
            seed: c.seed,
            n_train: c.n_train,
            n_test: c.actuals.len(),
            error: c.error.clone(),
        })
        .collect()
}

pub fn rel_mae_rows(grid: &BenchmarkGrid) -> Vec<RelMaeRow> {
    grid.avg_rel_mae
        .iter()
        .map(|e| RelMaeRow {
            model: e.model.to_string(),
            period: e.period.clone(),
            asset: e.asset.clone().unwrap_or_else(|| "pooled".to_string()),
            n: e.n,
            avg_rel_mae: e.value,
            error: e.error.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSource {
    pub asset: String,
    pub path: PathBuf,
    pub sha256: Option<String>,
}

/// Everything needed to reproduce a benchmark run from the same data files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub args: Vec<String>,
    pub config: BenchmarkConfig,
    pub periods: Vec<PeriodSpec>,
    pub column: PriceColumn,
    pub sources: Vec<ManifestSource>,
    pub grid_hash: String,
    pub cells: usize,
    pub failed_cells: usize,
}

impl RunManifest {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub struct BenchmarkOutput {
    pub grid: BenchmarkGrid,
    pub manifest: RunManifest,
    pub files: Vec<PathBuf>,
}

fn model_file_name(model: &str, asset: &str, period: &str) -> String {
    let clean =
        |s: &str| s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect::<String>();
    format!("{}_{}_{}.json", clean(model), clean(asset), clean(period))
}

/// Runs the grid and writes `grid`, `avg_rel_mae`, `forecasts.json`,
/// `models/*.json` and `manifest.json` into `out_dir`.
pub fn cmd_benchmark(
    sources: &[DataSource],
    column: PriceColumn,
    periods: &[PeriodSpec],
    cfg: &BenchmarkConfig,
    format: OutputFormat,
    out_dir: &Path,
    args: Vec<String>,
) -> Result<BenchmarkOutput> {
    let loaded = load_sources(sources, column);
    let mut series = Vec::new();
    for (asset, r) in loaded {
        match r {
            Ok(s) => series.push(s),
            Err(e) => return Err(Error::InvalidParameter(format!("cannot load {asset}: {e}"))),
        }
    }
    let grid = run_benchmark(&series, periods, cfg)?;
    fs::create_dir_all(out_dir.join("models"))?;
    let mut files = Vec::new();
    let ext = format.extension();

    let p = out_dir.join(format!("grid.{ext}"));
    write_rows(&grid_rows(&grid), format, &p)?;
    files.push(p);
    let p = out_dir.join(format!("avg_rel_mae.{ext}"));
    write_rows(&rel_mae_rows(&grid), format, &p)?;
    files.push(p);
    let p = out_dir.join("forecasts.json");
    fs::write(&p, serde_json::to_string_pretty(&grid)?)?;
    files.push(p);
    for c in &grid.cells {
        if let Some(m) = &c.fitted {
            let p = out_dir.join("models").join(model_file_name(c.model.name(), &c.asset, &c.period));
            fs::write(&p, m.to_json()?)?;
            files.push(p);
        }
    }
    let manifest = RunManifest {
        tool: "marketcast".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        args,
        config: cfg.clone(),
        periods: periods.to_vec(),
        column,
        sources: sources
            .iter()
            .map(|s| ManifestSource { asset: s.asset.clone(), path: s.path.clone(), sha256: sha256_file(&s.path).ok() })
            .collect(),
        grid_hash: grid.grid_hash()?,
        cells: grid.cells.len(),
        failed_cells: grid.failed_cells(),
    };
    let p = out_dir.join("manifest.json");
    fs::write(&p, serde_json::to_string_pretty(&manifest)?)?;
    files.push(p);
    Ok(BenchmarkOutput { grid, manifest, files })
}

/// Re-runs the benchmark a manifest describes.
pub fn rerun_manifest(manifest: &RunManifest) -> Result<BenchmarkGrid> {
    let sources: Vec<DataSource> =
        manifest.sources.iter().map(|s| DataSource { asset: s.asset.clone(), path: s.path.clone() }).collect();
    let series = load_sources(&sources, manifest.column).into_iter().map(|(_, r)| r).collect::<Result<Vec<_>>>()?;
    run_benchmark(&series, &manifest.periods, &manifest.config)
}

// ---------------------------------------------------------------- plot data

/// `Date,Close,LogReturn` for one asset; the first return is empty.
pub fn write_plotdata(series: &PriceSeries, path: &Path) -> Result<()> {
    let r = log_returns(series);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["Date", "Close", "LogReturn"])?;
    for (i, (d, c)) in series.dates().iter().zip(series.closes()).enumerate() {
        let ret = if i == 0 { String::new() } else { r[i - 1].to_string() };
        w.write_record([d.format("%Y-%m-%d").to_string(), c.to_string(), ret])?;
    }
    w.flush()?;
    Ok(())
}

pub fn plotdata_file_name(asset: &str) -> String {
    format!("{}_plotdata.csv", asset.trim_start_matches('^'))
}

// ---------------------------------------------------------------- rendering

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidParameter(e.to_string()))
}

fn md_cell(v: &str) -> String {
    match v.parse::<f64>() {
        Ok(x) if v.contains('.') || v.contains('e') => {
            if x != 0.0 && x.abs() < 1e-3 {
                format!("{x:.3e}")
            } else {
                format!("{x:.4}")
            }
        }
        _ => v.replace('|', "\\|"),
    }
}

fn markdown_grid(rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    if let Some((head, body)) = rows.split_first() {
        out.push_str(&format!("| {} |\n", head.join(" | ")));
        out.push_str(&format!("|{}\n", "---|".repeat(head.len())));
        for r in body {
            out.push_str(&format!("| {} |\n", r.join(" | ")));
        }
    }
    out
}

/// Renders flat serialisable rows.
pub fn render_rows<T: Serialize>(rows: &[T], format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => Ok(serde_json::to_string_pretty(rows)?),
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r)?;
            }
            csv_string(w)
        }
        OutputFormat::Md => {
            let csv_text = render_rows(rows, OutputFormat::Csv)?;
            let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(csv_text.as_bytes());
            let mut grid = Vec::new();
            for (i, rec) in r.records().enumerate() {
                let rec = rec?;
                grid.push(rec.iter().map(|v| if i == 0 { v.to_string() } else { md_cell(v) }).collect());
            }
            Ok(markdown_grid(&grid))
        }
    }
}

pub fn write_rows<T: Serialize>(rows: &[T], format: OutputFormat, path: &Path) -> Result<()> {
    fs::write(path, render_rows(rows, format)?)?;
    Ok(())
}

/// Parses the CSV rendering of rows back.
pub fn parse_csv_rows<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
