//! Price-series ingestion, period slicing and chronological train/test splitting.
//!
//! Input files follow the Yahoo Finance daily layout
//! (`Date,Open,High,Low,Close,Adj Close,Volume`); only the date and one price
//! column are read.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Close prices of one asset indexed by strictly increasing dates.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    asset_id: String,
    dates: Vec<NaiveDate>,
    closes: Vec<f64>,
}

impl PriceSeries {
    pub fn new(asset_id: impl Into<String>, dates: Vec<NaiveDate>, closes: Vec<f64>) -> Result<Self> {
        if dates.len() != closes.len() {
            return Err(Error::LengthMismatch { left: dates.len(), right: closes.len() });
        }
        if dates.len() < 2 {
            return Err(Error::InsufficientData { what: "price series", needed: 2, got: dates.len() });
        }
        for (i, pair) in dates.windows(2).enumerate() {
            if pair[1] == pair[0] {
                return Err(Error::DuplicateDate(pair[0]));
            }
            if pair[1] < pair[0] {
                return Err(Error::UnsortedDates(i + 1));
            }
        }
        for (i, &c) in closes.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::NonFinite(i));
            }
            if c <= 0.0 {
                return Err(Error::NonPositivePrice { index: i, value: c });
            }
        }
        Ok(Self { asset_id: asset_id.into(), dates, closes })
    }

    pub fn asset_id(&self) -> &str {
        &self.asset_id
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }

    pub fn first_date(&self) -> NaiveDate {
        self.dates[0]
    }

    pub fn last_date(&self) -> NaiveDate {
        self.dates[self.dates.len() - 1]
    }

    fn subset(&self, idx: impl Iterator<Item = usize>) -> (Vec<NaiveDate>, Vec<f64>) {
        idx.map(|i| (self.dates[i], self.closes[i])).unzip()
    }
}

/// A labelled, inclusive date window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodSpec {
    pub label: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date")
}

impl PeriodSpec {
    pub fn new(label: impl Into<String>, start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidParameter(format!("period start {start} is after end {end}")));
        }
        Ok(Self { label: label.into(), start, end })
    }

    pub fn full() -> Self {
        Self { label: "2018-2021".into(), start: ymd(2018, 1, 1), end: ymd(2021, 12, 31) }
    }

    pub fn year(year: i32) -> Self {
        Self { label: year.to_string(), start: ymd(year, 1, 1), end: ymd(year, 12, 31) }
    }

    /// The full window followed by the four calendar years 2018..=2021.
    pub fn standard_periods() -> Vec<Self> {
        let mut out = vec![Self::full()];
        out.extend((2018..=2021).map(Self::year));
        out
    }

    /// The four single-year panels.
    pub fn yearly_periods() -> Vec<Self> {
        (2018..=2021).map(Self::year).collect()
    }

    /// Resolves `full`, `2018-2021` or a four-digit year.
    pub fn from_label(label: &str) -> Result<Self> {
        let l = label.trim();
        if l.eq_ignore_ascii_case("full") || l == "2018-2021" {
            return Ok(Self::full());
        }
        match l.parse::<i32>() {
            Ok(y) if (1900..=2200).contains(&y) => Ok(Self::year(y)),
            _ => Err(Error::InvalidParameter(format!("unknown period label {label:?}"))),
        }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

impl fmt::Display for PeriodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// Chronological split: `train` precedes `test` and together they form the source.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTestSplit {
    pub train: PriceSeries,
    pub test: PriceSeries,
    pub ratio: f64,
}

/// Which price column to read from a CSV snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriceColumn {
    /// `Close`, falling back to `Adj Close` when the file has no `Close` column.
    #[default]
    Close,
    /// `Adj Close` only.
    AdjClose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_dropped: usize,
}

fn normalize_header(h: &str) -> String {
    h.trim_start_matches('\u{feff}')
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

pub fn ingest_csv(path: impl AsRef<Path>, asset_id: &str) -> Result<PriceSeries> {
    ingest_csv_with(path, asset_id, PriceColumn::Close).map(|(s, _)| s)
}

/// Reads a snapshot, dropping rows whose date or price is missing or unparseable.
pub fn ingest_csv_with(
    path: impl AsRef<Path>,
    asset_id: &str,
    column: PriceColumn,
) -> Result<(PriceSeries, IngestReport)> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(normalize_header).collect();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let malformed = |reason: &str| Error::MalformedHeader { path: path.to_path_buf(), reason: reason.to_string() };
    let date_col = find("date").ok_or_else(|| malformed("no Date column"))?;
    let price_col = match column {
        PriceColumn::Close => {
            find("close").or_else(|| find("adjclose")).ok_or_else(|| malformed("no Close or Adj Close column"))?
        }
        PriceColumn::AdjClose => find("adjclose").ok_or_else(|| malformed("no Adj Close column"))?,
    };

    let mut report = IngestReport::default();
    let mut rows: Vec<(NaiveDate, f64)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        report.rows_read += 1;
        let date = record.get(date_col).and_then(|s| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok());
        let price = record.get(price_col).and_then(|s| s.parse::<f64>().ok()).filter(|p| p.is_finite() && *p > 0.0);
        match (date, price) {
            (Some(d), Some(p)) => rows.push((d, p)),
            _ => report.rows_dropped += 1,
        }
    }
    if report.rows_dropped > 0 {
        log::warn!(
            "{}: dropped {} of {} rows with missing or invalid values",
            path.display(),
            report.rows_dropped,
            report.rows_read
        );
    }
    if rows.len() < 2 {
        return Err(Error::InsufficientData { what: "valid CSV rows", needed: 2, got: rows.len() });
    }
    rows.sort_by_key(|r| r.0);
    if let Some(pair) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateDate(pair[0].0));
    }
    let (dates, closes) = rows.into_iter().unzip();
    Ok((PriceSeries::new(asset_id, dates, closes)?, report))
}

/// Writes `Date,Close` rows readable by [`ingest_csv`].
pub fn write_price_csv(series: &PriceSeries, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["Date", "Close"])?;
    for (d, c) in series.dates.iter().zip(&series.closes) {
        w.write_record([d.format("%Y-%m-%d").to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn slice_period(s: &PriceSeries, p: &PeriodSpec) -> Result<PriceSeries> {
    let idx: Vec<usize> = (0..s.len()).filter(|&i| p.contains(s.dates[i])).collect();
    if idx.len() < 2 {
        return Err(Error::EmptySlice { label: p.label.clone(), count: idx.len() });
    }
    let (dates, closes) = s.subset(idx.into_iter());
    PriceSeries::new(s.asset_id.clone(), dates, closes)
}

/// Number of training observations: `round(ratio * n)` with ties rounding up.
pub fn train_len(n: usize, ratio: f64) -> usize {
    (ratio * n as f64 + 0.5).floor() as usize
}

pub fn split_train_test(s: &PriceSeries, ratio: f64) -> Result<TrainTestSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter(format!("split ratio {ratio} not in (0, 1)")));
    }
    let n = s.len();
    let n_train = train_len(n, ratio).min(n);
    let n_test = n - n_train;
    if n_train < 2 || n_test < 2 {
        return Err(Error::DegenerateSplit { train: n_train, test: n_test });
    }
    let (td, tc) = s.subset(0..n_train);
    let (vd, vc) = s.subset(n_train..n);
    Ok(TrainTestSplit {
        train: PriceSeries::new(s.asset_id.clone(), td, tc)?,
        test: PriceSeries::new(s.asset_id.clone(), vd, vc)?,
        ratio,
    })
}

/// Inner join on dates across all inputs.
pub fn align_series(series: &[PriceSeries]) -> Result<Vec<PriceSeries>> {
    if series.len() < 2 {
        return Err(Error::InsufficientData { what: "series to align", needed: 2, got: series.len() });
    }
    let mut common: BTreeSet<NaiveDate> = series[0].dates.iter().copied().collect();
    for s in &series[1..] {
        let other: BTreeSet<NaiveDate> = s.dates.iter().copied().collect();
        common = common.intersection(&other).copied().collect();
    }
    if common.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    series
        .iter()
        .map(|s| {
            let idx = (0..s.len()).filter(|&i| common.contains(&s.dates[i]));
            let (dates, closes) = s.subset(idx);
            PriceSeries::new(s.asset_id.clone(), dates, closes)
        })
        .collect()
}
