//! Report files: one row per evaluation record, plus aggregated metrics.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::experiment::{EvaluationRecord, Experiment};
use crate::analysis::{kruskal_wallis, r_squared, summary, Dataset, Percent};
use crate::types::Gas;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format {other:?}, expected csv or json")),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("nothing to report")]
    Empty,
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Flat form of an [`EvaluationRecord`], shared by the CSV and JSON files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub tx_id: String,
    pub delta: u64,
    pub experiment: Experiment,
    pub estimator: String,
    pub dataset: Dataset,
    pub estimate: Option<Gas>,
    pub truth: Gas,
    pub ape: Option<f64>,
    pub included: bool,
    pub reads_untouched: bool,
}

impl From<&EvaluationRecord> for RecordRow {
    fn from(r: &EvaluationRecord) -> Self {
        RecordRow {
            tx_id: r.tx_id.clone(),
            delta: r.delta,
            experiment: r.experiment,
            estimator: r.estimator.clone(),
            dataset: r.dataset,
            estimate: r.estimate,
            truth: r.truth,
            ape: r.ape.map(Percent::to_f64),
            included: r.included,
            reads_untouched: r.reads_untouched,
        }
    }
}

pub fn rows_to_csv(rows: &[RecordRow]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn rows_to_json(rows: &[RecordRow]) -> Result<String, ReportError> {
    Ok(serde_json::to_string_pretty(rows)? + "\n")
}

pub fn rows_from_csv(text: &str) -> Result<Vec<RecordRow>, ReportError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn rows_from_json(text: &str) -> Result<Vec<RecordRow>, ReportError> {
    Ok(serde_json::from_str(text)?)
}

pub fn json_to_csv(text: &str) -> Result<String, ReportError> {
    rows_to_csv(&rows_from_json(text)?)
}

pub fn csv_to_json(text: &str) -> Result<String, ReportError> {
    rows_to_json(&rows_from_csv(text)?)
}

pub fn render_records(records: &[EvaluationRecord], format: ReportFormat) -> Result<String, ReportError> {
    if records.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut sorted = records.to_vec();
    super::experiment::sort_records(&mut sorted);
    let rows: Vec<RecordRow> = sorted.iter().map(RecordRow::from).collect();
    match format {
        ReportFormat::Csv => rows_to_csv(&rows),
        ReportFormat::Json => rows_to_json(&rows),
    }
}

/// Writes the records, sorted by transaction id, Δ and estimator. Nothing
/// is written when there are no records.
pub fn emit_report(records: &[EvaluationRecord], format: ReportFormat, out: &Path) -> Result<(), ReportError> {
    let text = render_records(records, format)?;
    write_file(out, &text)
}

pub(crate) fn write_file(out: &Path, text: &str) -> Result<(), ReportError> {
    std::fs::write(out, text).map_err(|source| ReportError::Io {
        path: out.display().to_string(),
        source,
    })
}

/// One aggregated row per estimator, Δ and dataset, over included records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    /// Experiment and estimator, e.g. `E1:RGUM-mean`.
    pub estimator: String,
    pub delta: u64,
    pub dataset: Dataset,
    pub n: usize,
    pub median_ape: f64,
    pub mean_ape: f64,
    pub std_ape: f64,
    /// Absent when undefined (fewer than two rows or constant truth).
    pub r2: Option<f64>,
}

fn median_exact(values: &mut [Percent]) -> Percent {
    values.sort();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        Percent((values[n / 2 - 1].0 + values[n / 2].0) / 2)
    }
}

pub fn compute_metrics(records: &[EvaluationRecord]) -> Vec<MetricRow> {
    let mut groups: BTreeMap<(Experiment, String, u64, Dataset), Vec<&EvaluationRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.included) {
        groups
            .entry((r.experiment, r.estimator.clone(), r.delta, r.dataset))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((experiment, estimator, delta, dataset), rows)| {
            let mut apes: Vec<Percent> = rows.iter().filter_map(|r| r.ape).collect();
            let floats: Vec<f64> = apes.iter().map(|p| p.to_f64()).collect();
            let stats = summary(&floats).expect("included rows carry an estimate");
            let ys: Vec<f64> = rows.iter().map(|r| r.truth as f64).collect();
            let y_hats: Vec<f64> = rows.iter().filter_map(|r| r.estimate).map(|g| g as f64).collect();
            MetricRow {
                estimator: format!("{experiment}:{estimator}"),
                delta,
                dataset,
                n: rows.len(),
                median_ape: median_exact(&mut apes).to_f64(),
                mean_ape: stats.mean,
                std_ape: stats.std,
                r2: r_squared(&ys, &y_hats).ok(),
            }
        })
        .collect()
}

pub fn metrics_to_csv(rows: &[MetricRow]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn emit_metrics(records: &[EvaluationRecord], out: &Path) -> Result<(), ReportError> {
    if records.is_empty() {
        return Err(ReportError::Empty);
    }
    write_file(out, &metrics_to_csv(&compute_metrics(records))?)
}

/// Fixed-width table with percentages to two decimals.
pub fn metrics_table(rows: &[MetricRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<20} {:>5} {:>3} {:>5} {:>10} {:>10} {:>10} {:>8}",
        "estimator", "delta", "ds", "n", "median%", "mean%", "std%", "r2"
    );
    for r in rows {
        let r2 = r.r2.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(
            out,
            "{:<20} {:>5} {:>3} {:>5} {:>10.2} {:>10.2} {:>10.2} {:>8}",
            r.estimator, r.delta, r.dataset, r.n, r.median_ape, r.mean_ape, r.std_ape, r2
        );
    }
    out
}

/// Kruskal–Wallis across the estimators of one experiment, Δ and dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KruskalRow {
    pub experiment: Experiment,
    pub delta: u64,
    pub dataset: Dataset,
    pub groups: usize,
    pub h: f64,
    pub p: f64,
    pub degenerate: bool,
}

pub fn kruskal_rows(records: &[EvaluationRecord]) -> Vec<KruskalRow> {
    let mut groups: BTreeMap<(Experiment, u64, Dataset), BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.included) {
        if let Some(ape) = r.ape {
            groups
                .entry((r.experiment, r.delta, r.dataset))
                .or_default()
                .entry(r.estimator.as_str())
                .or_default()
                .push(ape.to_f64());
        }
    }
    groups
        .into_iter()
        .filter_map(|((experiment, delta, dataset), by_estimator)| {
            let samples: Vec<Vec<f64>> = by_estimator.into_values().collect();
            let kw = kruskal_wallis(&samples).ok()?;
            Some(KruskalRow {
                experiment,
                delta,
                dataset,
                groups: samples.len(),
                h: kw.h,
                p: kw.p,
                degenerate: kw.degenerate,
            })
        })
        .collect()
}
