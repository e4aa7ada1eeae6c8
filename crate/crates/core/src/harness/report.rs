use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bench::{metric_value, AblationTable, BenchmarkReport, METRIC_FIELDS};
use super::cv::FoldTiming;
use super::model::{format_params, Method};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("unknown report format `{other}` (expected csv or json)"))),
        }
    }
}

/// One row of the timing table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub dataset: String,
    pub method: Method,
    pub fold: usize,
    pub n_train: usize,
    pub select_seconds: f64,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRow {
    pub dataset: String,
    pub method: Method,
    pub fold: usize,
    pub metric: String,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SelectionRow {
    dataset: String,
    method: Method,
    fold: usize,
    params: String,
    error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CorrelationRow {
    pair: &'static str,
    n_cells: usize,
    value: Option<f64>,
}

/// Seven metric fields per outer fold, blank where a value is unavailable.
pub fn long_rows(report: &BenchmarkReport) -> Vec<LongRow> {
    report
        .rows
        .iter()
        .flat_map(|r| {
            METRIC_FIELDS.iter().map(move |f| LongRow {
                dataset: r.dataset.clone(),
                method: r.method,
                fold: r.fold,
                metric: f.to_string(),
                value: r.metrics.as_ref().and_then(|m| metric_value(m, f)),
            })
        })
        .collect()
}

pub fn timing_rows(report: &BenchmarkReport) -> Vec<TimingRow> {
    report
        .rows
        .iter()
        .filter_map(|r| {
            r.timing.map(|t| TimingRow {
                dataset: r.dataset.clone(),
                method: r.method,
                fold: r.fold,
                n_train: r.n_train,
                select_seconds: t.select_seconds,
                fit_seconds: t.fit_seconds,
                predict_seconds: t.predict_seconds,
            })
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes the report into `out_dir` and returns the files written.
/// Metric files are byte-stable; wall-clock timings go to their own file.
pub fn emit_report(report: &BenchmarkReport, format: ReportFormat, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if report.rows.is_empty() {
        return Err(Error::EmptySweep("report has no rows"));
    }
    ensure_dir(out_dir)?;
    let timings = timing_rows(report);
    let mut written = Vec::new();
    match format {
        ReportFormat::Csv => {
            let sel: Vec<SelectionRow> = report
                .rows
                .iter()
                .map(|r| SelectionRow {
                    dataset: r.dataset.clone(),
                    method: r.method,
                    fold: r.fold,
                    params: r.params.as_ref().map(format_params).unwrap_or_default(),
                    error: r.error.clone().unwrap_or_default(),
                })
                .collect();
            let c = report.correlations;
            let corr = [
                CorrelationRow { pair: "antolini~brier_rescaled", n_cells: c.n_cells, value: c.antolini_vs_brier_rescaled },
                CorrelationRow { pair: "antolini~auroc_avg", n_cells: c.n_cells, value: c.antolini_vs_auroc },
            ];
            for (name, res) in [
                ("long.csv", write_csv(&out_dir.join("long.csv"), &long_rows(report))),
                ("aggregate.csv", write_csv(&out_dir.join("aggregate.csv"), &report.aggregates)),
                ("selection.csv", write_csv(&out_dir.join("selection.csv"), &sel)),
                ("correlation.csv", write_csv(&out_dir.join("correlation.csv"), &corr)),
                ("timings.csv", write_csv(&out_dir.join("timings.csv"), &timings)),
            ] {
                res?;
                written.push(out_dir.join(name));
            }
        }
        ReportFormat::Json => {
            write_json(&out_dir.join("report.json"), report)?;
            written.push(out_dir.join("report.json"));
            write_json(&out_dir.join("timings.json"), &timings)?;
            written.push(out_dir.join("timings.json"));
        }
    }
    Ok(written)
}

/// Reads `report.json` from `dir`, reattaching `timings.json` when present.
pub fn load_report(dir: &Path) -> Result<BenchmarkReport> {
    let path = dir.join("report.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut report: BenchmarkReport = serde_json::from_str(&text)?;
    let tpath = dir.join("timings.json");
    if tpath.exists() {
        let text = fs::read_to_string(&tpath).map_err(|e| Error::io(&tpath, e))?;
        let timings: Vec<TimingRow> = serde_json::from_str(&text)?;
        for t in timings {
            if let Some(r) = report.rows.iter_mut().find(|r| r.dataset == t.dataset && r.method == t.method && r.fold == t.fold) {
                r.timing = Some(FoldTiming {
                    select_seconds: t.select_seconds,
                    fit_seconds: t.fit_seconds,
                    predict_seconds: t.predict_seconds,
                });
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AblationLongRow {
    method: Method,
    size: usize,
    metric: &'static str,
    value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AblationTimingRow {
    method: Method,
    size: usize,
    fit_seconds: f64,
}

/// Writes the method x size table in the requested format, with timings apart.
pub fn emit_ablation(table: &AblationTable, format: ReportFormat, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if table.rows.is_empty() {
        return Err(Error::EmptySweep("ablation has no rows"));
    }
    ensure_dir(out_dir)?;
    let timings: Vec<AblationTimingRow> = table
        .rows
        .iter()
        .filter_map(|r| r.fit_seconds.map(|s| AblationTimingRow { method: r.method, size: r.size, fit_seconds: s }))
        .collect();
    let mut written = Vec::new();
    match format {
        ReportFormat::Csv => {
            let long: Vec<AblationLongRow> = table
                .rows
                .iter()
                .flat_map(|r| {
                    METRIC_FIELDS.iter().map(move |f| AblationLongRow {
                        method: r.method,
                        size: r.size,
                        metric: f,
                        value: r.metrics.as_ref().and_then(|m| metric_value(m, f)),
                    })
                })
                .collect();
            write_csv(&out_dir.join("ablation.csv"), &long)?;
            written.push(out_dir.join("ablation.csv"));
            write_csv(&out_dir.join("ablation_timings.csv"), &timings)?;
            written.push(out_dir.join("ablation_timings.csv"));
        }
        ReportFormat::Json => {
            write_json(&out_dir.join("ablation.json"), table)?;
            written.push(out_dir.join("ablation.json"));
            write_json(&out_dir.join("ablation_timings.json"), &timings)?;
            written.push(out_dir.join("ablation_timings.json"));
        }
    }
    Ok(written)
}
