use std::collections::BTreeSet;
use std::fs::{self, File};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::cv::BenchDataset;
use crate::data::{SurvivalDataset, TimeGrid};
use crate::error::{Error, Result};
use crate::prediction::SurvivalPredictionMatrix;
use crate::synthetic::GroundTruth;

const MISSING: [&str; 4] = ["", "NA", "NaN", "nan"];

/// Column roles of an input CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    #[serde(default = "default_time")]
    pub time_col: String,
    #[serde(default = "default_event")]
    pub event_col: String,
    /// Numeric feature columns; `None` takes every column not otherwise named.
    #[serde(default)]
    pub numeric: Option<Vec<String>>,
    #[serde(default)]
    pub categorical: Vec<String>,
    /// Tokens for (censored, event) in the event column.
    #[serde(default = "default_coding")]
    pub event_coding: [String; 2],
}

fn default_time() -> String {
    "time".into()
}

fn default_event() -> String {
    "event".into()
}

fn default_coding() -> [String; 2] {
    ["0".into(), "1".into()]
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            time_col: default_time(),
            event_col: default_event(),
            numeric: None,
            categorical: Vec::new(),
            event_coding: default_coding(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub data: SurvivalDataset,
    /// `true` for numeric columns, `false` for one-hot indicators.
    pub numeric_mask: Vec<bool>,
    /// 1-based data-row numbers (header excluded) dropped for missing values.
    pub dropped_rows: Vec<usize>,
}

impl Ingested {
    pub fn into_bench(self, name: impl Into<String>) -> BenchDataset {
        BenchDataset { name: name.into(), data: self.data, numeric_mask: self.numeric_mask }
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_num(raw: &str, row: usize, col: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::UnparseableValue { row, col: col.to_string(), value: raw.to_string() })
}

/// Reads a survival CSV. Numeric columns come first in file order, then
/// one indicator per categorical level except the lexicographically first,
/// named `column=level`. Standardization is left to the caller so that it
/// can be fitted on training folds only.
pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<Ingested> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers()?.clone();
    let t_col = column(&headers, &schema.time_col)?;
    let e_col = column(&headers, &schema.event_col)?;
    let cat_cols: Vec<usize> = schema.categorical.iter().map(|c| column(&headers, c)).collect::<Result<_>>()?;
    let num_cols: Vec<usize> = match &schema.numeric {
        Some(names) => names.iter().map(|c| column(&headers, c)).collect::<Result<_>>()?,
        None => (0..headers.len()).filter(|j| *j != t_col && *j != e_col && !cat_cols.contains(j)).collect(),
    };

    let used: Vec<usize> = [t_col, e_col].into_iter().chain(num_cols.iter().copied()).chain(cat_cols.iter().copied()).collect();
    let mut times = Vec::new();
    let mut events = Vec::new();
    let mut nums: Vec<Vec<f64>> = Vec::new();
    let mut cats: Vec<Vec<String>> = Vec::new();
    let mut dropped_rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = k + 1;
        if used.iter().any(|&j| MISSING.contains(&rec.get(j).unwrap_or(""))) {
            dropped_rows.push(row);
            continue;
        }
        let t = parse_num(&rec[t_col], row, &schema.time_col)?;
        if t <= 0.0 {
            return Err(Error::UnparseableValue { row, col: schema.time_col.clone(), value: rec[t_col].to_string() });
        }
        let raw_e = &rec[e_col];
        let e = if raw_e == schema.event_coding[1] {
            true
        } else if raw_e == schema.event_coding[0] {
            false
        } else {
            return Err(Error::UnparseableValue { row, col: schema.event_col.clone(), value: raw_e.to_string() });
        };
        times.push(t);
        events.push(e);
        nums.push(num_cols.iter().map(|&j| parse_num(&rec[j], row, &headers[j])).collect::<Result<_>>()?);
        cats.push(cat_cols.iter().map(|&j| rec[j].to_string()).collect());
    }
    if times.is_empty() {
        return Err(Error::AllRowsDropped);
    }

    let levels: Vec<Vec<String>> = (0..cat_cols.len())
        .map(|c| cats.iter().map(|r| r[c].clone()).collect::<BTreeSet<_>>().into_iter().skip(1).collect())
        .collect();
    let mut names: Vec<String> = num_cols.iter().map(|&j| headers[j].to_string()).collect();
    let mut numeric_mask = vec![true; names.len()];
    for (c, lv) in levels.iter().enumerate() {
        for l in lv {
            names.push(format!("{}={l}", schema.categorical[c]));
            numeric_mask.push(false);
        }
    }
    let n = times.len();
    let mut x = Array2::zeros((n, names.len()));
    for i in 0..n {
        for (j, v) in nums[i].iter().enumerate() {
            x[[i, j]] = *v;
        }
        let mut j = num_cols.len();
        for (c, lv) in levels.iter().enumerate() {
            for l in lv {
                x[[i, j]] = f64::from(u8::from(cats[i][c] == *l));
                j += 1;
            }
        }
    }
    let data = SurvivalDataset::with_names(x, times, events, names)?;
    Ok(Ingested { data, numeric_mask, dropped_rows })
}

/// Writes `time,event,<features>` with shortest round-trip float formatting.
pub fn write_dataset_csv(path: &Path, d: &SurvivalDataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<&str> = ["time", "event"].into_iter().chain(d.feature_names().iter().map(String::as_str)).collect();
    w.write_record(&header)?;
    for i in 0..d.n() {
        let mut rec = vec![d.times()[i].to_string(), u8::from(d.events()[i]).to_string()];
        rec.extend(d.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct TruthSidecar<'a> {
    kind: &'a str,
    linear_coefficients: Option<&'a [f64]>,
    baseline_knots: Option<&'a [f64]>,
    baseline_values: Option<&'a [f64]>,
    /// Per-subject interval probabilities (NonPH) or log-risks (PH kinds).
    subjects: &'a [crate::synthetic::SubjectTruth],
    latent_times: &'a [f64],
}

/// Writes the generating law of a synthetic dataset as JSON.
pub fn write_truth_json(path: &Path, truth: &GroundTruth) -> Result<()> {
    let side = TruthSidecar {
        kind: truth.kind.name(),
        linear_coefficients: truth.linear_coefficients.as_deref(),
        baseline_knots: truth.baseline_cumhaz.as_ref().map(|h| h.knots()),
        baseline_values: truth.baseline_cumhaz.as_ref().map(|h| h.values()),
        subjects: &truth.subjects,
        latent_times: &truth.latent_times,
    };
    let mut s = serde_json::to_string_pretty(&side)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Prediction exchange format: the first row holds the grid, each later
/// row one subject's survival values. No header.
pub fn write_prediction_csv(path: &Path, pred: &SurvivalPredictionMatrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(pred.grid().knots().iter().map(|v| v.to_string()))?;
    for i in 0..pred.n_subjects() {
        w.write_record(pred.row(i).iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_prediction_csv(path: &Path) -> Result<SurvivalPredictionMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let col = if k == 0 { "grid" } else { "survival" };
        rows.push(rec.iter().map(|v| parse_num(v, k + 1, col)).collect::<Result<_>>()?);
    }
    let Some((grid, surv)) = rows.split_first() else {
        return Err(Error::AllRowsDropped);
    };
    let m = grid.len();
    let flat: Vec<f64> = surv.iter().flatten().copied().collect();
    let surv = Array2::from_shape_vec((surv.len(), m), flat)
        .map_err(|_| Error::InvalidArgument("prediction rows must match the grid length".into()))?;
    SurvivalPredictionMatrix::new(TimeGrid::new(grid.clone())?, surv)
}
