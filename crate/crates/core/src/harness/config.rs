use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::bench::AblationPlan;
use super::cv::{BenchDataset, NestedCvPlan};
use super::ingest::{ingest_csv, CsvSchema};
use super::model::{Method, ModelSpec, ParamValue};
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_QUANTILES;
use crate::synthetic::{generate, GeneratorKind, GeneratorSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub kind: GeneratorKind,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_censoring")]
    pub censoring: f64,
}

fn default_censoring() -> f64 {
    0.3
}

impl GeneratorConfig {
    pub fn spec(&self) -> GeneratorSpec {
        GeneratorSpec::new(self.kind, self.n, self.seed, self.censoring)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    #[serde(default)]
    pub time_col: Option<String>,
    #[serde(default)]
    pub event_col: Option<String>,
    #[serde(default)]
    pub numeric: Option<Vec<String>>,
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub event_coding: Option<[String; 2]>,
}

impl CsvSource {
    pub fn schema(&self) -> CsvSchema {
        let d = CsvSchema::default();
        CsvSchema {
            time_col: self.time_col.clone().unwrap_or(d.time_col),
            event_col: self.event_col.clone().unwrap_or(d.event_col),
            numeric: self.numeric.clone(),
            categorical: self.categorical.clone(),
            event_coding: self.event_coding.clone().unwrap_or(d.event_coding),
        }
    }
}

/// Exactly one of `generator` or `csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    #[serde(default)]
    pub generator: Option<GeneratorConfig>,
    #[serde(default)]
    pub csv: Option<CsvSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub method: Method,
    /// Entries replace the matching keys of the default grid.
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<ParamValue>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    #[serde(default = "three")]
    pub outer_folds: usize,
    #[serde(default = "five")]
    pub inner_folds: usize,
    #[serde(default = "two")]
    pub inner_repeats: usize,
    #[serde(default)]
    pub seed: u64,
}

fn three() -> usize {
    3
}

fn five() -> usize {
    5
}

fn two() -> usize {
    2
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self { outer_folds: 3, inner_folds: 5, inner_repeats: 2, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationConfig {
    pub pool: GeneratorConfig,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_holdout")]
    pub holdout_n: usize,
}

fn default_sizes() -> Vec<usize> {
    vec![300, 600, 1200, 2400]
}

fn default_holdout() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub plan: PlanConfig,
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    #[serde(default)]
    pub datasets: Vec<DatasetConfig>,
    pub methods: Vec<MethodConfig>,
    #[serde(default)]
    pub ablation: Option<AblationConfig>,
    /// Directory relative CSV paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_quantiles() -> Vec<f64> {
    DEFAULT_QUANTILES.to_vec()
}

impl BenchConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.plan().validate()?;
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.quantiles.is_empty() || self.quantiles.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
            return Err(Error::Config("quantiles must be nonempty and lie in (0, 1)".into()));
        }
        for d in &self.datasets {
            if d.generator.is_some() == d.csv.is_some() {
                return Err(Error::Config(format!("dataset `{}` needs exactly one of generator or csv", d.name)));
            }
            if let Some(g) = &d.generator {
                g.spec().validate()?;
            }
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("dataset names must be unique".into()));
        }
        self.specs()?;
        Ok(())
    }

    pub fn plan(&self) -> NestedCvPlan {
        let p = &self.plan;
        NestedCvPlan { outer_folds: p.outer_folds, inner_folds: p.inner_folds, inner_repeats: p.inner_repeats, seed: p.seed }
    }

    /// Default grids overridden key by key, then validated.
    pub fn specs(&self) -> Result<Vec<ModelSpec>> {
        self.methods
            .iter()
            .map(|m| {
                let mut spec = ModelSpec::default_for(m.method);
                for (k, v) in &m.grid {
                    spec.grid.insert(k.clone(), v.clone());
                }
                spec.validate()?;
                Ok(spec)
            })
            .collect()
    }

    /// Generates or ingests every dataset; also returns the rows dropped
    /// from each CSV.
    pub fn datasets(&self) -> Result<Vec<(BenchDataset, Vec<usize>)>> {
        self.datasets
            .iter()
            .map(|d| match (&d.generator, &d.csv) {
                (Some(g), None) => Ok((BenchDataset::numeric(d.name.clone(), generate(&g.spec())?.0), Vec::new())),
                (None, Some(c)) => {
                    let path = if c.path.is_absolute() { c.path.clone() } else { self.base_dir.join(&c.path) };
                    let ing = ingest_csv(&path, &c.schema())?;
                    let dropped = ing.dropped_rows.clone();
                    Ok((ing.into_bench(d.name.clone()), dropped))
                }
                _ => Err(Error::Config(format!("dataset `{}` needs exactly one of generator or csv", d.name))),
            })
            .collect()
    }

    pub fn ablation_plan(&self) -> Result<AblationPlan> {
        let a = self.ablation.as_ref().ok_or_else(|| Error::Config("missing [ablation] section".into()))?;
        let mut plan = AblationPlan::new(a.pool.spec(), self.plan());
        plan.sizes = a.sizes.clone();
        plan.holdout_n = a.holdout_n;
        Ok(plan)
    }
}
