use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::data::{SurvivalDataset, TimeGrid};
use crate::ensemble::{fit_gbcox, fit_rsf, gbcox_predict, rsf_predict, GbCoxOptions, GradientBoostedCoxModel, RsfModel, RsfOptions};
use crate::error::{Error, Result};
use crate::linear::{cox_predict, coxnet_lambda_max, fit_cox, fit_coxnet, CoxFitOptions, CoxModel, CoxNetOptions, ElasticNetConfig};
use crate::prediction::SurvivalPredictionMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    CoxPh,
    CoxNet,
    Rsf,
    GbCox,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::CoxPh, Method::CoxNet, Method::Rsf, Method::GbCox];

    pub fn name(self) -> &'static str {
        match self {
            Method::CoxPh => "coxph",
            Method::CoxNet => "coxnet",
            Method::Rsf => "rsf",
            Method::GbCox => "gbcox",
        }
    }

    fn allowed_keys(self) -> &'static [&'static str] {
        match self {
            Method::CoxPh => &["ridge_eps", "max_iter"],
            Method::CoxNet => &["l1_ratio", "lambda_frac"],
            Method::Rsf => &["n_trees", "mtry", "min_leaf_size", "max_depth"],
            Method::GbCox => &["n_stages", "learning_rate", "max_depth", "min_leaf_size", "subsample"],
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}` (expected coxph, coxnet, rsf or gbcox)")))
    }
}

/// A hyperparameter value: a number or a symbolic choice such as `"sqrt"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Num(f64),
    Text(String),
}

impl ParamValue {
    fn cmp_total(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ParamValue::Num(a), ParamValue::Num(b)) => a.total_cmp(b),
            (ParamValue::Num(_), ParamValue::Text(_)) => Ordering::Less,
            (ParamValue::Text(_), ParamValue::Num(_)) => Ordering::Greater,
            (ParamValue::Text(a), ParamValue::Text(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Num(v) => write!(f, "{v}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

/// One grid point, keyed by parameter name.
pub type Params = BTreeMap<String, ParamValue>;

/// Lexicographic order on parameter tuples (keys are already sorted).
pub fn compare_params(a: &Params, b: &Params) -> Ordering {
    for ((ka, va), (kb, vb)) in a.iter().zip(b) {
        let o = ka.cmp(kb).then_with(|| va.cmp_total(vb));
        if o != Ordering::Equal {
            return o;
        }
    }
    a.len().cmp(&b.len())
}

pub fn format_params(p: &Params) -> String {
    p.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub method: Method,
    pub grid: BTreeMap<String, Vec<ParamValue>>,
}

fn nums(v: &[f64]) -> Vec<ParamValue> {
    v.iter().map(|&x| ParamValue::Num(x)).collect()
}

impl ModelSpec {
    /// Built-in grid for `method`.
    pub fn default_for(method: Method) -> Self {
        let mut grid = BTreeMap::new();
        match method {
            Method::CoxPh => {
                grid.insert("ridge_eps".into(), nums(&[1e-6]));
            }
            Method::CoxNet => {
                grid.insert("l1_ratio".into(), nums(&[0.1, 0.5, 0.9, 1.0]));
                let fracs: Vec<f64> = (0..8).map(|i| 10f64.powf(-3.0 + 2.5 * i as f64 / 7.0)).collect();
                grid.insert("lambda_frac".into(), nums(&fracs));
            }
            Method::Rsf => {
                grid.insert("n_trees".into(), nums(&[200.0]));
                grid.insert("mtry".into(), vec![ParamValue::Text("sqrt".into()), ParamValue::Text("third".into())]);
                grid.insert("min_leaf_size".into(), nums(&[10.0, 25.0]));
            }
            Method::GbCox => {
                grid.insert("n_stages".into(), nums(&[100.0, 300.0]));
                grid.insert("learning_rate".into(), nums(&[0.05, 0.1]));
                grid.insert("max_depth".into(), nums(&[2.0, 3.0]));
                grid.insert("min_leaf_size".into(), nums(&[10.0]));
                grid.insert("subsample".into(), nums(&[0.8]));
            }
        }
        Self { method, grid }
    }

    pub fn single(method: Method, params: Params) -> Self {
        Self { method, grid: params.into_iter().map(|(k, v)| (k, vec![v])).collect() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() && self.method != Method::CoxPh {
            return Err(Error::Config(format!("{}: grid is empty", self.method)));
        }
        for (k, vs) in &self.grid {
            if !self.method.allowed_keys().contains(&k.as_str()) {
                return Err(Error::Config(format!("{}: unknown hyperparameter `{k}`", self.method)));
            }
            if vs.is_empty() {
                return Err(Error::Config(format!("{}: `{k}` has no candidate values", self.method)));
            }
        }
        for c in self.candidates() {
            check_params(self.method, &c)?;
        }
        Ok(())
    }

    /// Cartesian product of the grid, in lexicographic key order with the
    /// last key varying fastest.
    pub fn candidates(&self) -> Vec<Params> {
        let mut out = vec![Params::new()];
        for (k, vs) in &self.grid {
            out = out
                .into_iter()
                .flat_map(|p| {
                    vs.iter().map(move |v| {
                        let mut q = p.clone();
                        q.insert(k.clone(), v.clone());
                        q
                    })
                })
                .collect();
        }
        out
    }
}

fn num(p: &Params, key: &str, default: f64) -> Result<f64> {
    match p.get(key) {
        None => Ok(default),
        Some(ParamValue::Num(v)) if v.is_finite() => Ok(*v),
        Some(v) => Err(Error::Config(format!("`{key}` must be a finite number, got {v}"))),
    }
}

fn count(p: &Params, key: &str, default: usize, min: usize) -> Result<usize> {
    let v = num(p, key, default as f64)?;
    if v.fract() != 0.0 || v < min as f64 {
        return Err(Error::Config(format!("`{key}` must be an integer >= {min}, got {v}")));
    }
    Ok(v as usize)
}

fn in_range(key: &str, v: f64, ok: bool) -> Result<f64> {
    if ok {
        Ok(v)
    } else {
        Err(Error::Config(format!("`{key}` = {v} is out of range")))
    }
}

fn check_params(method: Method, p: &Params) -> Result<()> {
    match method {
        Method::CoxPh => {
            let r = num(p, "ridge_eps", 1e-6)?;
            in_range("ridge_eps", r, r >= 0.0)?;
            count(p, "max_iter", 100, 1)?;
        }
        Method::CoxNet => {
            let a = num(p, "l1_ratio", 0.5)?;
            in_range("l1_ratio", a, (0.0..=1.0).contains(&a))?;
            let f = num(p, "lambda_frac", 0.01)?;
            in_range("lambda_frac", f, f > 0.0)?;
        }
        Method::Rsf => {
            count(p, "n_trees", 200, 1)?;
            count(p, "min_leaf_size", 15, 1)?;
            if p.contains_key("max_depth") {
                count(p, "max_depth", 0, 0)?;
            }
            if let Some(ParamValue::Text(s)) = p.get("mtry") {
                if s != "sqrt" && s != "third" {
                    return Err(Error::Config(format!("`mtry` must be sqrt, third or a number, got {s}")));
                }
            } else if p.contains_key("mtry") {
                count(p, "mtry", 1, 1)?;
            }
        }
        Method::GbCox => {
            count(p, "n_stages", 200, 1)?;
            count(p, "max_depth", 3, 0)?;
            count(p, "min_leaf_size", 1, 1)?;
            let lr = num(p, "learning_rate", 0.1)?;
            in_range("learning_rate", lr, lr > 0.0 && lr <= 1.0)?;
            let s = num(p, "subsample", 1.0)?;
            in_range("subsample", s, s > 0.0 && s <= 1.0)?;
        }
    }
    Ok(())
}

/// A fitted model of any supported method.
#[derive(Debug, Clone)]
pub enum FittedModel {
    Cox(CoxModel),
    Rsf(RsfModel),
    GbCox(GradientBoostedCoxModel),
}

/// Fits `method` with hyperparameters `p`; `seed` drives randomized methods.
pub fn fit_model(method: Method, p: &Params, train: &SurvivalDataset, seed: u64) -> Result<FittedModel> {
    check_params(method, p)?;
    Ok(match method {
        Method::CoxPh => {
            let opts = CoxFitOptions {
                ridge_eps: num(p, "ridge_eps", 1e-6)?,
                max_iter: count(p, "max_iter", 100, 1)?,
                ..Default::default()
            };
            FittedModel::Cox(fit_cox(train, &opts)?)
        }
        Method::CoxNet => {
            let l1_ratio = num(p, "l1_ratio", 0.5)?;
            let lambda = num(p, "lambda_frac", 0.01)? * coxnet_lambda_max(train, l1_ratio)?;
            let cfg = ElasticNetConfig::new(lambda, l1_ratio)?;
            FittedModel::Cox(fit_coxnet(train, &cfg, &CoxNetOptions::default())?)
        }
        Method::Rsf => {
            let pdim = train.p();
            let mtry = match p.get("mtry") {
                None => None,
                Some(ParamValue::Text(s)) if s == "sqrt" => Some(((pdim as f64).sqrt().ceil() as usize).clamp(1, pdim)),
                Some(ParamValue::Text(_)) => Some((pdim / 3).clamp(1, pdim)),
                Some(ParamValue::Num(v)) => Some((*v as usize).clamp(1, pdim)),
            };
            let opts = RsfOptions {
                n_trees: count(p, "n_trees", 200, 1)?,
                mtry,
                min_leaf_size: count(p, "min_leaf_size", 15, 1)?,
                max_depth: if p.contains_key("max_depth") { Some(count(p, "max_depth", 0, 0)?) } else { None },
                seed,
            };
            FittedModel::Rsf(fit_rsf(train, &opts)?)
        }
        Method::GbCox => {
            let opts = GbCoxOptions {
                n_stages: count(p, "n_stages", 200, 1)?,
                learning_rate: num(p, "learning_rate", 0.1)?,
                max_depth: count(p, "max_depth", 3, 0)?,
                min_leaf_size: count(p, "min_leaf_size", 1, 1)?,
                subsample: num(p, "subsample", 1.0)?,
                seed,
            };
            FittedModel::GbCox(fit_gbcox(train, &opts)?)
        }
    })
}

impl FittedModel {
    pub fn predict(&self, x: ArrayView2<'_, f64>, grid: &TimeGrid) -> Result<SurvivalPredictionMatrix> {
        match self {
            FittedModel::Cox(m) => Ok(cox_predict(m, x, grid)?.0),
            FittedModel::Rsf(m) => rsf_predict(m, x, grid),
            FittedModel::GbCox(m) => Ok(gbcox_predict(m, x, grid)?.0),
        }
    }

    /// Whether the model's curves are proportional and never cross.
    pub fn is_proportional(&self) -> bool {
        !matches!(self, FittedModel::Rsf(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_sizes() {
        let sizes: Vec<usize> = Method::ALL.iter().map(|&m| ModelSpec::default_for(m).candidates().len()).collect();
        assert_eq!(sizes, vec![1, 32, 4, 8]);
        for m in Method::ALL {
            ModelSpec::default_for(m).validate().unwrap();
        }
        let net = ModelSpec::default_for(Method::CoxNet);
        let fracs = &net.grid["lambda_frac"];
        assert_eq!(fracs.len(), 8);
        assert!(matches!(fracs[0], ParamValue::Num(v) if (v - 1e-3).abs() < 1e-15));
        assert!(matches!(fracs[7], ParamValue::Num(v) if (v - 10f64.powf(-0.5)).abs() < 1e-12));
    }

    #[test]
    fn rejects_bad_grids() {
        let mut s = ModelSpec::default_for(Method::GbCox);
        s.grid.insert("learning_rate".into(), nums(&[1.5]));
        assert!(s.validate().is_err());
        let mut s = ModelSpec::default_for(Method::Rsf);
        s.grid.insert("depth".into(), nums(&[2.0]));
        assert!(s.validate().is_err());
        let mut s = ModelSpec::default_for(Method::Rsf);
        s.grid.insert("mtry".into(), vec![ParamValue::Text("half".into())]);
        assert!(s.validate().is_err());
        assert!("xgb".parse::<Method>().is_err());
    }

    #[test]
    fn params_order_lexicographically() {
        let a: Params = [("a".to_string(), ParamValue::Num(1.0)), ("b".to_string(), ParamValue::Num(5.0))].into();
        let b: Params = [("a".to_string(), ParamValue::Num(2.0)), ("b".to_string(), ParamValue::Num(0.0))].into();
        assert_eq!(compare_params(&a, &b), Ordering::Less);
        assert_eq!(compare_params(&a, &a.clone()), Ordering::Equal);
        let t: Params = [("mtry".to_string(), ParamValue::Text("sqrt".into()))].into();
        let n: Params = [("mtry".to_string(), ParamValue::Num(3.0))].into();
        assert_eq!(compare_params(&n, &t), Ordering::Less);
        assert_eq!(format_params(&a), "a=1;b=5");
    }

    #[test]
    fn param_values_parse_untagged() {
        let v: Vec<ParamValue> = serde_json::from_str(r#"[0.5, "sqrt", 3]"#).unwrap();
        assert_eq!(v, vec![ParamValue::Num(0.5), ParamValue::Text("sqrt".into()), ParamValue::Num(3.0)]);
    }
}
