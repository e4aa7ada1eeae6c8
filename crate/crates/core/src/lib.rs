//! Survival-analysis toolkit and benchmark harness.
//!
//! The crate covers the whole pipeline used to compare survival models on
//! censored time-to-event data:
//!
//! - [`data`], [`step`], [`prediction`]: datasets, time grids, step functions
//!   and the per-subject survival matrix every model emits.
//! - [`nonparam`]: Kaplan-Meier, Nelson-Aalen, Breslow and the censoring
//!   survival used for IPCW weights.
//! - [`linear`]: Cox proportional hazards (Newton-Raphson) and the
//!   elastic-net penalized CoxNet (coordinate descent).
//! - [`ensemble`]: random survival forests with log-rank splitting and
//!   gradient-boosted trees under the Cox loss.
//! - [`metrics`]: Harrell's and Antolini's concordance, IPCW Brier score and
//!   cumulative/dynamic AUROC.
//! - [`synthetic`]: the LinPH, NonLinPH and NonPH generators.
//! - [`harness`]: nested cross-validation, grid search, ablation and report
//!   emission.

pub mod data;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod linear;
mod linalg;
pub mod metrics;
pub mod nonparam;
pub mod prediction;
pub mod rng;
pub mod step;
pub mod synthetic;

pub use data::{event_time_quantiles, validate_dataset, SurvivalDataset, TimeGrid};
pub use error::{Error, Result};
pub use prediction::{RiskVector, SurvivalPredictionMatrix};
pub use step::StepFunction;
