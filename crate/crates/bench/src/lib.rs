//! Shared fixtures for the criterion benches.
use survbench::linear::{cox_predict, fit_cox, CoxFitOptions};
use survbench::synthetic::{generate, GeneratorKind, GeneratorSpec};
use survbench::{RiskVector, SurvivalDataset, SurvivalPredictionMatrix, TimeGrid};

/// A synthetic dataset at 30% censoring.
pub fn dataset(kind: GeneratorKind, n: usize, seed: u64) -> SurvivalDataset {
    generate(&GeneratorSpec::new(kind, n, seed, 0.3)).expect("valid generator spec").0
}

/// Cox predictions of `d` on itself over a 100-knot grid.
pub fn cox_fixture(d: &SurvivalDataset) -> (SurvivalPredictionMatrix, RiskVector) {
    let model = fit_cox(d, &CoxFitOptions { ridge_eps: 1e-6, ..CoxFitOptions::default() }).expect("cox fit");
    let grid = TimeGrid::from_event_quantiles(d, 100).expect("events present");
    cox_predict(&model, d.features(), &grid).expect("matching dimensions")
}
