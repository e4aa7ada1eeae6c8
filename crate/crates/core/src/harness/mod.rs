//! Nested cross-validation harness: grid search, benchmark sweeps,
//! sample-size ablation, dataset ingestion and report emission.
mod bench;
mod config;
mod cv;
mod ingest;
mod model;
mod report;

pub use bench::{
    ablation_split, metric_value, run_ablation, run_benchmark, AblationPlan, AblationRow, AblationTable, AggregateRow,
    BenchmarkReport, CellCorrelations, METRIC_FIELDS,
};
pub use config::{AblationConfig, BenchConfig, CsvSource, DatasetConfig, GeneratorConfig, MethodConfig, PlanConfig};
pub use cv::{
    complement, inner_select, nested_cv, outer_folds, prepare_split, split_folds, BenchDataset, CandidateScore,
    FoldResult, FoldTiming, NestedCvOutcome, NestedCvPlan, Preprocessor, Selection, GRID_SIZE,
};
pub use ingest::{
    ingest_csv, read_prediction_csv, write_dataset_csv, write_prediction_csv, write_truth_json, CsvSchema, Ingested,
};
pub use model::{compare_params, fit_model, format_params, FittedModel, Method, ModelSpec, ParamValue, Params};
pub use report::{emit_ablation, emit_report, load_report, long_rows, timing_rows, LongRow, ReportFormat, TimingRow};
