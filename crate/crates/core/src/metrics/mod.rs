//! Concordance, Brier and AUROC metrics for censored survival predictions.

mod auc;
mod brier;
mod concordance;
mod correlation;
mod report;

pub use auc::{auc_summary, cumulative_dynamic_auc_at};
pub use brier::{brier_score_at, brier_summary, rescale_brier, BrierPoint, BrierSummary};
pub use concordance::{antolini_c, harrell_c, harrell_c_quartile_avg, QuartileHarrell, QUARTILES};
pub use correlation::score_correlation;
pub use report::{evaluate, MetricReport, DEFAULT_QUANTILES};
