//! Tree ensembles: random survival forests and gradient-boosted Cox trees.

mod gbcox;
mod logrank;
mod regression_tree;
mod rsf;

pub use gbcox::{cox_score_gradient, fit_gbcox, gbcox_predict, GbCoxOptions, GradientBoostedCoxModel};
pub use logrank::logrank_split_statistic;
pub use regression_tree::{RegressionNode, RegressionTree};
pub use rsf::{bootstrap_indices, fit_rsf, rsf_predict, RsfModel, RsfOptions, SurvivalNode, SurvivalTree};
