//! Linear proportional-hazards models.

mod cox;
mod coxnet;

pub use cox::{
    cox_newton_direction, cox_partial_loglik, cox_predict, fit_cox, CoxFitOptions, CoxModel,
    PartialLikelihood,
};
pub use coxnet::{coxnet_lambda_max, coxnet_path, default_lambda_path, fit_coxnet, CoxNetOptions, ElasticNetConfig};

pub(crate) use cox::proportional_survival;
