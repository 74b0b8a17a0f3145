//! Parameter estimation for the response model and the logistic baseline.

mod logistic;
mod mle;
pub(crate) mod optimize;

pub use logistic::{fit_logistic, logistic_predict, LogisticFit, LogisticPrediction};
pub use mle::{
    confidence_intervals, fit_mle, BoundMethod, Exclusion, ExclusionReason, FitConfig, FitResult,
    FreeParameters, GridProbe, ParameterInterval,
};
