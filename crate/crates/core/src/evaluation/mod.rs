//! Statistics for comparing prediction models.

mod fisher;
mod spearman;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use fisher::{fisher_exact, FisherResult};
pub use spearman::{
    correlation_difference_test, mid_ranks, spearman_rho, CorrelationDifference, PValueMethod,
    SpearmanResult, EXACT_PERMUTATION_MAX_N,
};

use crate::error::{Error, Result};
use crate::inference::{classify_top_responders, ConfusionCounts, PredictionRecord};
use crate::model::PopulationParams;

/// `spearman_rho(|error|, predicted_std)`.
pub fn error_uncertainty_correlation(predictions: &[PredictionRecord]) -> Result<SpearmanResult> {
    let errors: Vec<f64> = predictions.iter().map(|p| p.abs_error).collect();
    let stds: Vec<f64> = predictions.iter().map(|p| p.predicted_std).collect();
    spearman_rho(&errors, &stds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub fraction: f64,
    pub bootstrap_resamples: usize,
    pub seed: u64,
    /// Significance level for the reported flags.
    pub alpha: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            fraction: 0.25,
            bootstrap_resamples: 10_000,
            seed: 1,
            alpha: 0.05,
        }
    }
}

impl EvaluationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return Err(Error::Config(format!("evaluation.fraction must lie in (0, 1), got {}", self.fraction)));
        }
        if self.bootstrap_resamples == 0 {
            return Err(Error::Config("evaluation.bootstrap_resamples must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("evaluation.alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// A statistic that may be undefined for the given data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub result: Option<SpearmanResult>,
    pub significant: bool,
    /// Why `result` is missing.
    pub undefined_reason: Option<String>,
}

impl Correlation {
    fn from(result: Result<SpearmanResult>, alpha: f64) -> Result<Self> {
        match result {
            Ok(r) => Ok(Self {
                significant: r.p_value < alpha,
                result: Some(r),
                undefined_reason: None,
            }),
            Err(Error::Undefined(reason)) => Ok(Self {
                result: None,
                significant: false,
                undefined_reason: Some(reason),
            }),
            Err(e) => Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSummary {
    pub fraction: f64,
    pub predicted_count: usize,
    pub actual_count: usize,
    pub confusion: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub error_fraction: f64,
    pub fisher_p: f64,
    pub fisher_zero_margin: bool,
    pub tie_group: Vec<String>,
    pub label_rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub comparison_model: String,
    pub test: CorrelationDifference,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model_name: String,
    pub users: usize,
    pub spearman_prediction: Correlation,
    pub spearman_error_vs_std: Correlation,
    pub correlation_difference: Option<ComparisonSummary>,
    pub classification: Option<ClassificationSummary>,
    /// Why `classification` is missing.
    pub classification_undefined: Option<String>,
    pub spearman_p_method: String,
}

/// Puts `other` into the user order of `reference`; both sets must match.
pub fn align_predictions(
    reference: &[PredictionRecord],
    other: &[PredictionRecord],
) -> Result<Vec<PredictionRecord>> {
    if reference.len() != other.len() {
        return Err(Error::invalid(format!(
            "prediction sets differ in size: {} vs {}",
            reference.len(),
            other.len()
        )));
    }
    let by_id: HashMap<&str, &PredictionRecord> = other.iter().map(|p| (p.user_id.as_str(), p)).collect();
    reference
        .iter()
        .map(|r| {
            let o = by_id
                .get(r.user_id.as_str())
                .ok_or_else(|| Error::invalid(format!("user {} missing from comparison predictions", r.user_id)))?;
            if o.observed != r.observed {
                return Err(Error::invalid(format!(
                    "user {} has observed {} in one file and {} in the other",
                    r.user_id, r.observed, o.observed
                )));
            }
            Ok((*o).clone())
        })
        .collect()
}

/// Correlation, error-uncertainty, classification and (optionally) a
/// comparison against a second model's predictions for the same users.
pub fn evaluate(
    model_name: &str,
    predictions: &[PredictionRecord],
    pop: &PopulationParams,
    comparison: Option<(&str, &[PredictionRecord])>,
    config: &EvaluationConfig,
) -> Result<EvaluationReport> {
    config.validate()?;
    let observed: Vec<f64> = predictions.iter().map(|p| p.observed as f64).collect();
    let predicted: Vec<f64> = predictions.iter().map(|p| p.predicted_mean).collect();
    let spearman_prediction = Correlation::from(spearman_rho(&predicted, &observed), config.alpha)?;
    let spearman_error_vs_std = Correlation::from(error_uncertainty_correlation(predictions), config.alpha)?;

    let correlation_difference = match comparison {
        Some((name, other)) => {
            let aligned = align_predictions(predictions, other)?;
            let second: Vec<f64> = aligned.iter().map(|p| p.predicted_mean).collect();
            let test = correlation_difference_test(
                &observed,
                &predicted,
                &second,
                config.bootstrap_resamples,
                config.seed,
            )?;
            Some(ComparisonSummary {
                comparison_model: name.to_string(),
                significant: test.p_value < config.alpha,
                test,
            })
        }
        None => None,
    };

    let (classification, classification_undefined) =
        match classify_top_responders(predictions, pop, config.fraction) {
            Ok(c) => {
                let fisher = fisher_exact(c.confusion.table());
                (
                    Some(ClassificationSummary {
                        fraction: c.fraction,
                        predicted_count: c.predicted_count,
                        actual_count: c.actual_count,
                        confusion: c.confusion,
                        precision: c.precision,
                        recall: c.recall,
                        error_fraction: c.error_fraction,
                        fisher_p: fisher.p_value,
                        fisher_zero_margin: fisher.zero_margin,
                        tie_group: c.tie_group,
                        label_rule: c.label_rule,
                    }),
                    None,
                )
            }
            Err(Error::Undefined(reason)) => (None, Some(reason)),
            Err(e) => return Err(e),
        };

    Ok(EvaluationReport {
        model_name: model_name.to_string(),
        users: predictions.len(),
        spearman_prediction,
        spearman_error_vs_std,
        correlation_difference,
        classification,
        classification_undefined,
        spearman_p_method: format!(
            "exact permutation for n <= {EXACT_PERMUTATION_MAX_N}, Student t approximation above"
        ),
    })
}
