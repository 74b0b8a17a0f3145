//! Per-user predictions, top-responder classification and topic-interest
//! posteriors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ln_choose, ModelParams, PopulationParams, ResponseModel, Stance, UserRecord,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub user_id: String,
    pub predicted_mean: f64,
    pub predicted_std: f64,
    pub observed: u64,
    pub abs_error: f64,
}

impl PredictionRecord {
    pub fn new(user_id: impl Into<String>, predicted_mean: f64, predicted_std: f64, observed: u64) -> Self {
        Self {
            user_id: user_id.into(),
            predicted_mean,
            predicted_std,
            observed,
            abs_error: (predicted_mean - observed as f64).abs(),
        }
    }
}

impl ResponseModel {
    /// Mean and standard deviation of the response distribution; the
    /// observed count only enters `abs_error`.
    pub fn predict(&self, user: &UserRecord) -> Result<PredictionRecord> {
        user.validate(Some(self.population()))?;
        let dist = self.response_distribution(user)?;
        Ok(PredictionRecord::new(
            user.user_id.clone(),
            dist.mean,
            dist.std_dev,
            user.responses,
        ))
    }

    pub fn predict_all(&self, users: &[UserRecord]) -> Result<Vec<PredictionRecord>> {
        users.par_iter().map(|u| self.predict(u)).collect()
    }
}

pub fn predict_user(user: &UserRecord, pop: &PopulationParams, params: &ModelParams) -> Result<PredictionRecord> {
    ResponseModel::new(pop, params)?.predict(user)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_positive: u64,
    pub false_positive: u64,
    pub false_negative: u64,
    pub true_negative: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_positive + self.false_positive + self.false_negative + self.true_negative
    }

    pub fn precision(&self) -> f64 {
        let predicted = self.true_positive + self.false_positive;
        if predicted == 0 {
            0.0
        } else {
            self.true_positive as f64 / predicted as f64
        }
    }

    pub fn recall(&self) -> f64 {
        let actual = self.true_positive + self.false_negative;
        if actual == 0 {
            0.0
        } else {
            self.true_positive as f64 / actual as f64
        }
    }

    pub fn error_fraction(&self) -> f64 {
        (self.false_positive + self.false_negative) as f64 / self.total() as f64
    }

    /// `[[tp, fp], [fn, tn]]`, rows by prediction.
    pub fn table(&self) -> [[u64; 2]; 2] {
        [
            [self.true_positive, self.false_positive],
            [self.false_negative, self.true_negative],
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserLabel {
    pub user_id: String,
    pub predicted_top: bool,
    pub actual_top: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub fraction: f64,
    /// Size of the predicted top set, `ceil(fraction * users)`.
    pub predicted_count: usize,
    pub actual_count: usize,
    /// Observed response fraction at or above which a user is an actual top
    /// responder.
    pub actual_threshold: f64,
    pub labels: Vec<UserLabel>,
    pub confusion: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub error_fraction: f64,
    /// Users whose predicted score ties the last selected score, when that
    /// tie straddles the cut; resolved by ascending user id.
    pub tie_group: Vec<String>,
    pub label_rule: String,
}

pub const LABEL_RULE: &str = "actual top: observed fraction >= the ceil(f*U)-th largest observed fraction (nearest rank), observed > 0; predicted top: ceil(f*U) largest predicted fractions, ties by user id";

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("fraction must lie in (0, 1), got {fraction}")))
    }
}

/// Indices sorted by predicted fraction descending, ties by user id.
fn predicted_order(predictions: &[PredictionRecord], posts: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&predictions[a], &predictions[b]);
        (pb.predicted_mean / posts)
            .total_cmp(&(pa.predicted_mean / posts))
            .then_with(|| pa.user_id.cmp(&pb.user_id))
    });
    order
}

/// Actual top responders: observed fraction at or above the k-th largest,
/// excluding users with no responses at all.
fn actual_top(predictions: &[PredictionRecord], posts: f64, k: usize) -> Result<(Vec<bool>, f64)> {
    let mut observed: Vec<f64> = predictions.iter().map(|p| p.observed as f64 / posts).collect();
    observed.sort_by(|a, b| b.total_cmp(a));
    let threshold = observed[k - 1];
    let labels: Vec<bool> = predictions
        .iter()
        .map(|p| p.observed > 0 && p.observed as f64 / posts >= threshold)
        .collect();
    if !labels.iter().any(|&l| l) {
        return Err(Error::Undefined(
            "no user has any observed response; the actual top set is empty".into(),
        ));
    }
    Ok((labels, threshold))
}

fn check_predictions(predictions: &[PredictionRecord], pop: &PopulationParams) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::invalid("no predictions to classify"));
    }
    let posts = pop.advocate_post_count;
    if posts == 0 {
        return Err(Error::invalid("advocate post count must be positive"));
    }
    if let Some(p) = predictions.iter().find(|p| p.observed > posts || !p.predicted_mean.is_finite()) {
        return Err(Error::invalid(format!(
            "prediction for {} is inconsistent with {} advocate posts",
            p.user_id, posts
        )));
    }
    Ok(posts as f64)
}

/// Labels the `ceil(fraction * U)` users with the largest predicted response
/// fraction as predicted top responders and compares with the observed top
/// set.
pub fn classify_top_responders(
    predictions: &[PredictionRecord],
    pop: &PopulationParams,
    fraction: f64,
) -> Result<Classification> {
    check_fraction(fraction)?;
    let posts = check_predictions(predictions, pop)?;
    let users = predictions.len();
    let k = (fraction * users as f64).ceil() as usize;
    if k == 0 {
        return Err(Error::invalid("fraction selects no users"));
    }
    let (actual, threshold) = actual_top(predictions, posts, k)?;
    let order = predicted_order(predictions, posts);
    let mut predicted = vec![false; users];
    for &i in &order[..k] {
        predicted[i] = true;
    }

    let cut_score = predictions[order[k - 1]].predicted_mean / posts;
    let tied: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| predictions[i].predicted_mean / posts == cut_score)
        .collect();
    let tie_group = if tied.iter().any(|&i| !predicted[i]) {
        tied.iter().map(|&i| predictions[i].user_id.clone()).collect()
    } else {
        Vec::new()
    };

    let mut confusion = ConfusionCounts::default();
    let labels = predictions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            match (predicted[i], actual[i]) {
                (true, true) => confusion.true_positive += 1,
                (true, false) => confusion.false_positive += 1,
                (false, true) => confusion.false_negative += 1,
                (false, false) => confusion.true_negative += 1,
            }
            UserLabel {
                user_id: p.user_id.clone(),
                predicted_top: predicted[i],
                actual_top: actual[i],
            }
        })
        .collect();
    Ok(Classification {
        fraction,
        predicted_count: k,
        actual_count: actual.iter().filter(|&&a| a).count(),
        actual_threshold: threshold,
        labels,
        precision: confusion.precision(),
        recall: confusion.recall(),
        error_fraction: confusion.error_fraction(),
        confusion,
        tie_group,
        label_rule: LABEL_RULE.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecallPoint {
    pub k: usize,
    pub recall: f64,
    pub precision: f64,
}

/// Precision and recall of the top-k predicted set for every k = 1..U,
/// against the observed top `fraction` of responders.
pub fn precision_recall_points(
    predictions: &[PredictionRecord],
    pop: &PopulationParams,
    fraction: f64,
) -> Result<Vec<PrecisionRecallPoint>> {
    check_fraction(fraction)?;
    if predictions.len() < 2 {
        return Err(Error::invalid("precision-recall curve needs at least 2 users"));
    }
    let posts = check_predictions(predictions, pop)?;
    let k_actual = (fraction * predictions.len() as f64).ceil() as usize;
    let (actual, _) = actual_top(predictions, posts, k_actual)?;
    let positives = actual.iter().filter(|&&a| a).count() as f64;
    let mut hits = 0usize;
    Ok(predicted_order(predictions, posts)
        .iter()
        .enumerate()
        .map(|(rank, &i)| {
            if actual[i] {
                hits += 1;
            }
            PrecisionRecallPoint {
                k: rank + 1,
                recall: hits as f64 / positives,
                precision: hits as f64 / (rank + 1) as f64,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterestPosterior {
    pub user_id: String,
    pub grid: Vec<f64>,
    pub prior_density: Vec<f64>,
    pub posterior_density: Vec<f64>,
    pub prior_mean: f64,
    pub posterior_mean: f64,
    pub response_scale: f64,
}

fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// `exp(v - max)`, normalized to unit trapezoid integral on `grid`.
fn normalized_from_logs(grid: &[f64], logs: &[f64]) -> Result<Vec<f64>> {
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::Undefined("density vanishes on the whole grid".into()));
    }
    let raw: Vec<f64> = logs.iter().map(|v| (v - top).exp()).collect();
    let total = trapezoid(grid, &raw);
    Ok(raw.into_iter().map(|v| v / total).collect())
}

fn ln_or_neg_inf(count: f64, x: f64) -> f64 {
    if count == 0.0 {
        0.0
    } else {
        count * x.ln()
    }
}

/// Posterior of a user's topic interest on `grid_size` equally spaced points
/// of [0, 1]: prior times the binomial probability of the observed responses
/// with per-post response probability `A * p`.
pub fn posterior_interest(
    user: &UserRecord,
    pop: &PopulationParams,
    params: &ModelParams,
    grid_size: usize,
) -> Result<InterestPosterior> {
    ResponseModel::new(pop, params)?.posterior_interest(user, grid_size)
}

impl ResponseModel {
    pub fn posterior_interest(&self, user: &UserRecord, grid_size: usize) -> Result<InterestPosterior> {
        user.validate(Some(self.population()))?;
        if grid_size < 101 {
            return Err(Error::invalid(format!("grid size must be at least 101, got {grid_size}")));
        }
        if user.stance == Stance::Opponent && user.responses > 0 {
            return Err(Error::invalid(format!(
                "posterior undefined for opponent {} with {} responses",
                user.user_id, user.responses
            )));
        }
        let (m, n) = (user.topic_posts as f64, user.total_posts as f64);
        let big_m = user.responses as f64;
        let big_n = self.population().advocate_post_count as f64;
        let a = self.response_scale(user);
        let grid: Vec<f64> = (0..grid_size).map(|i| i as f64 / (grid_size - 1) as f64).collect();
        let ln_coef = (n + 1.0).ln() + ln_choose(user.total_posts, user.topic_posts);
        let ln_prior: Vec<f64> = grid
            .iter()
            .map(|&p| ln_coef + ln_or_neg_inf(m, p) + ln_or_neg_inf(n - m, 1.0 - p))
            .collect();
        let ln_post: Vec<f64> = grid
            .iter()
            .zip(&ln_prior)
            .map(|(&p, lp)| lp + ln_or_neg_inf(big_m, a * p) + ln_or_neg_inf(big_n - big_m, 1.0 - a * p))
            .collect();
        let prior_density = normalized_from_logs(&grid, &ln_prior)?;
        let posterior_density = normalized_from_logs(&grid, &ln_post)?;
        let mean = |d: &[f64]| {
            let weighted: Vec<f64> = grid.iter().zip(d).map(|(p, v)| p * v).collect();
            trapezoid(&grid, &weighted)
        };
        Ok(InterestPosterior {
            user_id: user.user_id.clone(),
            prior_mean: mean(&prior_density),
            posterior_mean: mean(&posterior_density),
            grid,
            prior_density,
            posterior_density,
            response_scale: a,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pop(posts: u64) -> PopulationParams {
        PopulationParams::new("adv", posts, 1.61).unwrap()
    }

    fn user(id: &str, stance: Stance, m: u64, n: u64, responses: u64) -> UserRecord {
        UserRecord {
            user_id: id.into(),
            posting_rate: 0.8,
            friend_count: 120,
            stance,
            topic_posts: m,
            total_posts: n,
            responses,
        }
    }

    #[test]
    fn prediction_moments_match_mixture_formulas() {
        let pop = pop(60);
        let params = ModelParams::default();
        let model = ResponseModel::new(&pop, &params).unwrap();
        let u = user("a", Stance::Supporter, 3, 9, 2);
        let a = model.response_scale(&u);
        let rec = model.predict(&u).unwrap();
        // p ~ Beta(m+1, n-m+1), M | p ~ Binomial(N, A p)
        let (al, be) = (4.0, 7.0);
        let ep = al / (al + be);
        let ep2 = ep * (al + 1.0) / (al + be + 1.0);
        let n = 60.0;
        let mean = n * a * ep;
        let var = n * a * ep - n * a * a * ep2 + n * n * a * a * (ep2 - ep * ep);
        assert!((rec.predicted_mean - mean).abs() < 1e-9 * mean.max(1.0));
        assert!((rec.predicted_std - var.sqrt()).abs() < 1e-8);
        assert_eq!(rec.abs_error, (rec.predicted_mean - 2.0).abs());

        let opp = model.predict(&user("b", Stance::Opponent, 3, 9, 0)).unwrap();
        assert_eq!(opp.predicted_mean, 0.0);
    }

    #[test]
    fn certain_response_limit() {
        let pop = PopulationParams::new("adv", 50, 1.61).unwrap();
        let params = ModelParams {
            p_act: 1.0,
            ..ModelParams::default()
        };
        let mut u = user("c", Stance::Supporter, 10_000, 10_000, 0);
        u.friend_count = 0;
        let rec = predict_user(&u, &pop, &params).unwrap();
        assert!((rec.predicted_mean - 50.0).abs() < 50.0 * 2e-4, "{}", rec.predicted_mean);
    }

    fn records(pairs: &[(f64, u64)]) -> Vec<PredictionRecord> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(pred, obs))| PredictionRecord::new(format!("u{i:02}"), pred, 1.0, obs))
            .collect()
    }

    #[test]
    fn perfect_ranking_classifies_exactly() {
        let recs = records(&(0..20).map(|i| (i as f64, i as u64 + 1)).collect::<Vec<_>>());
        let c = classify_top_responders(&recs, &pop(100), 0.25).unwrap();
        assert_eq!(c.predicted_count, 5);
        assert_eq!(c.actual_count, 5);
        assert_eq!(c.precision, 1.0);
        assert_eq!(c.recall, 1.0);
        assert_eq!(c.error_fraction, 0.0);
        assert!(c.tie_group.is_empty());
    }

    #[test]
    fn equal_set_sizes_give_equal_precision_and_recall() {
        let recs = records(&[
            (5.0, 1),
            (4.0, 9),
            (3.0, 2),
            (2.0, 8),
            (1.0, 3),
            (0.5, 7),
            (0.2, 4),
            (0.1, 6),
        ]);
        let c = classify_top_responders(&recs, &pop(10), 0.25).unwrap();
        assert_eq!(c.predicted_count, c.actual_count);
        assert_eq!(c.confusion.false_positive, c.confusion.false_negative);
        assert_eq!(c.precision, c.recall);
        assert_eq!(c.confusion.total(), 8);
    }

    #[test]
    fn ties_resolved_by_user_id_and_reported() {
        let recs = records(&[(1.0, 1), (1.0, 2), (1.0, 3), (0.0, 4)]);
        let c = classify_top_responders(&recs, &pop(10), 0.25).unwrap();
        assert_eq!(c.tie_group, vec!["u00", "u01", "u02"]);
        assert!(c.labels[0].predicted_top);
        assert!(!c.labels[1].predicted_top);
    }

    #[test]
    fn classification_errors() {
        let recs = records(&[(1.0, 0), (2.0, 0), (3.0, 0)]);
        assert!(classify_top_responders(&recs, &pop(10), 0.25).is_err());
        let recs = records(&[(1.0, 1), (2.0, 0)]);
        assert!(classify_top_responders(&recs, &pop(10), 0.0).is_err());
        assert!(classify_top_responders(&recs, &pop(10), 1.0).is_err());
        assert!(classify_top_responders(&[], &pop(10), 0.25).is_err());
    }

    #[test]
    fn precision_recall_curve_shape() {
        let recs = records(&(0..12).map(|i| (i as f64, (i + 1) as u64)).collect::<Vec<_>>());
        let pts = precision_recall_points(&recs, &pop(100), 0.25).unwrap();
        assert_eq!(pts.len(), 12);
        for w in pts.windows(2) {
            assert!(w[1].recall >= w[0].recall);
        }
        for p in &pts[..3] {
            assert_eq!(p.precision, 1.0);
        }
        assert_eq!(pts[2].recall, 1.0);
        let last = pts.last().unwrap();
        assert_eq!(last.recall, 1.0);
        assert_eq!(last.precision, 0.25);
    }

    #[test]
    fn posterior_is_normalized_and_flat_likelihood_keeps_prior() {
        let pop = pop(391);
        let silent = ModelParams {
            p_act: 0.0,
            ..ModelParams::default()
        };
        let u = user("d", Stance::Supporter, 3, 5, 0);
        let post = posterior_interest(&u, &pop, &silent, 1001).unwrap();
        assert_eq!(post.response_scale, 0.0);
        for (a, b) in post.prior_density.iter().zip(&post.posterior_density) {
            assert!((a - b).abs() < 1e-12);
        }
        let params = ModelParams::default();
        let post = posterior_interest(&user("e", Stance::Supporter, 3, 5, 3), &pop, &params, 1001).unwrap();
        assert!((trapezoid(&post.grid, &post.posterior_density) - 1.0).abs() < 1e-6);
        assert!((trapezoid(&post.grid, &post.prior_density) - 1.0).abs() < 1e-6);
        // Beta(4, 3) mean
        assert!((post.prior_mean - 4.0 / 7.0).abs() < 1e-5);
        assert!(post.posterior_density.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn posterior_mean_grows_with_responses() {
        let pop = pop(100);
        let params = ModelParams::default();
        let mut last = 0.0;
        for responses in 0..15 {
            let post =
                posterior_interest(&user("f", Stance::Neutral, 2, 8, responses), &pop, &params, 401).unwrap();
            assert!(post.posterior_mean >= last - 1e-12);
            last = post.posterior_mean;
        }
    }

    #[test]
    fn posterior_rejects_bad_requests() {
        let pop = pop(100);
        let params = ModelParams::default();
        assert!(posterior_interest(&user("g", Stance::Opponent, 2, 8, 1), &pop, &params, 201).is_err());
        let opp = posterior_interest(&user("g", Stance::Opponent, 2, 8, 0), &pop, &params, 201).unwrap();
        assert_eq!(opp.prior_density, opp.posterior_density);
        assert!(posterior_interest(&user("h", Stance::Supporter, 2, 8, 1), &pop, &params, 100).is_err());
    }
}
