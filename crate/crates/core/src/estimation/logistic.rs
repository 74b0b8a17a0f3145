//! Logistic-regression baseline: response probability per advocate post as a
//! logistic function of the log posting rate.

use log::warn;
use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PopulationParams, UserRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub beta0: f64,
    pub beta1: f64,
    /// Standard errors of `(beta0, beta1)` from the inverse Fisher information.
    pub standard_errors: [f64; 2],
    pub log_likelihood: f64,
    pub iterations: usize,
    pub users_used: usize,
    /// Users skipped because their posting rate is zero.
    pub excluded_users: Vec<String>,
}

impl LogisticFit {
    pub fn probability(&self, posting_rate: f64) -> f64 {
        sigmoid(self.beta0 + self.beta1 * posting_rate.ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticPrediction {
    pub expected_responses: f64,
    /// Posting rate was zero; the log is undefined and the prediction is 0.
    pub zero_posting_rate: bool,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

struct Outcome {
    x: f64,
    successes: f64,
    trials: f64,
}

fn log_likelihood(b: &Vector2<f64>, data: &[Outcome]) -> f64 {
    data.iter()
        .map(|o| {
            let eta = b[0] + b[1] * o.x;
            o.successes * eta - o.trials * softplus(eta)
        })
        .sum()
}

/// Complete or quasi-complete separation of binomial outcomes on one
/// covariate: every response lies on one side of a threshold in `x` and every
/// non-response on the other.
fn separated(data: &[Outcome]) -> bool {
    let mut with_success = (f64::INFINITY, f64::NEG_INFINITY);
    let mut with_failure = (f64::INFINITY, f64::NEG_INFINITY);
    for o in data {
        if o.successes > 0.0 {
            with_success = (with_success.0.min(o.x), with_success.1.max(o.x));
        }
        if o.successes < o.trials {
            with_failure = (with_failure.0.min(o.x), with_failure.1.max(o.x));
        }
    }
    with_success.0 == f64::INFINITY
        || with_failure.0 == f64::INFINITY
        || with_failure.1 <= with_success.0
        || with_success.1 <= with_failure.0
}

/// Maximum-likelihood fit by Newton-Raphson (IRLS) on per-user binomial
/// counts: `responses` successes out of the advocate's post count.
pub fn fit_logistic(users: &[UserRecord], pop: &PopulationParams) -> Result<LogisticFit> {
    pop.validate()?;
    let trials = pop.advocate_post_count as f64;
    let mut excluded = Vec::new();
    let mut data = Vec::with_capacity(users.len());
    for u in users {
        u.validate(Some(pop))?;
        if u.posting_rate <= 0.0 {
            warn!("logistic fit skips user {} with zero posting rate", u.user_id);
            excluded.push(u.user_id.clone());
            continue;
        }
        data.push(Outcome {
            x: u.posting_rate.ln(),
            successes: u.responses as f64,
            trials,
        });
    }
    if data.is_empty() {
        return Err(Error::EmptyPopulation {
            excluded: excluded.len(),
        });
    }
    if separated(&data) {
        let total: f64 = data.iter().map(|o| o.successes).sum();
        let detail = if total == 0.0 {
            "no responses at all; the intercept diverges to -infinity".to_string()
        } else if data.iter().all(|o| o.successes == o.trials) {
            "every post was responded to; the intercept diverges to +infinity".to_string()
        } else {
            "responses are perfectly separated by log posting rate".to_string()
        };
        return Err(Error::Separation(detail));
    }

    let total_s: f64 = data.iter().map(|o| o.successes).sum();
    let total_n: f64 = data.iter().map(|o| o.trials).sum();
    let p0 = total_s / total_n;
    let mut b = Vector2::new((p0 / (1.0 - p0)).ln(), 0.0);
    let mut ll = log_likelihood(&b, &data);
    let mut iterations = 0;
    let info = loop {
        iterations += 1;
        let mut score = Vector2::zeros();
        let mut info = Matrix2::zeros();
        for o in &data {
            let p = sigmoid(b[0] + b[1] * o.x);
            let r = o.successes - o.trials * p;
            let w = o.trials * p * (1.0 - p);
            score += Vector2::new(r, r * o.x);
            info += Matrix2::new(w, w * o.x, w * o.x, w * o.x * o.x);
        }
        let step = info
            .cholesky()
            .ok_or_else(|| Error::Separation("information matrix is singular (no spread in posting rate?)".into()))?
            .solve(&score);
        let mut scale = 1.0;
        let mut next = b + step;
        let mut next_ll = log_likelihood(&next, &data);
        while next_ll < ll - 1e-12 && scale > 1e-6 {
            scale *= 0.5;
            next = b + step * scale;
            next_ll = log_likelihood(&next, &data);
        }
        let change = (next - b).abs().max();
        b = next;
        ll = next_ll;
        if !(b[0].is_finite() && b[1].is_finite()) || b.abs().max() > 1e4 {
            return Err(Error::Separation("coefficients diverged".into()));
        }
        if change < 1e-10 {
            break info;
        }
        if iterations >= 100 {
            return Err(Error::Separation("Newton iterations did not converge".into()));
        }
    };
    let cov = info
        .try_inverse()
        .ok_or_else(|| Error::Separation("information matrix is singular".into()))?;
    let se = [cov[(0, 0)].sqrt(), cov[(1, 1)].sqrt()];
    if !(se[0] > 0.0 && se[1] > 0.0 && se[0].is_finite() && se[1].is_finite()) {
        return Err(Error::Separation("standard errors are not finite".into()));
    }
    Ok(LogisticFit {
        beta0: b[0],
        beta1: b[1],
        standard_errors: se,
        log_likelihood: ll,
        iterations,
        users_used: data.len(),
        excluded_users: excluded,
    })
}

/// Expected responses `N * P_respond(u)`.
pub fn logistic_predict(user: &UserRecord, fit: &LogisticFit, pop: &PopulationParams) -> LogisticPrediction {
    if user.posting_rate <= 0.0 {
        warn!("user {} has zero posting rate; logistic prediction set to 0", user.user_id);
        return LogisticPrediction {
            expected_responses: 0.0,
            zero_posting_rate: true,
        };
    }
    LogisticPrediction {
        expected_responses: pop.advocate_post_count as f64 * fit.probability(user.posting_rate),
        zero_posting_rate: false,
    }
}
