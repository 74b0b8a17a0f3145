//! Topic-interest prior and the closed-form response-count distribution.

use rayon::prelude::*;

use super::special::{ln_choose, ln_hyp2f1_terminating};
use super::surfing::SurfingLaw;
use super::visibility::DerivedUserRates;
use super::{ModelParams, PopulationParams, ResponseDistribution, Stance, UserRecord};
use crate::error::{Error, Result};

/// Beta-shaped density of a user's topic interest given `m` of `n` posts on
/// topic: `(n+1) C(n,m) p^m (1-p)^(n-m)`.
pub fn topic_prior_density(p: f64, m: u64, n: u64) -> Result<f64> {
    if m > n {
        return Err(Error::domain(format!("topic posts {m} exceed total posts {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("p must lie in [0, 1], got {p}")));
    }
    let ln_coef = ((n + 1) as f64).ln() + ln_choose(n, m);
    let ln_p = if m == 0 { 0.0 } else { m as f64 * p.ln() };
    let ln_q = if m == n {
        0.0
    } else {
        (n - m) as f64 * (-p).ln_1p()
    };
    Ok((ln_coef + ln_p + ln_q).exp())
}

/// Parameter-dependent factor `ln[A^M 2F1(m+M+1, M-N; M+n+2; A)]` of the
/// response probability. `-inf` when `A = 0` and `M > 0`.
pub fn ln_likelihood_factor(responses: u64, m: u64, n: u64, posts: u64, a: f64) -> Result<f64> {
    check_counts(responses, m, n, posts)?;
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::domain(format!("response scale must lie in [0, 1], got {a}")));
    }
    if a == 0.0 {
        return Ok(if responses == 0 { 0.0 } else { f64::NEG_INFINITY });
    }
    let big_m = responses as f64;
    let ln_f = ln_hyp2f1_terminating(
        (m + responses + 1) as f64,
        big_m - posts as f64,
        (responses + n + 2) as f64,
        a,
    )?;
    Ok(big_m * a.ln() + ln_f)
}

fn check_counts(responses: u64, m: u64, n: u64, posts: u64) -> Result<()> {
    if m > n {
        return Err(Error::domain(format!("topic posts {m} exceed total posts {n}")));
    }
    if responses > posts {
        return Err(Error::domain(format!(
            "response count {responses} outside 0..={posts}"
        )));
    }
    Ok(())
}

/// `P(M)` for a user with `m` of `n` posts on topic, `N` advocate posts and
/// response scale `A = p_visible * p_act`:
/// `C(M+m, m) C(N, M) / C(M+n+1, M) * A^M * 2F1(m+M+1, M-N; M+n+2; A)`.
pub fn marginal_response_pmf(responses: u64, m: u64, n: u64, posts: u64, a: f64) -> Result<f64> {
    let ln_factor = ln_likelihood_factor(responses, m, n, posts, a)?;
    if ln_factor == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let ln_coef = ln_choose(responses + m, m) + ln_choose(posts, responses)
        - ln_choose(responses + n + 1, responses);
    Ok((ln_coef + ln_factor).exp())
}

/// Model evaluation for one population and parameter set. Holds the
/// discretized surfing law so it is built once.
#[derive(Debug, Clone)]
pub struct ResponseModel {
    pop: PopulationParams,
    params: ModelParams,
    law: SurfingLaw,
}

impl ResponseModel {
    pub fn new(pop: &PopulationParams, params: &ModelParams) -> Result<Self> {
        pop.validate()?;
        params.validate()?;
        Ok(Self {
            pop: pop.clone(),
            params: *params,
            law: SurfingLaw::new(params.mu, params.lambda)?,
        })
    }

    pub fn population(&self) -> &PopulationParams {
        &self.pop
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn surfing_law(&self) -> &SurfingLaw {
        &self.law
    }

    pub fn rates(&self, user: &UserRecord) -> DerivedUserRates {
        self.law.user_rates(user, &self.pop, self.params.views_per_post)
    }

    /// `A = p_visible * p_act`, with `p_act = 0` for opponents. Neutral
    /// users share the supporters' `p_act`.
    pub fn response_scale(&self, user: &UserRecord) -> f64 {
        match user.stance {
            Stance::Opponent => 0.0,
            Stance::Supporter | Stance::Neutral => {
                (self.rates(user).p_visible * self.params.p_act).clamp(0.0, 1.0)
            }
        }
    }

    pub fn response_pmf(&self, responses: u64, user: &UserRecord) -> Result<f64> {
        marginal_response_pmf(
            responses,
            user.topic_posts,
            user.total_posts,
            self.pop.advocate_post_count,
            self.response_scale(user),
        )
    }

    pub fn response_distribution(&self, user: &UserRecord) -> Result<ResponseDistribution> {
        let a = self.response_scale(user);
        let posts = self.pop.advocate_post_count;
        let pmf = (0..=posts)
            .map(|k| marginal_response_pmf(k, user.topic_posts, user.total_posts, posts, a))
            .collect::<Result<Vec<_>>>()?;
        Ok(ResponseDistribution::from_pmf(pmf))
    }

    /// Per-user `ln L(u)` terms, in input order.
    pub fn log_likelihood_terms(&self, users: &[UserRecord]) -> Result<Vec<f64>> {
        let posts = self.pop.advocate_post_count;
        users
            .par_iter()
            .map(|u| {
                ln_likelihood_factor(
                    u.responses,
                    u.topic_posts,
                    u.total_posts,
                    posts,
                    self.response_scale(u),
                )
            })
            .collect()
    }

    /// `sum_u ln L(u)` over the parameter-dependent factors. Users with zero
    /// likelihood are reported by id instead of yielding `-inf`.
    pub fn log_likelihood(&self, users: &[UserRecord]) -> Result<f64> {
        if users.is_empty() {
            return Err(Error::invalid("log-likelihood needs at least one user"));
        }
        let terms = self.log_likelihood_terms(users)?;
        let zero: Vec<String> = users
            .iter()
            .zip(&terms)
            .filter(|(_, t)| **t == f64::NEG_INFINITY)
            .map(|(u, _)| u.user_id.clone())
            .collect();
        if !zero.is_empty() {
            return Err(Error::ZeroLikelihood(zero));
        }
        // Sequential sum keeps the result independent of thread scheduling.
        Ok(terms.iter().sum())
    }
}

pub fn response_pmf(
    responses: u64,
    user: &UserRecord,
    pop: &PopulationParams,
    params: &ModelParams,
) -> Result<f64> {
    ResponseModel::new(pop, params)?.response_pmf(responses, user)
}

pub fn response_distribution(
    user: &UserRecord,
    pop: &PopulationParams,
    params: &ModelParams,
) -> Result<ResponseDistribution> {
    ResponseModel::new(pop, params)?.response_distribution(user)
}

pub fn log_likelihood(
    users: &[UserRecord],
    pop: &PopulationParams,
    params: &ModelParams,
) -> Result<f64> {
    ResponseModel::new(pop, params)?.log_likelihood(users)
}
