//! Probability laws for how a follower sees and responds to advocate posts.
//!
//! A post lands in the follower's feed and is buried under `L` newer posts by
//! the time of the follower's next visit (a geometric law in the ratio of
//! receive rate to visit rate). The follower scrolls a random number of items
//! drawn from a discretized inverse Gaussian ("law of surfing"). A seen post is
//! reposted with probability `P_topic * p_act`, where `P_topic` carries a beta
//! prior built from the follower's own topical posting history. Integrating
//! over that prior gives a closed-form distribution of the response count `M`
//! out of the advocate's `N` posts.

mod response;
mod special;
mod surfing;
mod visibility;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use response::{
    ln_likelihood_factor, log_likelihood, marginal_response_pmf, response_distribution,
    response_pmf, topic_prior_density, ResponseModel,
};
pub use special::{hyp2f1_terminating, ln_choose, ln_hyp2f1_terminating};
pub use surfing::{p_view, surfing_stop_pmf, SurfingLaw, SURFING_TAIL_TOLERANCE};
pub use visibility::{
    list_position_pmf, p_visible, receive_rate, visit_rate, DerivedUserRates,
    GEOMETRIC_TAIL_TOLERANCE,
};

/// Stance of a follower relative to the advocate's position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Supporter,
    Opponent,
    Neutral,
}

impl Stance {
    pub fn as_str(self) -> &'static str {
        match self {
            Stance::Supporter => "supporter",
            Stance::Opponent => "opponent",
            Stance::Neutral => "neutral",
        }
    }
}

impl std::str::FromStr for Stance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "supporter" => Ok(Stance::Supporter),
            "opponent" => Ok(Stance::Opponent),
            "neutral" => Ok(Stance::Neutral),
            other => Err(Error::invalid(format!(
                "unknown stance {other:?} (expected supporter, opponent or neutral)"
            ))),
        }
    }
}

impl std::fmt::Display for Stance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One follower's observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    /// Posts per day.
    pub posting_rate: f64,
    pub friend_count: u64,
    pub stance: Stance,
    /// Posts on the campaign topic (`m`).
    pub topic_posts: u64,
    /// All posts in the observation window (`n`).
    pub total_posts: u64,
    /// Advocate posts reposted (`M`).
    pub responses: u64,
}

impl UserRecord {
    /// Checks the record-level invariants, plus `responses <= N` when a
    /// population is supplied.
    pub fn validate(&self, pop: Option<&PopulationParams>) -> Result<()> {
        if !(self.posting_rate.is_finite() && self.posting_rate >= 0.0) {
            return Err(Error::invalid(format!(
                "user {}: posting_rate must be a finite nonnegative number, got {}",
                self.user_id, self.posting_rate
            )));
        }
        if self.topic_posts > self.total_posts {
            return Err(Error::invalid(format!(
                "user {}: topic_posts ({}) exceeds total_posts ({})",
                self.user_id, self.topic_posts, self.total_posts
            )));
        }
        if let Some(pop) = pop {
            if self.responses > pop.advocate_post_count {
                return Err(Error::invalid(format!(
                    "user {}: responses ({}) exceeds the advocate post count ({})",
                    self.user_id, self.responses, pop.advocate_post_count
                )));
            }
        }
        Ok(())
    }
}

/// Per-advocate constants shared by every follower in a population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationParams {
    pub advocate_id: String,
    /// Number of advocate posts (`N`).
    pub advocate_post_count: u64,
    /// Median posting rate of the followers' friends, posts per day.
    pub typical_friend_rate: f64,
}

impl PopulationParams {
    pub fn new(
        advocate_id: impl Into<String>,
        advocate_post_count: u64,
        typical_friend_rate: f64,
    ) -> Result<Self> {
        let pop = Self {
            advocate_id: advocate_id.into(),
            advocate_post_count,
            typical_friend_rate,
        };
        pop.validate()?;
        Ok(pop)
    }

    pub fn validate(&self) -> Result<()> {
        if self.advocate_post_count == 0 {
            return Err(Error::invalid("advocate_post_count must be at least 1"));
        }
        if !(self.typical_friend_rate.is_finite() && self.typical_friend_rate > 0.0) {
            return Err(Error::invalid(format!(
                "typical_friend_rate must be positive, got {}",
                self.typical_friend_rate
            )));
        }
        Ok(())
    }
}

/// Global model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Mean number of items viewed per visit.
    pub mu: f64,
    /// Shape of the inverse Gaussian surfing law.
    pub lambda: f64,
    /// Site visits per post written.
    pub views_per_post: f64,
    /// Response probability of an interested supporter who saw the post.
    pub p_act: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            mu: 14.0,
            lambda: 14.0,
            views_per_post: 38.0,
            p_act: 0.12,
        }
    }
}

impl ModelParams {
    pub fn new(mu: f64, lambda: f64, views_per_post: f64, p_act: f64) -> Result<Self> {
        let p = Self {
            mu,
            lambda,
            views_per_post,
            p_act,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::domain(format!("{name} must be positive, got {v}")))
            }
        };
        positive("mu", self.mu)?;
        positive("lambda", self.lambda)?;
        positive("views_per_post", self.views_per_post)?;
        if !(0.0..=1.0).contains(&self.p_act) {
            return Err(Error::domain(format!(
                "p_act must lie in [0, 1], got {}",
                self.p_act
            )));
        }
        Ok(())
    }
}

/// Probability mass over `M = 0..=N` responses for one user.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseDistribution {
    pub pmf: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
}

impl ResponseDistribution {
    pub fn from_pmf(pmf: Vec<f64>) -> Self {
        let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let var: f64 = pmf
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - mean).powi(2) * p)
            .sum();
        Self {
            pmf,
            mean,
            std_dev: var.max(0.0).sqrt(),
        }
    }
}
