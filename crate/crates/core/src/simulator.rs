//! Seeded generative oracle for the model.
//!
//! Two levels are simulated. [`simulate_responses`] draws feed positions from
//! the geometric law directly and mirrors the model post by post.
//! [`simulate_event_stream`] runs the underlying receive and visit Poisson
//! processes in continuous time, which checks the geometric law itself.

use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution, Exp, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, PopulationParams, ResponseModel, Stance, UserRecord};
use crate::rng::{self, streams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogNormalLaw {
    /// Mean of the log.
    pub location: f64,
    /// Standard deviation of the log.
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaLaw {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaLaw {
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StanceMix {
    pub supporter: f64,
    pub opponent: f64,
    pub neutral: f64,
}

/// Shape of a synthetic follower population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PopulationConfig {
    pub user_count: usize,
    /// Posts per day.
    pub posting_rate_law: LogNormalLaw,
    /// Rounded to the nearest integer, at least 1.
    pub friend_count_law: LogNormalLaw,
    /// Law of each user's true topic interest.
    pub topic_fraction_law: BetaLaw,
    pub stance_mix: StanceMix,
    /// Window over which a user's own posts are counted;
    /// `n ~ Poisson(posting_rate * observation_days)`.
    pub observation_days: f64,
    pub advocate_post_count: u64,
    pub typical_friend_rate: f64,
    pub seed: u64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            user_count: 500,
            posting_rate_law: LogNormalLaw {
                location: 0.6_f64.ln(),
                scale: 0.9,
            },
            friend_count_law: LogNormalLaw {
                location: 300_f64.ln(),
                scale: 0.9,
            },
            topic_fraction_law: BetaLaw {
                alpha: 1.0,
                beta: 1.0,
            },
            stance_mix: StanceMix {
                supporter: 0.8,
                opponent: 0.1,
                neutral: 0.1,
            },
            observation_days: 30.0,
            advocate_post_count: 400,
            typical_friend_rate: 1.61,
            seed: 1,
        }
    }
}

impl PopulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.user_count == 0 {
            return Err(Error::invalid("user_count must be positive"));
        }
        for (name, law) in [
            ("posting_rate_law", self.posting_rate_law),
            ("friend_count_law", self.friend_count_law),
        ] {
            if !(law.location.is_finite() && law.scale.is_finite() && law.scale > 0.0) {
                return Err(Error::invalid(format!("{name}: scale must be positive")));
            }
        }
        let b = self.topic_fraction_law;
        if !(b.alpha.is_finite() && b.alpha > 0.0 && b.beta.is_finite() && b.beta > 0.0) {
            return Err(Error::invalid("topic_fraction_law: alpha and beta must be positive"));
        }
        let mix = self.stance_mix;
        let parts = [mix.supporter, mix.opponent, mix.neutral];
        if parts.iter().any(|p| !(p.is_finite() && *p >= 0.0))
            || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::invalid("stance_mix proportions must be nonnegative and sum to 1"));
        }
        if !(self.observation_days.is_finite() && self.observation_days > 0.0) {
            return Err(Error::invalid("observation_days must be positive"));
        }
        self.population()?;
        Ok(())
    }

    pub fn population(&self) -> Result<PopulationParams> {
        PopulationParams::new("simulated", self.advocate_post_count, self.typical_friend_rate)
    }
}

/// Users with their hidden topic interest, in generation order.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPopulation {
    pub pop: PopulationParams,
    pub users: Vec<UserRecord>,
    pub true_p_topic: Vec<f64>,
}

/// Ground truth behind one simulated user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub user_id: String,
    pub true_p_topic: f64,
    pub true_p_visible: f64,
    pub responses: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub records: Vec<TruthRecord>,
}

impl SimTrace {
    /// Copies the simulated response counts into the user records.
    pub fn apply(&self, users: &mut [UserRecord]) {
        for (u, r) in users.iter_mut().zip(&self.records) {
            debug_assert_eq!(u.user_id, r.user_id);
            u.responses = r.responses;
        }
    }
}

fn invalid_law(e: impl std::fmt::Display) -> Error {
    Error::invalid(format!("distribution parameters: {e}"))
}

/// Draws users with `responses = 0`; see [`simulate_responses`] for `M`.
pub fn generate_population(config: &PopulationConfig) -> Result<GeneratedPopulation> {
    config.validate()?;
    let pop = config.population()?;
    let rate_law = LogNormal::new(config.posting_rate_law.location, config.posting_rate_law.scale)
        .map_err(invalid_law)?;
    let friend_law = LogNormal::new(config.friend_count_law.location, config.friend_count_law.scale)
        .map_err(invalid_law)?;
    let topic_law = Beta::new(config.topic_fraction_law.alpha, config.topic_fraction_law.beta)
        .map_err(invalid_law)?;
    let width = config.user_count.to_string().len();

    let mut users = Vec::with_capacity(config.user_count);
    let mut truths = Vec::with_capacity(config.user_count);
    for i in 0..config.user_count {
        let mut rng = rng::substream(config.seed, i as u64, streams::POPULATION);
        let posting_rate: f64 = rate_law.sample(&mut rng);
        let friend_count = (friend_law.sample(&mut rng).round() as u64).max(1);
        let p_topic: f64 = topic_law.sample(&mut rng);
        let u: f64 = rng.random();
        let mix = config.stance_mix;
        let stance = if u < mix.supporter {
            Stance::Supporter
        } else if u < mix.supporter + mix.opponent {
            Stance::Opponent
        } else {
            Stance::Neutral
        };
        let expected_posts = posting_rate * config.observation_days;
        let total_posts = if expected_posts > 0.0 {
            Poisson::new(expected_posts).map_err(invalid_law)?.sample(&mut rng) as u64
        } else {
            0
        };
        let topic_posts = Binomial::new(total_posts, p_topic)
            .map_err(invalid_law)?
            .sample(&mut rng);
        users.push(UserRecord {
            user_id: format!("u{i:0width$}"),
            posting_rate,
            friend_count,
            stance,
            topic_posts,
            total_posts,
            responses: 0,
        });
        truths.push(p_topic);
    }
    Ok(GeneratedPopulation {
        pop,
        users,
        true_p_topic: truths,
    })
}

/// One advocate post against one user: position drawn from the geometric
/// law, viewed with probability `p_view(L)`, reposted with probability
/// `p_topic * p_act` once seen. Returns true on a response.
#[inline]
fn simulate_post<R: Rng>(rng: &mut R, ln_q: Option<f64>, model: &ResponseModel, interest: f64) -> bool {
    let position = match ln_q {
        None => 0,
        // P(L >= l) = q^l, inverted.
        Some(ln_q) => {
            let u: f64 = 1.0 - rng.random::<f64>();
            (u.ln() / ln_q).floor() as u64
        }
    };
    if rng.random::<f64>() >= model.surfing_law().p_view(position) {
        return false;
    }
    rng.random::<f64>() < interest
}

fn ln_q_for(rho: f64) -> Option<f64> {
    if rho > 0.0 {
        Some((rho / (1.0 + rho)).ln())
    } else {
        None
    }
}

fn responses_for_user<R: Rng>(
    rng: &mut R,
    model: &ResponseModel,
    user: &UserRecord,
    p_topic: f64,
) -> (u64, f64) {
    let rates = model.rates(user);
    let p_act = match user.stance {
        Stance::Opponent => 0.0,
        _ => model.params().p_act,
    };
    if rates.zero_visit_rate || p_act == 0.0 {
        return (0, rates.p_visible);
    }
    let ln_q = ln_q_for(rates.rho);
    let interest = p_topic * p_act;
    let count = (0..model.population().advocate_post_count)
        .filter(|_| simulate_post(rng, ln_q, model, interest))
        .count() as u64;
    (count, rates.p_visible)
}

/// Simulates every user's response count from their true topic interest.
/// Each user draws from a stream keyed by `(seed, user_id)` and consumes it
/// post by post, so results do not depend on user order.
pub fn simulate_responses(
    users: &[UserRecord],
    true_p_topic: &[f64],
    params: &ModelParams,
    pop: &PopulationParams,
    seed: u64,
) -> Result<SimTrace> {
    if users.len() != true_p_topic.len() {
        return Err(Error::invalid("one true interest value is needed per user"));
    }
    let model = ResponseModel::new(pop, params)?;
    let records = users
        .iter()
        .zip(true_p_topic)
        .map(|(user, &p_topic)| {
            let mut rng = rng::user_stream(seed, &user.user_id, streams::RESPONSES);
            let (responses, p_visible) = responses_for_user(&mut rng, &model, user, p_topic);
            TruthRecord {
                user_id: user.user_id.clone(),
                true_p_topic: p_topic,
                true_p_visible: p_visible,
                responses,
            }
        })
        .collect();
    Ok(SimTrace { records })
}

/// Replicates one user's response count, drawing a fresh topic interest from
/// the user's beta prior for every replicate. The empirical law of the
/// returned counts converges to the closed-form response distribution.
pub fn simulate_user_replicates(
    user: &UserRecord,
    pop: &PopulationParams,
    params: &ModelParams,
    replicates: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    let model = ResponseModel::new(pop, params)?;
    let prior = Beta::new(
        (user.topic_posts + 1) as f64,
        (user.total_posts - user.topic_posts.min(user.total_posts) + 1) as f64,
    )
    .map_err(invalid_law)?;
    let user_key = rng::fnv1a64(user.user_id.as_bytes());
    Ok((0..replicates)
        .map(|r| {
            let mut rng = rng::substream(seed ^ user_key, r as u64, streams::REPLICATES);
            let p_topic = prior.sample(&mut rng);
            responses_for_user(&mut rng, &model, user, p_topic).0
        })
        .collect())
}

/// Empirical law of the number of newer posts above an advocate post at the
/// user's next visit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventStreamSummary {
    pub rho: f64,
    /// `counts[l]` = advocate posts found below exactly `l` newer posts.
    pub counts: Vec<u64>,
    pub samples: u64,
    pub visits: u64,
    pub receives: u64,
}

impl EventStreamSummary {
    pub fn empirical_pmf(&self) -> Vec<f64> {
        let n = self.samples.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn mean(&self) -> f64 {
        let n = self.samples.max(1) as f64;
        self.counts
            .iter()
            .enumerate()
            .map(|(l, &c)| l as f64 * c as f64)
            .sum::<f64>()
            / n
    }

    pub fn variance(&self) -> f64 {
        let n = self.samples.max(1) as f64;
        let mean = self.mean();
        self.counts
            .iter()
            .enumerate()
            .map(|(l, &c)| (l as f64 - mean).powi(2) * c as f64)
            .sum::<f64>()
            / n
    }
}

/// Continuous-time simulation of the two competing Poisson processes: posts
/// arrive in the feed at the receive rate and the user visits at the visit
/// rate. The advocate is one of the user's friends, so each received post is
/// the advocate's with probability `1 / friend_count`. For every advocate
/// post, the number of posts received after it up to the next visit is
/// recorded. Posts still waiting for a visit at the end are discarded.
pub fn simulate_event_stream(
    user: &UserRecord,
    params: &ModelParams,
    pop: &PopulationParams,
    duration_days: f64,
    seed: u64,
) -> Result<EventStreamSummary> {
    params.validate()?;
    let receive = crate::model::receive_rate(user.friend_count, pop.typical_friend_rate);
    let visit = crate::model::visit_rate(user.posting_rate, params.views_per_post);
    if !(receive > 0.0 && visit > 0.0) {
        return Err(Error::invalid(format!(
            "event simulation needs positive receive and visit rates (got {receive}, {visit})"
        )));
    }
    if !(duration_days.is_finite() && visit * duration_days >= 1e4) {
        return Err(Error::invalid(format!(
            "duration {duration_days} days gives fewer than 10^4 expected visits"
        )));
    }
    let total_rate = receive + visit;
    let p_receive = receive / total_rate;
    let p_advocate = 1.0 / user.friend_count as f64;
    let gap = Exp::new(total_rate).map_err(invalid_law)?;
    let mut rng = rng::user_stream(seed, &user.user_id, streams::EVENTS);

    let mut counts: Vec<u64> = Vec::new();
    let mut pending: Vec<u64> = Vec::new();
    let (mut received, mut visits, mut samples) = (0u64, 0u64, 0u64);
    let mut t = 0.0;
    loop {
        t += gap.sample(&mut rng);
        if t > duration_days {
            break;
        }
        if rng.random::<f64>() < p_receive {
            received += 1;
            if rng.random::<f64>() < p_advocate {
                pending.push(received);
            }
        } else {
            visits += 1;
            for arrived in pending.drain(..) {
                let newer = (received - arrived) as usize;
                if counts.len() <= newer {
                    counts.resize(newer + 1, 0);
                }
                counts[newer] += 1;
                samples += 1;
            }
        }
    }
    Ok(EventStreamSummary {
        rho: receive / visit,
        counts,
        samples,
        visits,
        receives: received,
    })
}
