//! Feed position and visibility of an advocate post.

use serde::Serialize;

use super::surfing::SurfingLaw;
use super::{ModelParams, PopulationParams, UserRecord};
use crate::error::{Error, Result};

/// The visibility sum stops once the unvisited geometric mass is below this.
pub const GEOMETRIC_TAIL_TOLERANCE: f64 = 1e-12;

/// Rate at which a user receives posts from friends, posts per day.
pub fn receive_rate(friend_count: u64, typical_friend_rate: f64) -> f64 {
    friend_count as f64 * typical_friend_rate
}

/// Site visits per day, proportional to the user's own posting rate.
pub fn visit_rate(posting_rate: f64, views_per_post: f64) -> f64 {
    views_per_post * posting_rate
}

/// Probability that exactly `newer_posts` posts arrive between the advocate's
/// post and the user's next visit, with `rho` = receive rate / visit rate.
pub fn list_position_pmf(newer_posts: u64, rho: f64) -> Result<f64> {
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::domain(format!("rho must be finite and >= 0, got {rho}")));
    }
    if rho == 0.0 {
        return Ok(if newer_posts == 0 { 1.0 } else { 0.0 });
    }
    let ln_q = (rho / (1.0 + rho)).ln();
    Ok((newer_posts as f64 * ln_q - rho.ln_1p()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedUserRates {
    pub receive_rate: f64,
    pub visit_rate: f64,
    /// `receive_rate / visit_rate`; infinite when the user never visits.
    pub rho: f64,
    pub p_visible: f64,
    /// Set when the visit rate is zero and visibility was defined as 0.
    pub zero_visit_rate: bool,
}

impl SurfingLaw {
    /// `sum_L P(L | rho) * p_view(L)`, truncated once the remaining
    /// geometric mass drops below [`GEOMETRIC_TAIL_TOLERANCE`] or the surfing
    /// support is exhausted (beyond it `p_view` is zero).
    pub fn p_visible_for_rho(&self, rho: f64) -> f64 {
        if rho == 0.0 {
            return 1.0;
        }
        if !rho.is_finite() {
            return 0.0;
        }
        let q = rho / (1.0 + rho);
        let mut weight = 1.0 / (1.0 + rho);
        // remaining = q^(L+1), the mass of all positions beyond L
        let mut remaining = q;
        let mut sum = 0.0;
        for &view in self.tail() {
            sum += weight * view;
            if remaining < GEOMETRIC_TAIL_TOLERANCE {
                break;
            }
            weight *= q;
            remaining *= q;
        }
        sum.clamp(0.0, 1.0)
    }

    pub fn user_rates(
        &self,
        user: &UserRecord,
        pop: &PopulationParams,
        views_per_post: f64,
    ) -> DerivedUserRates {
        let receive = receive_rate(user.friend_count, pop.typical_friend_rate);
        let visit = visit_rate(user.posting_rate, views_per_post);
        if visit <= 0.0 {
            return DerivedUserRates {
                receive_rate: receive,
                visit_rate: visit,
                rho: f64::INFINITY,
                p_visible: 0.0,
                zero_visit_rate: true,
            };
        }
        let rho = receive / visit;
        DerivedUserRates {
            receive_rate: receive,
            visit_rate: visit,
            rho,
            p_visible: self.p_visible_for_rho(rho),
            zero_visit_rate: false,
        }
    }
}

/// Visibility of an advocate post for one user, with the intermediate rates.
/// A user with zero posting rate is flagged and gets visibility 0.
pub fn p_visible(
    user: &UserRecord,
    pop: &PopulationParams,
    params: &ModelParams,
) -> Result<DerivedUserRates> {
    params.validate()?;
    let law = SurfingLaw::new(params.mu, params.lambda)?;
    Ok(law.user_rates(user, pop, params.views_per_post))
}
