//! The "law of surfing": how many feed items a user examines before stopping.

use crate::error::{Error, Result};

/// Discrete support is cut where the remaining mass falls below this fraction.
pub const SURFING_TAIL_TOLERANCE: f64 = 1e-14;

const MAX_SUPPORT: u64 = 50_000_000;

/// Inverse Gaussian density with mean `mu` and shape `lambda`, evaluated at
/// the item count `m_items`.
pub fn surfing_stop_pmf(m_items: u64, mu: f64, lambda: f64) -> Result<f64> {
    if m_items < 1 {
        return Err(Error::domain("item count must be at least 1"));
    }
    check_params(mu, lambda)?;
    Ok(density(m_items as f64, mu, lambda))
}

fn check_params(mu: f64, lambda: f64) -> Result<()> {
    if !(mu.is_finite() && mu > 0.0 && lambda.is_finite() && lambda > 0.0) {
        return Err(Error::domain(format!(
            "surfing parameters must be positive (mu = {mu}, lambda = {lambda})"
        )));
    }
    Ok(())
}

fn density(m: f64, mu: f64, lambda: f64) -> f64 {
    let exponent = -lambda * (m - mu).powi(2) / (2.0 * m * mu * mu);
    exponent.exp() * (lambda / (2.0 * std::f64::consts::PI * m.powi(3))).sqrt()
}

/// The surfing law discretized to integer item counts `m >= 1`.
///
/// The density is evaluated at each integer and normalized over a support
/// `1..=support_max` chosen so the dropped tail is below
/// [`SURFING_TAIL_TOLERANCE`] of the retained mass.
#[derive(Debug, Clone)]
pub struct SurfingLaw {
    mu: f64,
    lambda: f64,
    /// `pmf[m - 1]` for `m` in `1..=support_max`.
    pmf: Vec<f64>,
    /// `tail[l]` = P(items > l) for `l` in `0..support_max`.
    tail: Vec<f64>,
}

impl SurfingLaw {
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        check_params(mu, lambda)?;
        let decay = (-lambda / (2.0 * mu * mu)).exp();
        // Past m = lambda/3 every successive ratio f(m+1)/f(m) is below
        // `decay`, so the tail beyond m is bounded by f(m+1) / (1 - decay).
        let bound_from = (lambda / 3.0).max(mu).max(1.0);
        let mut weights = Vec::new();
        let mut total = 0.0;
        let mut m = 1u64;
        loop {
            let w = density(m as f64, mu, lambda);
            weights.push(w);
            total += w;
            if m as f64 >= bound_from {
                let next = density((m + 1) as f64, mu, lambda);
                if next / (1.0 - decay) <= SURFING_TAIL_TOLERANCE * total {
                    break;
                }
            }
            m += 1;
            if m > MAX_SUPPORT {
                return Err(Error::domain(format!(
                    "surfing law with mu = {mu}, lambda = {lambda} needs more than {MAX_SUPPORT} items"
                )));
            }
        }
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::domain(format!(
                "surfing law with mu = {mu}, lambda = {lambda} has no mass on integer items"
            )));
        }

        // Accumulate from the smallest terms upward; tail[0] is then exactly 1.
        let n = weights.len();
        let mut tail = vec![0.0; n];
        let mut acc = 0.0;
        for l in (0..n).rev() {
            acc += weights[l];
            tail[l] = acc;
        }
        let z = tail[0];
        for t in &mut tail {
            *t /= z;
        }
        let pmf = weights.into_iter().map(|w| w / z).collect();
        Ok(Self {
            mu,
            lambda,
            pmf,
            tail,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Largest item count with retained mass.
    pub fn support_max(&self) -> u64 {
        self.pmf.len() as u64
    }

    /// Normalized probability of viewing exactly `m` items.
    pub fn pmf(&self, m: u64) -> f64 {
        if m == 0 {
            return 0.0;
        }
        self.pmf.get((m - 1) as usize).copied().unwrap_or(0.0)
    }

    /// Probability of viewing more than `newer_posts` items, i.e. reaching a
    /// post that sits below `newer_posts` newer ones.
    pub fn p_view(&self, newer_posts: u64) -> f64 {
        usize::try_from(newer_posts)
            .ok()
            .and_then(|l| self.tail.get(l))
            .copied()
            .unwrap_or(0.0)
    }

    pub(crate) fn tail(&self) -> &[f64] {
        &self.tail
    }
}

/// Probability a user views a post with `newer_posts` newer items above it.
/// Builds the discretized law on each call; reuse a [`SurfingLaw`] in loops.
pub fn p_view(newer_posts: u64, mu: f64, lambda: f64) -> Result<f64> {
    Ok(SurfingLaw::new(mu, lambda)?.p_view(newer_posts))
}
