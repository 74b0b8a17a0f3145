//! Log binomials and the terminating Gauss hypergeometric series.

use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};

/// `ln C(n, k)`; `-inf` when `k > n`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn terminating_order(b: f64) -> Result<u64> {
    if !(b.is_finite() && b <= 0.0 && b.fract() == 0.0) {
        return Err(Error::domain(format!(
            "hypergeometric series with b = {b} does not terminate (b must be a nonpositive integer)"
        )));
    }
    Ok((-b) as u64)
}

fn check_args(a: f64, c: f64, z: f64, order: u64) -> Result<()> {
    if !(a.is_finite() && c.is_finite()) {
        return Err(Error::domain("hypergeometric parameters must be finite"));
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::domain(format!("z must lie in [0, 1], got {z}")));
    }
    // (c)_k vanishes for some k <= order when c is a nonpositive integer > -order.
    if c <= 0.0 && c.fract() == 0.0 && (-c) < order as f64 {
        return Err(Error::domain(format!(
            "c = {c} makes the series undefined for b = -{order}"
        )));
    }
    Ok(())
}

/// `2F1(a, b; c; z)` for a nonpositive integer `b` and `z` in `[0, 1]`.
///
/// When `c > 0` and `c - a > 0` the series is rewritten with the Pfaff
/// transformation `(1-z)^{-b} 2F1(c-a, b; c; z/(z-1))`, whose terms all share
/// one sign, so no cancellation occurs. Otherwise the direct series is summed
/// by term recursion with compensated addition.
pub fn hyp2f1_terminating(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let order = terminating_order(b)?;
    check_args(a, c, z, order)?;
    if order == 0 || z == 0.0 {
        return Ok(1.0);
    }
    if c > 0.0 && c - a > 0.0 {
        return Ok(ln_positive_series(a, order, c, z).exp());
    }
    Ok(direct_series(a, b, c, z, order))
}

/// Natural log of `2F1(a, b; c; z)` on the branch where the Pfaff-transformed
/// series has only positive terms (`c > 0`, `c - a > 0`). Stays finite where
/// the value itself under- or overflows an `f64`.
pub fn ln_hyp2f1_terminating(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let order = terminating_order(b)?;
    check_args(a, c, z, order)?;
    if order == 0 || z == 0.0 {
        return Ok(0.0);
    }
    if !(c > 0.0 && c - a > 0.0) {
        return Err(Error::domain(format!(
            "log form needs c > 0 and c - a > 0 (a = {a}, c = {c})"
        )));
    }
    Ok(ln_positive_series(a, order, c, z))
}

/// `ln[(1-z)^K * sum_k (c-a)_k / (c)_k * C(K, k) * (z/(1-z))^k]`, with the
/// Chu-Vandermonde value `(c-a)_K / (c)_K` at `z = 1`.
fn ln_positive_series(a: f64, order: u64, c: f64, z: f64) -> f64 {
    let d = c - a;
    if z == 1.0 {
        return (0..order)
            .map(|j| ((d + j as f64) / (c + j as f64)).ln())
            .sum();
    }
    let ratio = z / (1.0 - z);
    let k_max = order as f64;
    const RESCALE: f64 = 1e200;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut ln_scale = 0.0_f64;
    for k in 0..order {
        let kf = k as f64;
        term *= (d + kf) / (c + kf) * (k_max - kf) / (kf + 1.0) * ratio;
        sum += term;
        if sum > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            ln_scale += RESCALE.ln();
        }
    }
    k_max * (-z).ln_1p() + sum.ln() + ln_scale
}

fn direct_series(a: f64, b: f64, c: f64, z: f64, order: u64) -> f64 {
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut comp = 0.0_f64;
    for k in 0..order {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        // Neumaier summation
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
