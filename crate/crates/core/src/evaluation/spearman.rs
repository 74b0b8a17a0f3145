//! Spearman rank correlation and the paired bootstrap for comparing two
//! dependent correlations.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::rng::{streams, substream};

/// Largest sample size whose p-value is computed by full enumeration.
pub const EXACT_PERMUTATION_MAX_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    ExactPermutation,
    StudentT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpearmanResult {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
    pub method: PValueMethod,
}

/// Mid-ranks (1-based), ties sharing the average of their positions.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
    }
}

fn check_pair(x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < min {
        return Err(Error::invalid(format!("need at least {min} pairs, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("values must be finite"));
    }
    Ok(())
}

fn rho_of_ranks(rx: &[f64], ry: &[f64]) -> Result<f64> {
    pearson(rx, ry).ok_or_else(|| Error::Undefined("rank correlation of a constant vector".into()))
}

/// Two-sided share of all `n!` rearrangements of `ry` whose correlation with
/// `rx` is at least as extreme as the observed one.
fn exact_p_value(rx: &[f64], ry: &[f64], rho: f64) -> f64 {
    let mut perm = ry.to_vec();
    let n = perm.len();
    let mut count = 0u64;
    let mut total = 0u64;
    let mut tally = |p: &[f64]| {
        total += 1;
        if let Some(r) = pearson(rx, p) {
            if r.abs() >= rho.abs() - 1e-12 {
                count += 1;
            }
        }
    };
    // Heap's algorithm
    let mut c = vec![0usize; n];
    tally(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            tally(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    count as f64 / total as f64
}

fn t_p_value(rho: f64, n: usize) -> f64 {
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// Spearman's rho with mid-rank ties. The two-sided p-value is exact by
/// enumeration for n <= 8 and from the t approximation otherwise.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<SpearmanResult> {
    check_pair(x, y, 3)?;
    let rx = mid_ranks(x);
    let ry = mid_ranks(y);
    let rho = rho_of_ranks(&rx, &ry)?;
    let n = x.len();
    let (p_value, method) = if n <= EXACT_PERMUTATION_MAX_N {
        (exact_p_value(&rx, &ry, rho), PValueMethod::ExactPermutation)
    } else {
        (t_p_value(rho, n), PValueMethod::StudentT)
    };
    Ok(SpearmanResult {
        rho,
        p_value,
        n,
        method,
    })
}

fn spearman_value(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&mid_ranks(x), &mid_ranks(y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationDifference {
    pub rho_first: f64,
    pub rho_second: f64,
    pub difference: f64,
    pub p_value: f64,
    pub resamples: usize,
    /// Resamples where either correlation was undefined (constant resample).
    pub skipped_resamples: usize,
    pub seed: u64,
    pub method: String,
}

/// Paired bootstrap over users for `rho(x, y1) - rho(x, y2)`. Resample `b`
/// draws from its own substream of `seed`, so the result does not depend on
/// thread scheduling. Two-sided p-value: twice the smaller tail share of
/// bootstrap differences at or beyond zero.
pub fn correlation_difference_test(
    x: &[f64],
    y1: &[f64],
    y2: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<CorrelationDifference> {
    check_pair(x, y1, 10)?;
    check_pair(x, y2, 10)?;
    if resamples == 0 {
        return Err(Error::invalid("resample count must be positive"));
    }
    let rho_first = spearman_value(x, y1).ok_or_else(|| Error::Undefined("first correlation is undefined".into()))?;
    let rho_second =
        spearman_value(x, y2).ok_or_else(|| Error::Undefined("second correlation is undefined".into()))?;
    let n = x.len();
    let diffs: Vec<Option<f64>> = (0..resamples as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b, streams::BOOTSTRAP);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
            let a: Vec<f64> = idx.iter().map(|&i| y1[i]).collect();
            let c: Vec<f64> = idx.iter().map(|&i| y2[i]).collect();
            Some(spearman_value(&xs, &a)? - spearman_value(&xs, &c)?)
        })
        .collect();
    let valid: Vec<f64> = diffs.into_iter().flatten().collect();
    if valid.is_empty() {
        return Err(Error::Undefined("every bootstrap resample was degenerate".into()));
    }
    let total = valid.len() as f64;
    let below = valid.iter().filter(|&&d| d <= 0.0).count() as f64 / total;
    let above = valid.iter().filter(|&&d| d >= 0.0).count() as f64 / total;
    Ok(CorrelationDifference {
        rho_first,
        rho_second,
        difference: rho_first - rho_second,
        p_value: (2.0 * below.min(above)).min(1.0),
        resamples,
        skipped_resamples: resamples - valid.len(),
        seed,
        method: "paired bootstrap over users, two-sided percentile p-value".into(),
    })
}
