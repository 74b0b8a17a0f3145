//! Two-sided Fisher exact test for 2x2 tables.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::model::ln_choose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherResult {
    pub p_value: f64,
    /// A row or column total is zero; the test is uninformative and p = 1.
    pub zero_margin: bool,
}

/// Sums the hypergeometric probabilities of all tables with the observed
/// margins that are no more likely than the observed table.
pub fn fisher_exact(table: [[u64; 2]; 2]) -> FisherResult {
    let [[a, b], [c, d]] = table;
    let (r1, r2) = (a + b, c + d);
    let (c1, c2) = (a + c, b + d);
    if r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0 {
        warn!("Fisher exact test on a table with a zero margin; p set to 1");
        return FisherResult {
            p_value: 1.0,
            zero_margin: true,
        };
    }
    let n = r1 + r2;
    let ln_total = ln_choose(n, c1);
    let ln_p = |x: u64| ln_choose(r1, x) + ln_choose(r2, c1 - x) - ln_total;
    let observed = ln_p(a);
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    // relative slack absorbs rounding between mathematically equal tables
    let cutoff = observed + 1e-7;
    let p: f64 = (lo..=hi)
        .map(ln_p)
        .filter(|&v| v <= cutoff)
        .map(f64::exp)
        .sum();
    FisherResult {
        p_value: p.min(1.0),
        zero_margin: false,
    }
}
