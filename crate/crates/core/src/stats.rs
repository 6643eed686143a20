//! Seed splitting and binomial confidence intervals.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::inv_beta_reg;

use crate::error::{invalid, Result};

/// Generator for item `index` of a run seeded with `master`.
///
/// Every index owns its own ChaCha stream, so results do not depend on how
/// the work is chunked or how many threads run it.
pub fn stream_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Independent master seed for sub-experiment `tag` (SplitMix64 finalizer).
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A two-sided interval for a binomial proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }
}

/// Exact (Clopper–Pearson) interval for `successes` out of `trials` at the
/// given confidence level.
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> Result<Interval> {
    if trials == 0 || successes > trials {
        return Err(invalid(format!("need 0 <= successes <= trials and trials >= 1, got {successes}/{trials}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid(format!("confidence must lie in (0,1), got {confidence}")));
    }
    let alpha = 1.0 - confidence;
    let (k, n) = (successes as f64, trials as f64);
    let lower = if successes == 0 { 0.0 } else { inv_beta_reg(k, n - k + 1.0, alpha / 2.0) };
    let upper = if successes == trials { 1.0 } else { inv_beta_reg(k + 1.0, n - k, 1.0 - alpha / 2.0) };
    Ok(Interval { lower, upper })
}

/// Binomial proportion with its confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub interval: Interval,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64, confidence: f64) -> Result<Self> {
        let interval = clopper_pearson(successes, trials, confidence)?;
        Ok(Self { successes, trials, estimate: successes as f64 / trials as f64, interval })
    }
}

/// Empirical quantile by linear interpolation between order statistics.
/// `sorted` must be ascending and nonempty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn interval_edges() {
        let i = clopper_pearson(0, 10, 0.95).unwrap();
        assert_eq!(i.lower, 0.0);
        // 1 − (α/2)^{1/n}
        assert!((i.upper - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-12);
        let i = clopper_pearson(10, 10, 0.95).unwrap();
        assert_eq!(i.upper, 1.0);
        assert!((i.lower - 0.025f64.powf(0.1)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_counts() {
        assert!(clopper_pearson(3, 2, 0.99).is_err());
        assert!(clopper_pearson(0, 0, 0.99).is_err());
        assert!(clopper_pearson(1, 2, 1.0).is_err());
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = stream_rng(7, 0).random();
        let b: u64 = stream_rng(7, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, stream_rng(7, 0).random::<u64>());
        assert_ne!(derive_seed(7, 0), derive_seed(7, 1));
    }

    #[test]
    fn quantile_interpolates() {
        let v = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile(&v, 0.0), 0.0);
        assert_eq!(quantile(&v, 1.0), 3.0);
        assert!((quantile(&v, 0.5) - 1.5).abs() < 1e-15);
    }
}
