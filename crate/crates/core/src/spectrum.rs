//! Information-density spectrum by Monte Carlo, and the variance and
//! Chebyshev bounds behind the strong converse.
//!
//! The density of a block is measured against the capacity-achieving output
//! law `P_Ȳ`:
//!
//! ```text
//! i(xⁿ; yⁿ) = (1/n) Σ_i log₂ W(y_i|x_i) / P_Ȳ(y_i)
//! ```
//!
//! Counts above the solver's truncation point use the lumped tail mass of
//! `P_Ȳ` in place of `P_Ȳ(y)`; such symbols are counted and reported.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::{CapacityResult, InputDistribution, OutputDistribution};
use crate::channel::{kl_output, Channel, LOG2_E};
use crate::error::{invalid, Error, Result};
use crate::stats::{quantile, stream_rng, Proportion};
use crate::tables::{InputSampler, SymbolTables};

/// Confidence level of every reported tail interval.
pub const CONFIDENCE: f64 = 0.99;

/// Lower and upper quantile levels used as finite-n proxies of the spectral
/// inf- and sup-information rates.
pub const QUANTILE_PROXY: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    /// Blocklength.
    pub n: usize,
    pub num_samples: usize,
    pub seed: u64,
    /// Deviation above capacity at which the tail is measured.
    pub nu: f64,
}

impl SpectrumConfig {
    pub fn new(n: usize, num_samples: usize, seed: u64, nu: f64) -> Result<Self> {
        let config = Self { n, num_samples, seed, nu };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("blocklength must be >= 1"));
        }
        if self.num_samples == 0 {
            return Err(invalid("need at least one sample"));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(invalid(format!("nu must be finite and > 0, got {}", self.nu)));
        }
        Ok(())
    }
}

/// Information density of one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockDensity {
    pub rate_bits: f64,
    /// Symbols whose output fell above the truncation point.
    pub tail_symbols: usize,
}

/// `(1/n) Σ_i [log₂ W(y_i|x_i) − log₂ P_Ȳ(y_i)]`.
pub fn info_density_rate<C: Channel>(
    x_seq: &[f64],
    y_seq: &[u64],
    channel: &C,
    output: &OutputDistribution,
) -> Result<BlockDensity> {
    if x_seq.is_empty() || x_seq.len() != y_seq.len() {
        return Err(invalid(format!(
            "input and output sequences must be nonempty and of equal length, got {} and {}",
            x_seq.len(),
            y_seq.len()
        )));
    }
    let ln_tail = output.tail_mass().max(f64::MIN_POSITIVE).ln();
    let mut total = 0.0;
    let mut tail_symbols = 0;
    for (&x, &y) in x_seq.iter().zip(y_seq) {
        let channel_term = channel.log_pmf(x, y)?;
        let out_term = match output.prob(y) {
            Some(p) => p.log2(),
            None => {
                tail_symbols += 1;
                ln_tail * LOG2_E
            }
        };
        total += channel_term - out_term;
    }
    Ok(BlockDensity { rate_bits: total / x_seq.len() as f64, tail_symbols })
}

/// `log₂(e) (λ0 + p_max)² / λ0`, the bound on `E[i(Ȳ; x)²]` for any
/// `x ∈ [0, p_max]`.
pub fn second_moment_bound(lambda0: f64, p_max: f64) -> Result<f64> {
    if !(p_max.is_finite() && p_max >= 0.0) {
        return Err(invalid(format!("p_max must be finite and >= 0, got {p_max}")));
    }
    if lambda0 == 0.0 {
        return Err(Error::UnsupportedBound("the second-moment bound divides by the dark current, which is 0".into()));
    }
    if !(lambda0.is_finite() && lambda0 > 0.0) {
        return Err(invalid(format!("dark current must be finite and > 0, got {lambda0}")));
    }
    Ok(LOG2_E * (lambda0 + p_max).powi(2) / lambda0)
}

/// `min(1, second_moment_bound / (n ν²))`: Chebyshev's bound on
/// `Pr{i(Xⁿ; Yⁿ) ≥ C + ν}`.
pub fn chebyshev_tail_bound(n: usize, nu: f64, lambda0: f64, p_max: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("blocklength must be >= 1"));
    }
    if !(nu.is_finite() && nu > 0.0) {
        return Err(invalid(format!("nu must be finite and > 0, got {nu}")));
    }
    Ok((second_moment_bound(lambda0, p_max)? / (n as f64 * nu * nu)).min(1.0))
}

/// Conditional-mean check at one input level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMean {
    /// `D(W(·|x) ‖ P_Ȳ)` in bits.
    pub value: f64,
    /// `C + μ(x − p_avg) + gap`.
    pub bound: f64,
    pub bound_ok: bool,
}

/// `E[i(Ȳ; x)] = D(W(·|x) ‖ P_Ȳ)` compared against the capacity, adjusted by
/// the multiplier and widened by the certificate gap.
pub fn conditional_mean_check<C: Channel>(x: f64, optimal: &CapacityResult, channel: &C) -> Result<ConditionalMean> {
    let c = &optimal.constraints;
    if !(x.is_finite() && (0.0..=c.p_max).contains(&x)) {
        return Err(invalid(format!("x must lie in [0, {}], got {x}", c.p_max)));
    }
    let output = optimal.output_law(channel);
    let value = kl_output(channel, x, &output)?.bits;
    let bound = optimal.capacity_bits + optimal.multiplier * (x - c.effective_avg()) + optimal.gap().max(0.0);
    Ok(ConditionalMean { value, bound, bound_ok: value <= bound })
}

/// Monte Carlo `E[i(Ȳ; x)²]` over `samples` draws of `Ȳ ~ W(·|x)`.
pub fn second_moment_at<C: Channel>(
    x: f64,
    channel: &C,
    output: &OutputDistribution,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(invalid(format!("x must be finite and >= 0, got {x}")));
    }
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let tables = SymbolTables::new(channel, &[x], output);
    let squares: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(seed, s);
            let y = tables.sample_output(channel, 0, &mut rng);
            let d = tables.density(channel, 0, y).0;
            d * d
        })
        .collect();
    Ok(squares.iter().sum::<f64>() / samples as f64)
}

/// Per-sample block densities, in sample order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSamples {
    pub rates: Vec<f64>,
    /// Per-sample mean of `(i(y_i; x_i) − D(W(·|x_i) ‖ P_Ȳ))²`.
    pub centered_squares: Vec<f64>,
    pub tail_symbols: u64,
}

/// Draws `num_samples` blocks with `X_i ~ dist` i.i.d. and `Y_i ~ W(·|X_i)`.
///
/// Sample `s` uses its own generator stream, so any prefix of the output is
/// the same whatever the total sample count or thread count.
pub fn sample_rates<C: Channel>(
    dist: &InputDistribution,
    channel: &C,
    output: &OutputDistribution,
    config: &SpectrumConfig,
) -> Result<SpectrumSamples> {
    config.validate()?;
    let tables = SymbolTables::new(channel, dist.points(), output);
    let inputs = InputSampler::new(dist.masses());
    let means: Vec<f64> = (0..dist.len())
        .map(|j| {
            let w = tables.prob_row(j);
            let covered: f64 = w.iter().zip(tables.density_row(j)).filter(|(p, _)| **p > 0.0).map(|(p, d)| p * d).sum();
            covered / tables.covered_mass(j).max(f64::MIN_POSITIVE)
        })
        .collect();
    let n = config.n;
    let per_sample: Vec<(f64, f64, u64)> = (0..config.num_samples as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(config.seed, s);
            let (mut sum, mut sq, mut tail) = (0.0, 0.0, 0u64);
            for _ in 0..n {
                let j = inputs.sample(&mut rng);
                let y = tables.sample_output(channel, j, &mut rng);
                let (d, in_tail) = tables.density(channel, j, y);
                sum += d;
                sq += (d - means[j]) * (d - means[j]);
                tail += in_tail as u64;
            }
            (sum / n as f64, sq / n as f64, tail)
        })
        .collect();
    Ok(SpectrumSamples {
        rates: per_sample.iter().map(|s| s.0).collect(),
        centered_squares: per_sample.iter().map(|s| s.1).collect(),
        tail_symbols: per_sample.iter().map(|s| s.2).sum(),
    })
}

/// Summary of a spectrum run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub n: usize,
    pub nu: f64,
    pub capacity_bits: f64,
    /// `C + ν`.
    pub threshold_bits: f64,
    pub empirical_mean: f64,
    pub standard_error: f64,
    /// Per-symbol second moment of the density about its conditional mean
    /// given the input.
    pub empirical_second_moment: f64,
    /// Sample variance of the block rate.
    pub empirical_variance: f64,
    /// `Pr{rate ≥ C + ν}` with a 99% Clopper–Pearson interval.
    pub tail: Proportion,
    /// Absent when the analytic bounds do not apply to the channel.
    pub chebyshev_bound: Option<f64>,
    pub second_moment_bound: Option<f64>,
    /// Upper interval edge of the tail at or below the Chebyshev bound.
    pub bound_dominated: Option<bool>,
    /// Empirical `10⁻³` quantile of the rate (finite-n inf-rate proxy).
    pub lower_quantile: f64,
    /// Empirical `1 − 10⁻³` quantile of the rate (finite-n sup-rate proxy).
    pub upper_quantile: f64,
    pub tail_bucket_symbols: u64,
    pub samples_retained: usize,
}

impl SpectrumEstimate {
    /// Summarizes `samples` drawn with `config` against capacity `capacity_bits`.
    /// `bounds` is `(λ0, p_max)` when the analytic bounds apply.
    pub fn from_samples(
        samples: &SpectrumSamples,
        config: &SpectrumConfig,
        capacity_bits: f64,
        bounds: Option<(f64, f64)>,
    ) -> Result<Self> {
        let rates = &samples.rates;
        let count = rates.len();
        if count == 0 {
            return Err(invalid("no samples"));
        }
        let mean = rates.iter().sum::<f64>() / count as f64;
        let variance =
            if count > 1 { rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (count - 1) as f64 } else { 0.0 };
        let threshold = capacity_bits + config.nu;
        let hits = rates.iter().filter(|&&r| r >= threshold).count() as u64;
        let tail = Proportion::new(hits, count as u64, CONFIDENCE)?;
        let (chebyshev_bound, second_moment) = match bounds {
            Some((lambda0, p_max)) => (
                Some(chebyshev_tail_bound(config.n, config.nu, lambda0, p_max)?),
                Some(second_moment_bound(lambda0, p_max)?),
            ),
            None => (None, None),
        };
        let mut sorted = rates.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            n: config.n,
            nu: config.nu,
            capacity_bits,
            threshold_bits: threshold,
            empirical_mean: mean,
            standard_error: (variance / count as f64).sqrt(),
            empirical_second_moment: samples.centered_squares.iter().sum::<f64>() / count as f64,
            empirical_variance: variance,
            tail,
            chebyshev_bound,
            second_moment_bound: second_moment,
            bound_dominated: chebyshev_bound.map(|b| tail.interval.upper <= b),
            lower_quantile: quantile(&sorted, QUANTILE_PROXY),
            upper_quantile: quantile(&sorted, 1.0 - QUANTILE_PROXY),
            tail_bucket_symbols: samples.tail_symbols,
            samples_retained: count,
        })
    }
}

/// Samples the spectrum of `dist` against the optimal output law of
/// `optimal` and summarizes it. The bounds are reported when the channel has
/// a single positive dark current.
pub fn sample_spectrum<C: Channel>(
    dist: &InputDistribution,
    channel: &C,
    optimal: &CapacityResult,
    config: &SpectrumConfig,
) -> Result<SpectrumEstimate> {
    let output = optimal.output_law(channel);
    let samples = sample_rates(dist, channel, &output, config)?;
    let bounds = channel.bound_dark_current().ok().map(|l| (l, optimal.constraints.p_max));
    SpectrumEstimate::from_samples(&samples, config, optimal.capacity_bits, bounds)
}
