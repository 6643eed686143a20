//! Discrete-time Poisson channel laws.
//!
//! A channel maps a nonnegative input level `x` (molecules released per slot)
//! to a count `Y ~ Poisson(x + λ0)`, where `λ0` is the dark current. The
//! state-dependent channel draws `λ0` i.i.d. per slot; when neither side knows
//! the state, the relevant law is the prior-weighted mixture.
//!
//! All public information quantities are in bits. Internally everything is
//! accumulated in natural log and converted at the boundary.

use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::capacity::OutputDistribution;
use crate::error::{invalid, Error, Result};

pub const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Default discarded tail mass per symbol.
pub const DEFAULT_EPSILON: f64 = 1e-12;

const LN_FACTORIAL_TABLE: usize = 1024;

/// Mean above which sampling switches from inverse CDF to rejection.
const INVERSE_CDF_MAX_MEAN: f64 = 30.0;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_TABLE);
        let mut acc = 0.0f64;
        t.push(0.0);
        for k in 1..LN_FACTORIAL_TABLE {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(y!)`.
pub fn ln_factorial(y: u64) -> f64 {
    let table = ln_factorial_table();
    if (y as usize) < table.len() {
        table[y as usize]
    } else {
        statrs::function::gamma::ln_gamma(y as f64 + 1.0)
    }
}

/// Natural-log Poisson pmf with mean `mean`; `-inf` where the mass is zero.
pub fn ln_poisson(mean: f64, y: u64) -> f64 {
    if mean == 0.0 {
        return if y == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -mean + y as f64 * mean.ln() - ln_factorial(y)
}

fn check_input(x: f64) -> Result<()> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(invalid(format!("channel input must be finite and >= 0, got {x}")));
    }
    Ok(())
}

fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean == 0.0 {
        return 0;
    }
    if mean <= INVERSE_CDF_MAX_MEAN {
        let u: f64 = rng.random();
        let mut y = 0u64;
        let mut p = (-mean).exp();
        let mut cum = p;
        while u >= cum {
            y += 1;
            p *= mean / y as f64;
            if p == 0.0 {
                break;
            }
            cum += p;
        }
        y
    } else {
        let dist = rand_distr::Poisson::new(mean).expect("mean is positive and finite");
        dist.sample(rng) as u64
    }
}

/// A conditional law `W(y|x)` on the nonnegative integers, `x ≥ 0`.
///
/// Implementors supply the unchecked natural-log kernel; the checked,
/// base-2 and sampling entry points are provided.
pub trait Channel: Send + Sync {
    /// `ln W(y|x)`, `-inf` where the mass is zero. `x ≥ 0` is assumed.
    fn ln_prob(&self, x: f64, y: u64) -> f64;

    /// Largest dark current among components; fixes the tail at a given peak.
    fn max_dark_current(&self) -> f64;

    /// `λ0` entering the analytic concentration bounds, when they apply.
    fn bound_dark_current(&self) -> Result<f64>;

    /// Draw one output for input `x` from a caller-owned generator.
    fn sample_with<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> u64;

    /// `ln W(y|x)` for `y = 0..=y_max`, written into `out`.
    fn ln_prob_row(&self, x: f64, y_max: u64, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..=y_max).map(|y| self.ln_prob(x, y)));
    }

    fn pmf(&self, x: f64, y: u64) -> Result<f64> {
        check_input(x)?;
        Ok(self.ln_prob(x, y).exp())
    }

    /// `log₂ W(y|x)`.
    fn log_pmf(&self, x: f64, y: u64) -> Result<f64> {
        check_input(x)?;
        let lp = self.ln_prob(x, y);
        if lp == f64::NEG_INFINITY {
            return Err(Error::SupportViolation { x, y });
        }
        Ok(lp * LOG2_E)
    }

    /// One draw, deterministic in `seed`.
    fn sample(&self, x: f64, seed: u64) -> Result<u64> {
        check_input(x)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(self.sample_with(x, &mut rng))
    }

    /// Output cutoff for inputs in `[0, p_max]`.
    fn truncation(&self, p_max: f64, epsilon: f64) -> Result<TruncationPolicy> {
        TruncationPolicy::new(self.max_dark_current() + p_max, epsilon)
    }
}

/// `W(y|x) = exp(-(x+λ0)) (x+λ0)^y / y!`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonChannel {
    dark_current: f64,
}

impl PoissonChannel {
    pub fn new(dark_current: f64) -> Result<Self> {
        if !(dark_current.is_finite() && dark_current >= 0.0) {
            return Err(invalid(format!("dark current must be finite and >= 0, got {dark_current}")));
        }
        Ok(Self { dark_current })
    }

    pub fn dark_current(&self) -> f64 {
        self.dark_current
    }

    pub fn mean(&self, x: f64) -> f64 {
        x + self.dark_current
    }
}

impl Channel for PoissonChannel {
    fn ln_prob(&self, x: f64, y: u64) -> f64 {
        ln_poisson(x + self.dark_current, y)
    }

    fn max_dark_current(&self) -> f64 {
        self.dark_current
    }

    fn bound_dark_current(&self) -> Result<f64> {
        if self.dark_current > 0.0 {
            Ok(self.dark_current)
        } else {
            Err(Error::UnsupportedBound(
                "second-moment and Chebyshev bounds divide by the dark current; λ0 = 0 is unsupported".into(),
            ))
        }
    }

    fn sample_with<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> u64 {
        sample_poisson(x + self.dark_current, rng)
    }

    fn ln_prob_row(&self, x: f64, y_max: u64, out: &mut Vec<f64>) {
        out.clear();
        let mean = x + self.dark_current;
        if mean == 0.0 {
            out.push(0.0);
            out.extend((1..=y_max).map(|_| f64::NEG_INFINITY));
            return;
        }
        let ln_mean = mean.ln();
        out.extend((0..=y_max).map(|y| -mean + y as f64 * ln_mean - ln_factorial(y)));
    }
}

fn check_weights(weights: impl Iterator<Item = f64>, what: &str) -> Result<()> {
    let mut total = 0.0;
    let mut count = 0usize;
    for w in weights {
        if !(w.is_finite() && w >= 0.0) {
            return Err(invalid(format!("{what} weight must be finite and >= 0, got {w}")));
        }
        total += w;
        count += 1;
    }
    if count == 0 {
        return Err(invalid(format!("{what} needs at least one component")));
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("{what} weights must sum to 1, got {total}")));
    }
    Ok(())
}

/// Per-slot i.i.d. state `S ~ P_S`; in state `s` the channel is a Poisson law
/// with its own dark current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDependentChannel {
    states: Vec<(f64, PoissonChannel)>,
}

impl StateDependentChannel {
    pub fn new(states: Vec<(f64, PoissonChannel)>) -> Result<Self> {
        check_weights(states.iter().map(|s| s.0), "state")?;
        Ok(Self { states })
    }

    pub fn states(&self) -> &[(f64, PoissonChannel)] {
        &self.states
    }

    pub fn average(&self) -> MixtureChannel {
        MixtureChannel { components: self.states.clone() }
    }
}

/// Channel seen by a receiver that knows neither the state nor its realization:
/// `W^a(y|x) = Σ_s P_S(s) W_S(y|x,s)`.
pub fn average_channel(sdc: &StateDependentChannel) -> MixtureChannel {
    sdc.average()
}

/// Finite mixture of Poisson channels sharing the same input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureChannel {
    components: Vec<(f64, PoissonChannel)>,
}

impl MixtureChannel {
    pub fn new(components: Vec<(f64, PoissonChannel)>) -> Result<Self> {
        check_weights(components.iter().map(|c| c.0), "mixture")?;
        Ok(Self { components })
    }

    pub fn components(&self) -> &[(f64, PoissonChannel)] {
        &self.components
    }
}

impl Channel for MixtureChannel {
    fn ln_prob(&self, x: f64, y: u64) -> f64 {
        let terms = self.components.iter().filter(|(w, _)| *w > 0.0).map(|(w, ch)| w.ln() + ch.ln_prob(x, y));
        log_sum_exp(terms)
    }

    fn max_dark_current(&self) -> f64 {
        self.components.iter().filter(|(w, _)| *w > 0.0).map(|(_, ch)| ch.dark_current).fold(0.0, f64::max)
    }

    fn bound_dark_current(&self) -> Result<f64> {
        let active: Vec<_> = self.components.iter().filter(|(w, _)| *w > 0.0).collect();
        match active.as_slice() {
            [(_, ch)] => ch.bound_dark_current(),
            _ => Err(Error::UnsupportedBound(
                "concentration bounds are derived for a single Poisson law, not a mixture".into(),
            )),
        }
    }

    fn sample_with<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut chosen = self.components.last().map(|c| c.1).expect("non-empty");
        for (w, ch) in &self.components {
            cum += w;
            if u < cum {
                chosen = *ch;
                break;
            }
        }
        chosen.sample_with(x, rng)
    }
}

pub(crate) fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Certified output cutoff: `Pr{Y > y_max}` is at most `epsilon` for every
/// input in `[0, p_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub epsilon: f64,
    pub y_max: u64,
    /// Mean at which the cutoff was certified (largest dark current + peak).
    pub max_mean: f64,
}

impl TruncationPolicy {
    pub fn new(max_mean: f64, epsilon: f64) -> Result<Self> {
        let y_max = truncation_point(max_mean, epsilon)?;
        Ok(Self { epsilon, y_max, max_mean })
    }
}

/// Smallest `m` with `Σ_{y>m} Poisson(mean)(y) ≤ epsilon`.
///
/// Tails are accumulated from far beyond the bulk downwards so they never
/// suffer the cancellation of `1 - CDF`.
pub fn truncation_point(mean: f64, epsilon: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("epsilon must lie in (0,1), got {epsilon}")));
    }
    if !(mean.is_finite() && mean >= 0.0) {
        return Err(invalid(format!("mean must be finite and >= 0, got {mean}")));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    // Beyond mean + 40 sd + 200 the remaining mass is far below any f64 epsilon.
    let upper = (mean + 40.0 * mean.sqrt() + 200.0).ceil() as u64;
    let probs: Vec<f64> = (0..=upper).map(|y| ln_poisson(mean, y).exp()).collect();
    let mut tail = 0.0;
    let mut answer = upper;
    for m in (0..upper).rev() {
        tail += probs[m as usize + 1];
        if tail <= epsilon {
            answer = m;
        } else {
            break;
        }
    }
    Ok(answer)
}

/// `D(Pois(a) ‖ Pois(b))` in bits.
pub fn kl_poisson(a: f64, b: f64) -> Result<f64> {
    if !(a.is_finite() && a >= 0.0 && b.is_finite() && b >= 0.0) {
        return Err(invalid(format!("Poisson means must be finite and >= 0, got ({a}, {b})")));
    }
    if b == 0.0 {
        return if a == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::InfiniteDivergence(format!("Pois({a}) against the point mass at 0")))
        };
    }
    let head = if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    Ok((head + (b - a)) * LOG2_E)
}

/// Divergence computed over a truncated output alphabet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedDivergence {
    pub bits: f64,
    /// Mass of `W(·|x)` beyond the cutoff, whose contribution was not summed.
    pub omitted_mass: f64,
}

/// `D(W(·|x) ‖ P_Y)` summed over `y = 0..=output.y_max()`.
pub fn kl_output<C: Channel>(channel: &C, x: f64, output: &OutputDistribution) -> Result<TruncatedDivergence> {
    check_input(x)?;
    let mut row = Vec::new();
    channel.ln_prob_row(x, output.y_max(), &mut row);
    let mut acc = 0.0;
    let mut mass = 0.0;
    for (y, (&lw, &p)) in row.iter().zip(output.probs()).enumerate() {
        if lw == f64::NEG_INFINITY {
            continue;
        }
        let w = lw.exp();
        if w == 0.0 {
            continue;
        }
        if p <= 0.0 {
            return Err(Error::InfiniteDivergence(format!("output law has no mass at y = {y} where W(y|{x}) > 0")));
        }
        acc += w * (lw - p.ln());
        mass += w;
    }
    Ok(TruncatedDivergence { bits: acc * LOG2_E, omitted_mass: (1.0 - mass).max(0.0) })
}
