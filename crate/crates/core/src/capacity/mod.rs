//! Constrained capacity of the Poisson channel.
//!
//! The capacity under a peak constraint `X ≤ p_max` and an average constraint
//! `E[X] ≤ p_avg` is attained by a discrete input law with finitely many mass
//! points. [`solve_capacity`] finds it numerically and returns it together
//! with a dual certificate: for any `μ ≥ 0` and any output law `Q`,
//! `C ≤ max_x D(W(·|x) ‖ Q) − μ(x − p_avg)`, so every result carries a
//! provable upper bound next to the achieved mutual information.

use serde::{Deserialize, Serialize};

use crate::channel::{kl_output, Channel};
use crate::error::{invalid, Result};

mod kkt;
mod solver;

pub use kkt::{kkt_certificate, KktCertificate};
pub use solver::{
    ba_mass_update, capacity_of_state_channel, solve_capacity, solve_capacity_with, MassUpdate, SolverOptions,
};

/// Peak and average input power (mean released molecules per slot).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConstraints {
    pub p_max: f64,
    pub p_avg: f64,
}

impl PowerConstraints {
    pub fn new(p_max: f64, p_avg: f64) -> Result<Self> {
        if !(p_max.is_finite() && p_max > 0.0) {
            return Err(invalid(format!("p_max must be finite and > 0, got {p_max}")));
        }
        if !(p_avg.is_finite() && p_avg > 0.0) {
            return Err(invalid(format!("p_avg must be finite and > 0, got {p_avg}")));
        }
        Ok(Self { p_max, p_avg })
    }

    /// The average constraint cannot bind above the peak.
    pub fn effective_avg(&self) -> f64 {
        self.p_avg.min(self.p_max)
    }
}

/// Tolerance on `Σ p_j = 1`.
pub const MASS_SUM_TOL: f64 = 1e-12;
/// Slack allowed on the average-power constraint.
pub const AVG_POWER_SLACK: f64 = 1e-9;

/// Finitely supported input law: Dirac masses `p_j` at levels `x̄_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDistribution {
    points: Vec<f64>,
    masses: Vec<f64>,
}

impl InputDistribution {
    /// Points must be strictly increasing and nonnegative; masses positive
    /// and summing to one.
    pub fn new(points: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != masses.len() {
            return Err(invalid("input distribution needs matching, non-empty point and mass lists"));
        }
        if points.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(invalid("support points must be finite and >= 0"));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("support points must be strictly increasing"));
        }
        if masses.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(invalid("masses must be finite and > 0"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_SUM_TOL {
            return Err(invalid(format!("masses must sum to 1, got {total}")));
        }
        Ok(Self { points, masses })
    }

    /// Builds from `(point, mass)` pairs in any order.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let mut sorted = pairs.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self::new(sorted.iter().map(|p| p.0).collect(), sorted.iter().map(|p| p.1).collect())
    }

    pub fn point_mass(x: f64) -> Result<Self> {
        Self::new(vec![x], vec![1.0])
    }

    /// Peak and average constraints, the latter with [`AVG_POWER_SLACK`].
    pub fn check_constraints(&self, constraints: &PowerConstraints) -> Result<()> {
        let top = *self.points.last().expect("non-empty");
        if top > constraints.p_max {
            return Err(invalid(format!("support point {top} exceeds p_max {}", constraints.p_max)));
        }
        let mean = self.mean();
        if mean > constraints.p_avg + AVG_POWER_SLACK {
            return Err(invalid(format!("E[X] = {mean} exceeds p_avg {}", constraints.p_avg)));
        }
        Ok(())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied().zip(self.masses.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(x, p)| x * p).sum()
    }

    pub(crate) fn from_raw(points: Vec<f64>, masses: Vec<f64>) -> Self {
        Self { points, masses }
    }
}

/// `P_Y` restricted to `{0..y_max}`; the rest is lumped into `tail_mass`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDistribution {
    probs: Vec<f64>,
    tail_mass: f64,
}

impl OutputDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("output probabilities must be finite and >= 0"));
        }
        let total: f64 = probs.iter().sum();
        if total > 1.0 + 1e-9 {
            return Err(invalid(format!("output probabilities sum to {total} > 1")));
        }
        Ok(Self { probs, tail_mass: (1.0 - total).max(0.0) })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn y_max(&self) -> u64 {
        self.probs.len() as u64 - 1
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// `P_Y(y)` for `y ≤ y_max`, else `None`.
    pub fn prob(&self, y: u64) -> Option<f64> {
        self.probs.get(y as usize).copied()
    }
}

/// `P_Y(y) = Σ_j p_j W(y|x̄_j)` for `y ≤ y_max`.
pub fn output_distribution<C: Channel>(dist: &InputDistribution, channel: &C, y_max: u64) -> OutputDistribution {
    let mut probs = vec![0.0; y_max as usize + 1];
    let mut row = Vec::new();
    for (x, p) in dist.iter() {
        channel.ln_prob_row(x, y_max, &mut row);
        for (acc, lw) in probs.iter_mut().zip(&row) {
            *acc += p * lw.exp();
        }
    }
    let total: f64 = probs.iter().sum();
    OutputDistribution { probs, tail_mass: (1.0 - total).max(0.0) }
}

/// `I(X;Y) = Σ_j p_j D(W(·|x̄_j) ‖ P_Y)` in bits.
pub fn mutual_information<C: Channel>(dist: &InputDistribution, channel: &C, y_max: u64) -> Result<f64> {
    let output = output_distribution(dist, channel, y_max);
    mutual_information_against(dist, channel, &output)
}

pub(crate) fn mutual_information_against<C: Channel>(
    dist: &InputDistribution,
    channel: &C,
    output: &OutputDistribution,
) -> Result<f64> {
    let mut total = 0.0;
    for (x, p) in dist.iter() {
        total += p * kl_output(channel, x, output)?.bits;
    }
    Ok(total)
}

/// `L(μ, x, P_X) = I(X;Y) + μ(x − p_avg) − D(W(·|x) ‖ P_Y)`.
///
/// Nonnegative on `[0, p_max]` and zero on the support exactly when `P_X` is
/// capacity achieving with multiplier `μ`.
pub fn lagrangian<C: Channel>(
    mu: f64,
    x: f64,
    dist: &InputDistribution,
    channel: &C,
    p_avg: f64,
    y_max: u64,
) -> Result<f64> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(invalid(format!("multiplier must be >= 0, got {mu}")));
    }
    let output = output_distribution(dist, channel, y_max);
    let info = mutual_information_against(dist, channel, &output)?;
    Ok(info + mu * (x - p_avg) - kl_output(channel, x, &output)?.bits)
}

/// Solver output: the optimal input law and its optimality certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    pub capacity_bits: f64,
    pub constraints: PowerConstraints,
    pub distribution: InputDistribution,
    /// Lagrange multiplier of the average-power constraint.
    pub multiplier: f64,
    /// Mutual information of `distribution`.
    pub lower_bound: f64,
    /// Dual bound `max_x D(W(·|x) ‖ P_Y) − μ(x − p_avg)`.
    pub upper_bound: f64,
    pub kkt_max_violation: f64,
    pub grid_size: usize,
    pub iterations: u64,
    pub y_max: u64,
    pub epsilon: f64,
}

impl CapacityResult {
    pub fn gap(&self) -> f64 {
        self.upper_bound - self.lower_bound
    }

    pub fn support_size(&self) -> usize {
        self.distribution.len()
    }

    /// The optimal output law `P_Ȳ` on the solver's truncated alphabet.
    pub fn output_law<C: Channel>(&self, channel: &C) -> OutputDistribution {
        output_distribution(&self.distribution, channel, self.y_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PoissonChannel;

    fn poisson(l: f64) -> PoissonChannel {
        PoissonChannel::new(l).unwrap()
    }

    #[test]
    fn distribution_invariants() {
        assert!(InputDistribution::new(vec![1.0, 0.5], vec![0.5, 0.5]).is_err());
        assert!(InputDistribution::new(vec![0.5, 0.5], vec![0.5, 0.5]).is_err());
        assert!(InputDistribution::new(vec![0.0, 1.0], vec![0.5, 0.4]).is_err());
        assert!(InputDistribution::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(InputDistribution::new(vec![-1.0, 1.0], vec![0.5, 0.5]).is_err());
        let d = InputDistribution::from_pairs(&[(4.0, 0.25), (0.0, 0.75)]).unwrap();
        assert_eq!(d.points(), &[0.0, 4.0]);
        assert_eq!(d.mean(), 1.0);
        let c = PowerConstraints::new(5.0, 1.0).unwrap();
        assert!(d.check_constraints(&c).is_ok());
        assert!(d.check_constraints(&PowerConstraints::new(3.0, 5.0).unwrap()).is_err());
        assert!(d.check_constraints(&PowerConstraints::new(5.0, 0.9).unwrap()).is_err());
    }

    #[test]
    fn constraints_validated() {
        assert!(PowerConstraints::new(0.0, 1.0).is_err());
        assert!(PowerConstraints::new(1.0, -1.0).is_err());
        assert_eq!(PowerConstraints::new(2.0, 7.0).unwrap().effective_avg(), 2.0);
    }

    #[test]
    fn point_mass_output_is_the_channel_law() {
        let ch = poisson(2.0);
        let out = output_distribution(&InputDistribution::point_mass(0.0).unwrap(), &ch, 25);
        for y in 0..=25 {
            assert_eq!(out.prob(y).unwrap(), ch.pmf(0.0, y).unwrap());
        }
    }

    #[test]
    fn two_point_output_at_zero() {
        let d = InputDistribution::from_pairs(&[(0.0, 0.5), (4.0, 0.5)]).unwrap();
        let out = output_distribution(&d, &poisson(1.0), 30);
        assert!((out.prob(0).unwrap() - 0.187_308_694_085_263_9).abs() < 1e-15);
    }

    #[test]
    fn output_tail_within_two_epsilon() {
        let ch = poisson(1.0);
        let tp = ch.truncation(5.0, 1e-12).unwrap();
        let d = InputDistribution::from_pairs(&[(0.0, 0.3), (2.5, 0.3), (5.0, 0.4)]).unwrap();
        let out = output_distribution(&d, &ch, tp.y_max);
        assert!(out.tail_mass() <= 2e-12, "{}", out.tail_mass());
    }

    #[test]
    fn point_mass_carries_no_information() {
        let ch = poisson(1.0);
        let d = InputDistribution::point_mass(3.0).unwrap();
        assert!(mutual_information(&d, &ch, 40).unwrap().abs() < 1e-15);
    }

    #[test]
    fn lagrangian_vanishes_for_point_mass_at_zero() {
        let ch = poisson(1.0);
        let d = InputDistribution::point_mass(0.0).unwrap();
        assert!(lagrangian(0.0, 0.0, &d, &ch, 1.0, 30).unwrap().abs() < 1e-15);
        assert!(lagrangian(-1.0, 0.0, &d, &ch, 1.0, 30).is_err());
    }
}
