//! Lookup tables for repeated sampling and density evaluation on a fixed
//! finite input alphabet against a fixed output law.

use rand::Rng;

use crate::capacity::OutputDistribution;
use crate::channel::{Channel, LOG2_E};

/// Inverse-CDF sampling is continued past the table by at most this many
/// terms; beyond that the remaining mass is far below double precision.
const TAIL_SCAN: u64 = 100_000;

pub(crate) struct SymbolTables {
    points: Vec<f64>,
    y_max: u64,
    probs: Vec<Vec<f64>>,
    cdf: Vec<Vec<f64>>,
    /// `log₂ W(y|x̄_j) − log₂ P(y)` for `y ≤ y_max`.
    density: Vec<Vec<f64>>,
    /// `ln` of the output tail mass, standing in for `ln P(y)` above `y_max`.
    ln_tail: f64,
}

impl SymbolTables {
    pub(crate) fn new<C: Channel>(channel: &C, points: &[f64], output: &OutputDistribution) -> Self {
        let y_max = output.y_max();
        let ln_out: Vec<f64> = output.probs().iter().map(|p| p.ln()).collect();
        let mut row = Vec::new();
        let mut probs = Vec::with_capacity(points.len());
        let mut cdf = Vec::with_capacity(points.len());
        let mut density = Vec::with_capacity(points.len());
        for &x in points {
            channel.ln_prob_row(x, y_max, &mut row);
            let p: Vec<f64> = row.iter().map(|lw| lw.exp()).collect();
            let mut acc = 0.0;
            cdf.push(
                p.iter()
                    .map(|w| {
                        acc += w;
                        acc
                    })
                    .collect(),
            );
            probs.push(p);
            density.push(row.iter().zip(&ln_out).map(|(lw, lq)| (lw - lq) * LOG2_E).collect());
        }
        Self {
            points: points.to_vec(),
            y_max,
            probs,
            cdf,
            density,
            ln_tail: output.tail_mass().max(f64::MIN_POSITIVE).ln(),
        }
    }

    pub(crate) fn y_max(&self) -> u64 {
        self.y_max
    }

    /// Draw `Y ~ W(·|x̄_j)` by inverse CDF.
    pub(crate) fn sample_output<C: Channel, R: Rng + ?Sized>(&self, channel: &C, j: usize, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let cdf = &self.cdf[j];
        let y = cdf.partition_point(|&c| c <= u) as u64;
        if y <= self.y_max {
            return y;
        }
        let x = self.points[j];
        let mut cum = cdf[self.y_max as usize];
        let mut y = self.y_max + 1;
        while y < self.y_max + TAIL_SCAN {
            cum += channel.ln_prob(x, y).exp();
            if u < cum {
                break;
            }
            y += 1;
        }
        y
    }

    /// Per-symbol density in bits; the flag marks use of the tail bucket.
    pub(crate) fn density<C: Channel>(&self, channel: &C, j: usize, y: u64) -> (f64, bool) {
        if y <= self.y_max {
            (self.density[j][y as usize], false)
        } else {
            ((channel.ln_prob(self.points[j], y) - self.ln_tail) * LOG2_E, true)
        }
    }

    /// Table row of densities for `x̄_j`.
    pub(crate) fn density_row(&self, j: usize) -> &[f64] {
        &self.density[j]
    }

    /// `W(y|x̄_j)` for `y ≤ y_max`.
    pub(crate) fn prob_row(&self, j: usize) -> &[f64] {
        &self.probs[j]
    }

    /// `Σ_{y ≤ y_max} W(y|x̄_j)`.
    pub(crate) fn covered_mass(&self, j: usize) -> f64 {
        self.cdf[j][self.y_max as usize]
    }
}

/// Inverse-CDF sampler over the support points of a finite input law.
pub(crate) struct InputSampler {
    cum: Vec<f64>,
}

impl InputSampler {
    pub(crate) fn new(masses: &[f64]) -> Self {
        let mut acc = 0.0;
        Self {
            cum: masses
                .iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect(),
        }
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.cum[self.cum.len() - 1];
        self.cum.partition_point(|&c| c <= u).min(self.cum.len() - 1)
    }
}
