use serde::{Deserialize, Serialize};

use super::{output_distribution, InputDistribution, OutputDistribution, PowerConstraints};
use crate::channel::{Channel, LOG2_E};
use crate::error::{invalid, Result};

/// Evaluates `D(W(·|x) ‖ P_Y)` for arbitrary `x` against a fixed output law.
pub(crate) struct DivergenceEval<'a, C> {
    channel: &'a C,
    y_max: u64,
    ln_out: Vec<f64>,
}

impl<'a, C: Channel> DivergenceEval<'a, C> {
    pub(crate) fn new(channel: &'a C, out: &[f64]) -> Self {
        Self { channel, y_max: out.len() as u64 - 1, ln_out: out.iter().map(|p| p.ln()).collect() }
    }

    /// Bits; `+inf` when `P_Y` vanishes where `W(·|x)` does not.
    pub(crate) fn bits(&self, x: f64, scratch: &mut Vec<f64>) -> f64 {
        self.channel.ln_prob_row(x, self.y_max, scratch);
        let mut acc = 0.0;
        for (&lw, &lq) in scratch.iter().zip(&self.ln_out) {
            if lw == f64::NEG_INFINITY {
                continue;
            }
            let w = lw.exp();
            if w == 0.0 {
                continue;
            }
            acc += w * (lw - lq);
        }
        acc * LOG2_E
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes `f` on `[lo, hi]` by golden-section search; the endpoints are
/// always candidates, so boundary maxima are returned exactly.
pub(crate) fn golden_max(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, x_tol: f64) -> (f64, f64) {
    let f_lo = f(lo);
    let f_hi = f(hi);
    let mut best = if f_hi > f_lo { (hi, f_hi) } else { (lo, f_lo) };
    if hi - lo <= x_tol {
        return best;
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > x_tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// Maximum of `f` over a uniform grid on `[0, p_max]`, each of the highest
/// local grid maxima polished by golden-section search inside its cell.
pub(crate) fn grid_sup(mut f: impl FnMut(f64) -> f64, p_max: f64, grid_size: usize) -> (f64, f64) {
    if grid_size <= 1 {
        return (0.0, f(0.0));
    }
    let step = p_max / (grid_size - 1) as f64;
    let xs: Vec<f64> = (0..grid_size).map(|i| if i + 1 == grid_size { p_max } else { i as f64 * step }).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut peaks: Vec<usize> = (0..grid_size)
        .filter(|&i| (i == 0 || vals[i] >= vals[i - 1]) && (i + 1 == grid_size || vals[i] >= vals[i + 1]))
        .collect();
    peaks.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    peaks.truncate(8);
    let mut best = (xs[0], vals[0]);
    for (&x, &v) in xs.iter().zip(&vals) {
        if v > best.1 {
            best = (x, v);
        }
    }
    for i in peaks {
        let lo = xs[i.saturating_sub(1)];
        let hi = xs[(i + 1).min(grid_size - 1)];
        let cand = golden_max(&mut f, lo, hi, 1e-12 * p_max.max(1e-300));
        if cand.1 > best.1 {
            best = cand;
        }
    }
    best
}

/// Dual certificate for a candidate input law and multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktCertificate {
    /// `I(X;Y)` of the candidate.
    pub lower_bound: f64,
    /// `max_x g(x)` with `g(x) = D(W(·|x) ‖ P_Y) − μ(x − p_avg)`; an upper bound on capacity.
    pub upper_bound: f64,
    /// Largest of `max_x g(x) − I`, clamped at zero, and the support residual.
    pub max_violation: f64,
    /// `max_j |g(x̄_j) − I|`.
    pub support_residual: f64,
    /// Where `g` peaks.
    pub argmax: f64,
}

impl KktCertificate {
    pub fn gap(&self) -> f64 {
        self.upper_bound - self.lower_bound
    }

    /// `min_x L(μ, x, P_X) = I − max_x g(x)`.
    pub fn min_lagrangian(&self) -> f64 {
        self.lower_bound - self.upper_bound
    }
}

/// Checks the Kuhn–Tucker conditions of `dist` with multiplier `mu` on a
/// `grid_size`-point uniform grid over `[0, p_max]` plus the support.
///
/// A one-point grid is just `{0}`.
pub fn kkt_certificate<C: Channel>(
    dist: &InputDistribution,
    mu: f64,
    channel: &C,
    constraints: &PowerConstraints,
    y_max: u64,
    grid_size: usize,
) -> Result<KktCertificate> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(invalid(format!("multiplier must be >= 0, got {mu}")));
    }
    if grid_size == 0 {
        return Err(invalid("grid_size must be >= 1"));
    }
    let output = output_distribution(dist, channel, y_max);
    Ok(certify(dist, mu, channel, constraints, &output, grid_size))
}

pub(crate) fn certify<C: Channel>(
    dist: &InputDistribution,
    mu: f64,
    channel: &C,
    constraints: &PowerConstraints,
    output: &OutputDistribution,
    grid_size: usize,
) -> KktCertificate {
    let eval = DivergenceEval::new(channel, output.probs());
    let p_avg = constraints.effective_avg();
    let mut scratch = Vec::new();
    let mut g = |x: f64| eval.bits(x, &mut scratch) - mu * (x - p_avg);

    let support_g: Vec<f64> = dist.points().iter().map(|&x| g(x)).collect();
    let info: f64 = support_g.iter().zip(dist.masses()).map(|(gv, p)| p * gv).sum::<f64>() + mu * (dist.mean() - p_avg);

    let (mut argmax, mut upper) = grid_sup(&mut g, constraints.p_max, grid_size);
    let mut support_residual = 0.0f64;
    for (&x, &gv) in dist.points().iter().zip(&support_g) {
        support_residual = support_residual.max((gv - info).abs());
        if gv > upper {
            upper = gv;
            argmax = x;
        }
    }
    KktCertificate {
        lower_bound: info,
        upper_bound: upper,
        max_violation: (upper - info).max(0.0).max(support_residual),
        support_residual,
        argmax,
    }
}
