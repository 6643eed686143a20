//! Grid-seeded Blahut–Arimoto with support refinement.
//!
//! For a fixed multiplier `μ` the penalized problem `max I(X;Y) − μ E[X]` is
//! solved in two phases: multiplicative mass updates on a dense uniform grid
//! locate the clusters of the optimal law; the clusters are then collapsed to
//! single points and refined. Refinement alternates a Newton solve for the
//! masses, moves of each point toward the peak of `D(W(·|x) ‖ P_Y) − μx`
//! (kept only when the objective rises), and insertion of the point where the
//! certificate is violated. Every step is an ascent step on the objective.
//! The average constraint is handled by bisecting on `μ`.

use super::kkt::{certify, golden_max, grid_sup, DivergenceEval};
use super::{CapacityResult, InputDistribution, OutputDistribution, PowerConstraints};
use crate::channel::{Channel, StateDependentChannel, DEFAULT_EPSILON, LOG2_E};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Required certificate gap in bits.
    pub tol: f64,
    /// Output truncation (discarded tail mass per symbol).
    pub epsilon: f64,
    /// Points of the seeding grid.
    pub initial_grid: usize,
    /// Masses below this are pruned.
    pub mass_floor: f64,
    /// Points closer than `merge_radius · p_max` are always merged; while
    /// refining, points sharing a lattice cell are merged too.
    pub merge_radius: f64,
    /// Mass-update steps allowed per multiplier.
    pub max_inner_iterations: u64,
    /// Grid used for the returned certificate.
    pub certificate_grid: usize,
    /// Penalized gap at which the support refinement stops.
    pub kkt_target: f64,
    /// Relative tolerance on `E[X] = p_avg` when the constraint binds.
    pub avg_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            epsilon: DEFAULT_EPSILON,
            initial_grid: 512,
            mass_floor: 1e-12,
            merge_radius: 1e-6,
            max_inner_iterations: 100_000,
            certificate_grid: 10_000,
            kkt_target: 1e-10,
            avg_tol: 1e-6,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(invalid(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!("epsilon must lie in (0,1), got {}", self.epsilon)));
        }
        if self.initial_grid < 2 || self.certificate_grid < 2 {
            return Err(invalid("grids need at least two points"));
        }
        Ok(())
    }
}

/// Seeding phase gives up refining the grid law beyond this many steps.
const SEED_STEPS: u64 = 4_000;
/// Grid masses above this seed a support cluster.
const CLUSTER_FLOOR: f64 = 1e-7;
/// Grid used while refining; the final certificate uses the finer one.
const REFINE_GRID: usize = 1024;
const MAX_ROUNDS: usize = 500;

/// Working state: a finite support with cached channel rows.
struct Work<'a, C> {
    channel: &'a C,
    y_max: u64,
    p_max: f64,
    points: Vec<f64>,
    masses: Vec<f64>,
    rows: Vec<Vec<f64>>,
    neg_entropy: Vec<f64>,
    out: Vec<f64>,
    ln_out: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a, C: Channel> Work<'a, C> {
    fn new(channel: &'a C, y_max: u64, p_max: f64) -> Self {
        Self {
            channel,
            y_max,
            p_max,
            points: Vec::new(),
            masses: Vec::new(),
            rows: Vec::new(),
            neg_entropy: Vec::new(),
            out: vec![0.0; y_max as usize + 1],
            ln_out: vec![0.0; y_max as usize + 1],
            scratch: Vec::new(),
        }
    }

    fn set_support(&mut self, points: Vec<f64>, masses: Vec<f64>) {
        self.points = points;
        self.masses = masses;
        self.normalize();
        self.rebuild_rows();
    }

    fn rebuild_rows(&mut self) {
        let m = self.points.len();
        self.rows.resize(m, Vec::new());
        self.neg_entropy.resize(m, 0.0);
        for j in 0..m {
            self.set_row(j, self.points[j]);
        }
    }

    fn normalize(&mut self) {
        let total: f64 = self.masses.iter().sum();
        self.masses.iter_mut().for_each(|p| *p /= total);
    }

    fn mean(&self) -> f64 {
        self.points.iter().zip(&self.masses).map(|(x, p)| x * p).sum()
    }

    fn refresh_output(&mut self) {
        self.out.iter_mut().for_each(|v| *v = 0.0);
        for (row, &p) in self.rows.iter().zip(&self.masses) {
            for (acc, &w) in self.out.iter_mut().zip(row) {
                *acc += p * w;
            }
        }
        for (l, &v) in self.ln_out.iter_mut().zip(&self.out) {
            *l = v.ln();
        }
    }

    /// `D(W(·|x̄_j) ‖ P_Y)` in bits for every support point.
    fn divergences(&self) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.neg_entropy)
            .map(|(row, ne)| {
                let cross: f64 = row.iter().zip(&self.ln_out).filter(|(w, _)| **w > 0.0).map(|(w, l)| w * l).sum();
                (ne - cross) * LOG2_E
            })
            .collect()
    }

    /// One multiplicative update. Returns the penalized objective `F` and the
    /// largest penalized divergence, both evaluated before the update.
    fn ba_step(&mut self, mu: f64) -> (f64, f64) {
        self.refresh_output();
        let scores: Vec<f64> = self.divergences().iter().zip(&self.points).map(|(d, x)| d - mu * x).collect();
        let objective: f64 = scores.iter().zip(&self.masses).map(|(a, p)| a * p).sum();
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (p, a) in self.masses.iter_mut().zip(&scores) {
            *p = (*p * (a - top).exp2()).max(f64::MIN_POSITIVE);
        }
        self.normalize();
        (objective, top)
    }

    fn run_ba(&mut self, mu: f64, max_steps: u64, target: f64) -> u64 {
        let mut steps = 0;
        while steps < max_steps {
            let (objective, top) = self.ba_step(mu);
            steps += 1;
            if top - objective <= target {
                break;
            }
        }
        steps
    }

    fn prune(&mut self, floor: f64) {
        if self.masses.iter().all(|&p| p >= floor) {
            return;
        }
        let keep: Vec<usize> = (0..self.points.len()).filter(|&j| self.masses[j] >= floor).collect();
        self.points = keep.iter().map(|&j| self.points[j]).collect();
        self.masses = keep.iter().map(|&j| self.masses[j]).collect();
        self.normalize();
        self.rebuild_rows();
    }

    /// Collapses neighbours closer than `radius`; boundary positions win.
    fn merge(&mut self, radius: f64) {
        let mut points: Vec<f64> = Vec::with_capacity(self.points.len());
        let mut masses: Vec<f64> = Vec::with_capacity(self.points.len());
        let mut changed = false;
        for (&x, &p) in self.points.iter().zip(&self.masses) {
            if let (Some(last_x), Some(last_p)) = (points.last_mut(), masses.last_mut()) {
                if x - *last_x <= radius {
                    let on_edge = |v: f64| v == 0.0 || v == self.p_max;
                    *last_x = if on_edge(*last_x) {
                        *last_x
                    } else if on_edge(x) {
                        x
                    } else {
                        (*last_x * *last_p + x * p) / (*last_p + p)
                    };
                    *last_p += p;
                    changed = true;
                    continue;
                }
            }
            points.push(x);
            masses.push(p);
        }
        if changed {
            self.points = points;
            self.masses = masses;
            self.rebuild_rows();
        }
    }

    /// Penalized objective for `masses` on the current support, leaving the
    /// cached output law untouched.
    fn objective_for(&self, masses: &[f64], mu: f64) -> f64 {
        let mut out = vec![0.0; self.out.len()];
        for (row, &p) in self.rows.iter().zip(masses) {
            if p > 0.0 {
                for (acc, &w) in out.iter_mut().zip(row) {
                    *acc += p * w;
                }
            }
        }
        let mut total = 0.0;
        for (j, row) in self.rows.iter().enumerate() {
            let p = masses[j];
            if p <= 0.0 {
                continue;
            }
            let cross: f64 = row.iter().zip(&out).filter(|(w, _)| **w > 0.0).map(|(w, q)| w * q.ln()).sum();
            total += p * ((self.neg_entropy[j] - cross) * LOG2_E - mu * self.points[j]);
        }
        total
    }

    /// Penalized scores `a_j = D(W(·|x̄_j) ‖ P_Y) − μ x̄_j` and their mean `F`.
    fn scores(&mut self, mu: f64) -> (Vec<f64>, f64) {
        self.refresh_output();
        let a: Vec<f64> = self.divergences().iter().zip(&self.points).map(|(d, x)| d - mu * x).collect();
        let f = a.iter().zip(&self.masses).map(|(a, p)| a * p).sum();
        (a, f)
    }

    /// Newton ascent on the masses with the support held fixed, until every
    /// score is within `target` of the objective. Points driven to zero mass
    /// are dropped. Returns the number of iterations used.
    fn optimize_masses(&mut self, mu: f64, target: f64, max_iter: u64) -> u64 {
        let mut it = 0;
        while it < max_iter {
            let (a, f) = self.scores(mu);
            let resid = a.iter().map(|v| (v - f).abs()).fold(0.0, f64::max);
            if resid <= target {
                break;
            }
            it += 1;
            let Some(dir) = self.newton_direction(&a) else {
                self.ba_step(mu);
                continue;
            };
            // A fresh point the quadratic model wants below zero stays out.
            if let Some(j) = (0..dir.len()).find(|&j| self.masses[j] == 0.0 && dir[j] <= 0.0) {
                self.masses[j] = 0.0;
                self.prune(f64::MIN_POSITIVE);
                continue;
            }
            let mut t_max = 1.0f64;
            for (p, d) in self.masses.iter().zip(&dir) {
                if *d < 0.0 {
                    t_max = t_max.min(p / -d);
                }
            }
            let mut t = t_max;
            let mut accepted = None;
            for _ in 0..40 {
                let trial: Vec<f64> = self
                    .masses
                    .iter()
                    .zip(&dir)
                    .map(|(p, d)| if t == t_max && p + t * d <= p * 1e-12 { 0.0 } else { (p + t * d).max(0.0) })
                    .collect();
                if self.objective_for(&trial, mu) >= f {
                    accepted = Some(trial);
                    break;
                }
                t *= 0.5;
            }
            match accepted {
                Some(m) if m != self.masses => {
                    self.masses = m;
                    self.normalize();
                    if self.masses.contains(&0.0) {
                        self.prune(f64::MIN_POSITIVE);
                    }
                }
                // No ascent left at working precision.
                _ => break,
            }
        }
        it
    }

    /// Solves `H d + ν 1 = −a`, `Σ d = 0` with `H` the Hessian of the
    /// objective in the masses.
    #[allow(clippy::needless_range_loop)]
    fn newton_direction(&self, a: &[f64]) -> Option<Vec<f64>> {
        let m = self.points.len();
        if m < 2 {
            return None;
        }
        let inv: Vec<f64> = self.out.iter().map(|&q| if q > 0.0 { 1.0 / q } else { 0.0 }).collect();
        let n = m + 1;
        let mut mat = vec![vec![0.0; n + 1]; n];
        for i in 0..m {
            for j in i..m {
                let h: f64 = -LOG2_E
                    * self.rows[i].iter().zip(&self.rows[j]).zip(&inv).map(|((u, v), w)| u * v * w).sum::<f64>();
                mat[i][j] = h;
                mat[j][i] = h;
            }
            mat[i][m] = 1.0;
            mat[m][i] = 1.0;
            mat[i][n] = -a[i];
        }
        let sol = solve_dense(mat)?;
        Some(sol[..m].to_vec())
    }

    /// Local maximum of the penalized divergence reached by hill-climbing
    /// from `x` on a uniform lattice, then polished inside the final cell.
    fn basin_peak(&self, mu: f64, x: f64) -> f64 {
        let eval = DivergenceEval::new(self.channel, &self.out);
        let mut scratch = Vec::new();
        let mut score = |v: f64| eval.bits(v, &mut scratch) - mu * v;
        let g = REFINE_GRID;
        let step = self.p_max / (g - 1) as f64;
        let at = |i: usize| if i + 1 == g { self.p_max } else { i as f64 * step };
        let mut i = ((x / step).round() as usize).min(g - 1);
        let mut here = score(at(i));
        loop {
            let left = if i > 0 { score(at(i - 1)) } else { f64::NEG_INFINITY };
            let right = if i + 1 < g { score(at(i + 1)) } else { f64::NEG_INFINITY };
            if left > here && left >= right {
                i -= 1;
                here = left;
            } else if right > here {
                i += 1;
                here = right;
            } else {
                break;
            }
        }
        golden_max(&mut score, at(i.saturating_sub(1)), at((i + 1).min(g - 1)), 1e-11 * self.p_max).0
    }

    /// Moves each support point toward the peak of its basin, accepting a
    /// move only if the objective (masses fixed) increases; the step is
    /// halved until it does. Returns whether anything moved.
    fn move_points(&mut self, mu: f64) -> bool {
        let mut moved = false;
        for j in 0..self.points.len() {
            self.refresh_output();
            let x = self.points[j];
            let peak = self.basin_peak(mu, x);
            if peak == x {
                continue;
            }
            let base = self.objective_for(&self.masses, mu);
            let old_row = std::mem::take(&mut self.rows[j]);
            let old_ne = self.neg_entropy[j];
            let mut s = 1.0;
            let mut done = false;
            for _ in 0..12 {
                let cand = (x + s * (peak - x)).clamp(0.0, self.p_max);
                self.points[j] = cand;
                self.set_row(j, cand);
                if self.objective_for(&self.masses, mu) > base {
                    done = true;
                    break;
                }
                s *= 0.5;
            }
            if done {
                moved = true;
            } else {
                self.points[j] = x;
                self.rows[j] = old_row;
                self.neg_entropy[j] = old_ne;
            }
        }
        if moved {
            let mut order: Vec<usize> = (0..self.points.len()).collect();
            order.sort_by(|&a, &b| self.points[a].total_cmp(&self.points[b]));
            self.points = order.iter().map(|&j| self.points[j]).collect();
            self.masses = order.iter().map(|&j| self.masses[j]).collect();
            self.rebuild_rows();
        }
        moved
    }

    fn set_row(&mut self, j: usize, x: f64) {
        self.channel.ln_prob_row(x, self.y_max, &mut self.scratch);
        let mut ne = 0.0;
        let row: Vec<f64> = self
            .scratch
            .iter()
            .map(|&lw| {
                let w = if lw == f64::NEG_INFINITY { 0.0 } else { lw.exp() };
                if w > 0.0 {
                    ne += w * lw;
                }
                w
            })
            .collect();
        self.rows[j] = row;
        self.neg_entropy[j] = ne;
    }

    /// Penalized supremum `max_x D(W(·|x) ‖ P_Y) − μx` and its location.
    fn penalized_sup(&mut self, mu: f64, grid: usize) -> (f64, f64) {
        self.refresh_output();
        let eval = DivergenceEval::new(self.channel, &self.out);
        let mut scratch = Vec::new();
        grid_sup(|x| eval.bits(x, &mut scratch) - mu * x, self.p_max, grid)
    }

    fn penalized_objective(&mut self, mu: f64) -> f64 {
        self.refresh_output();
        let d = self.divergences();
        d.iter().zip(&self.points).zip(&self.masses).map(|((d, x), p)| p * (d - mu * x)).sum()
    }

    /// Adds `x`, mixing it in with the weight that maximizes the objective
    /// along `(1 − t) P_X + t δ_x`; concavity makes this a 1-D search.
    fn insert(&mut self, x: f64, mu: f64) {
        let idx = self.points.partition_point(|&v| v < x);
        self.points.insert(idx, x);
        self.masses.insert(idx, 0.0);
        self.rebuild_rows();
        let base = self.masses.clone();
        let mix = |t: f64| -> Vec<f64> {
            let mut m: Vec<f64> = base.iter().map(|p| p * (1.0 - t)).collect();
            m[idx] = t;
            m
        };
        let (t, _) = golden_max(|t| self.objective_for(&mix(t), mu), 0.0, 1.0, 1e-9);
        if t > 0.0 {
            self.masses = mix(t);
            if t == 1.0 {
                self.prune(f64::MIN_POSITIVE);
            }
        } else {
            self.points.remove(idx);
            self.masses.remove(idx);
            self.rebuild_rows();
        }
    }

    fn distance_to_support(&self, x: f64) -> f64 {
        self.points.iter().map(|p| (p - x).abs()).fold(f64::INFINITY, f64::min)
    }

    fn snapshot(&self) -> (Vec<f64>, Vec<f64>) {
        (self.points.clone(), self.masses.clone())
    }

    fn distribution(&self) -> InputDistribution {
        InputDistribution::from_raw(self.points.clone(), self.masses.clone())
    }
}

struct Inner {
    steps: u64,
    converged: bool,
}

/// Uniform-grid Blahut–Arimoto followed by clustering of the surviving mass.
fn seed_support<C: Channel>(work: &mut Work<'_, C>, mu: f64, opts: &SolverOptions) -> u64 {
    let g = opts.initial_grid;
    let points: Vec<f64> =
        (0..g).map(|i| if i + 1 == g { work.p_max } else { work.p_max * i as f64 / (g - 1) as f64 }).collect();
    work.set_support(points, vec![1.0; g]);
    let steps = work.run_ba(mu, SEED_STEPS, 1e-6);

    let mut points = Vec::new();
    let mut masses = Vec::new();
    let mut run: Option<(f64, f64)> = None;
    for (&x, &p) in work.points.iter().zip(&work.masses) {
        if p >= CLUSTER_FLOOR {
            let (sx, sp) = run.unwrap_or((0.0, 0.0));
            run = Some((sx + x * p, sp + p));
        } else if let Some((sx, sp)) = run.take() {
            points.push(sx / sp);
            masses.push(sp);
        }
    }
    if let Some((sx, sp)) = run {
        points.push(sx / sp);
        masses.push(sp);
    }
    // Clusters touching the boundary usually belong to it.
    if let Some(first) = points.first_mut() {
        if *first < work.p_max / (g - 1) as f64 {
            *first = 0.0;
        }
    }
    if let Some(last) = points.last_mut() {
        if *last > work.p_max * (1.0 - 1.0 / (g - 1) as f64) {
            *last = work.p_max;
        }
    }
    work.set_support(points, masses);
    steps
}

fn solve_penalized<C: Channel>(work: &mut Work<'_, C>, mu: f64, opts: &SolverOptions) -> Inner {
    let radius = opts.merge_radius * work.p_max;
    let basin = 2.0 * work.p_max / (REFINE_GRID - 1) as f64;
    let budget = opts.max_inner_iterations;
    let mass_target = opts.kkt_target * 1e-2;
    let mut steps = 0u64;
    let mut final_check = false;
    for _ in 0..MAX_ROUNDS {
        steps += work.optimize_masses(mu, mass_target, budget.saturating_sub(steps));
        work.prune(opts.mass_floor);

        let grid = if final_check { opts.certificate_grid } else { REFINE_GRID };
        let (x_star, sup) = work.penalized_sup(mu, grid);
        let objective = work.penalized_objective(mu);
        if sup - objective <= opts.kkt_target {
            if final_check {
                return Inner { steps, converged: true };
            }
            final_check = true;
            continue;
        }
        final_check = false;
        if steps >= budget {
            return Inner { steps, converged: false };
        }
        let moved = work.move_points(mu);
        work.merge(radius.max(0.5 * basin));
        let far = work.distance_to_support(x_star);
        if far > basin || (!moved && far > radius) {
            work.insert(x_star, mu);
        }
    }
    Inner { steps, converged: false }
}

fn finish<C: Channel>(
    work: &mut Work<'_, C>,
    mu: f64,
    channel: &C,
    constraints: &PowerConstraints,
    opts: &SolverOptions,
    iterations: u64,
    converged: bool,
) -> Result<CapacityResult> {
    work.refresh_output();
    let dist = work.distribution();
    let output = OutputDistribution::new(work.out.clone())?;
    let cert = certify(&dist, mu, channel, constraints, &output, opts.certificate_grid);
    let result = CapacityResult {
        capacity_bits: cert.lower_bound,
        constraints: *constraints,
        distribution: dist,
        multiplier: mu,
        lower_bound: cert.lower_bound,
        upper_bound: cert.upper_bound.max(cert.lower_bound),
        kkt_max_violation: cert.max_violation,
        grid_size: opts.certificate_grid,
        iterations,
        y_max: work.y_max,
        epsilon: opts.epsilon,
    };
    if converged && result.gap() <= opts.tol {
        Ok(result)
    } else {
        Err(Error::NotConverged(Box::new(result)))
    }
}

/// Capacity under the given constraints with default options and gap `tol`.
pub fn solve_capacity<C: Channel>(channel: &C, constraints: &PowerConstraints, tol: f64) -> Result<CapacityResult> {
    solve_capacity_with(channel, constraints, &SolverOptions::with_tol(tol))
}

pub fn solve_capacity_with<C: Channel>(
    channel: &C,
    constraints: &PowerConstraints,
    opts: &SolverOptions,
) -> Result<CapacityResult> {
    opts.validate()?;
    let trunc = channel.truncation(constraints.p_max, opts.epsilon)?;
    let p_avg = constraints.effective_avg();
    let mut work = Work::new(channel, trunc.y_max, constraints.p_max);

    let mut iterations = seed_support(&mut work, 0.0, opts);
    let inner = solve_penalized(&mut work, 0.0, opts);
    iterations += inner.steps;
    if work.mean() <= p_avg {
        return finish(&mut work, 0.0, channel, constraints, opts, iterations, inner.converged);
    }

    // E[X] is nonincreasing in μ: bracket, then bisect keeping the feasible end.
    // Concavity of capacity in the average power with C(0) = 0 bounds the
    // optimal multiplier by C(p_avg)/p_avg <= C_unconstrained/p_avg.
    let unconstrained = work.penalized_objective(0.0);
    let mut lo = 0.0;
    let mut hi = (unconstrained / p_avg).max(f64::MIN_POSITIVE) * (1.0 + 1e-9);
    let mut hi_state;
    let mut hi_converged;
    loop {
        let inner = solve_penalized(&mut work, hi, opts);
        iterations += inner.steps;
        if work.mean() <= p_avg {
            hi_state = work.snapshot();
            hi_converged = inner.converged;
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return finish(&mut work, lo, channel, constraints, opts, iterations, false);
        }
    }
    while p_avg - work_mean(&hi_state) > opts.avg_tol * p_avg && hi - lo > 1e-15 * hi {
        let mid = 0.5 * (lo + hi);
        let inner = solve_penalized(&mut work, mid, opts);
        iterations += inner.steps;
        if work.mean() > p_avg {
            lo = mid;
        } else {
            hi = mid;
            hi_state = work.snapshot();
            hi_converged = inner.converged;
        }
    }
    work.set_support(hi_state.0, hi_state.1);
    finish(&mut work, hi, channel, constraints, opts, iterations, hi_converged)
}

fn work_mean(state: &(Vec<f64>, Vec<f64>)) -> f64 {
    state.0.iter().zip(&state.1).map(|(x, p)| x * p).sum()
}

/// Capacity of the state-dependent channel when neither side observes the
/// state: the capacity of the averaged channel.
pub fn capacity_of_state_channel(
    sdc: &StateDependentChannel,
    constraints: &PowerConstraints,
    tol: f64,
) -> Result<CapacityResult> {
    solve_capacity(&sdc.average(), constraints, tol)
}

/// Result of one multiplicative mass update.
#[derive(Debug, Clone, PartialEq)]
pub struct MassUpdate {
    pub distribution: InputDistribution,
    /// Support indices whose mass fell below the floor; candidates for pruning.
    pub below_floor: Vec<usize>,
}

/// `p_j ← p_j · 2^{D(W(·|x̄_j) ‖ P_Y) − μ x̄_j}`, renormalized, support fixed.
pub fn ba_mass_update<C: Channel>(
    dist: &InputDistribution,
    channel: &C,
    mu: f64,
    y_max: u64,
    mass_floor: f64,
) -> Result<MassUpdate> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(invalid(format!("multiplier must be >= 0, got {mu}")));
    }
    let p_max = dist.points().last().copied().unwrap_or(0.0);
    let mut work = Work::new(channel, y_max, p_max);
    work.set_support(dist.points().to_vec(), dist.masses().to_vec());
    work.ba_step(mu);
    let below_floor = (0..work.masses.len()).filter(|&j| work.masses[j] < mass_floor).collect();
    Ok(MassUpdate { distribution: work.distribution(), below_floor })
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
#[allow(clippy::needless_range_loop)]
fn solve_dense(mut m: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = m.len();
    let scale = m.iter().flat_map(|r| r[..n].iter()).fold(0.0f64, |s, v| s.max(v.abs()));
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() <= 1e-300_f64.max(scale * 1e-18) {
            return None;
        }
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
