//! Randomized identification codes over the Poisson channel.
//!
//! The construction concatenates a random transmission code of `q²`
//! codewords, indexed by pairs `(u, v)` over `GF(q)`, with polynomial tags:
//! message `i` is a polynomial `p_i` of degree `< k`, and its encoder sends
//! `c_(u, p_i(u))` for `u` drawn uniformly. The decoder for message `j`
//! accepts `yⁿ` when the information density of some tagged codeword
//! `c_(u, p_j(u))` exceeds `gamma`. Two messages share at most `k − 1` tags,
//! which keeps errors of the second kind small while `N = q^k` grows
//! geometrically in `k`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::{output_distribution, InputDistribution, OutputDistribution};
use crate::channel::Channel;
use crate::error::{invalid, Error, Result};
use crate::stats::{derive_seed, stream_rng, Interval, Proportion};
use crate::tables::{InputSampler, SymbolTables};

/// Default cap on `(y_max + 1)ⁿ` for exact enumeration.
pub const ENUMERATION_BUDGET: f64 = 1e7;

/// Confidence level of Monte Carlo intervals.
pub const CONFIDENCE: f64 = 0.99;

/// Construction gives up once more than this fraction of draws is rejected.
const MAX_REJECTION_RATE: f64 = 0.99;
/// Draws made before the rejection rate is judged.
const MIN_DRAWS_FOR_ABORT: u64 = 1000;

const TAG_FIRST_KIND: u64 = 1;
const TAG_SECOND_KIND: u64 = 2;
const TAG_PAIRS: u64 = 3;

pub fn is_prime(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= q {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Messages `0..q^k` as polynomials of degree `< k` over `GF(q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagFamily {
    q: u64,
    k: u32,
}

pub fn build_tag_family(q: u64, k: u32) -> Result<TagFamily> {
    TagFamily::new(q, k)
}

impl TagFamily {
    pub fn new(q: u64, k: u32) -> Result<Self> {
        if !is_prime(q) {
            return Err(invalid(format!("q must be prime, got {q}")));
        }
        if k == 0 || u64::from(k) >= q {
            return Err(invalid(format!("need 1 <= k < q, got k = {k}, q = {q}")));
        }
        if q.checked_pow(k).is_none() || q.checked_mul(q).is_none() {
            return Err(invalid(format!("q^k = {q}^{k} does not fit in 64 bits")));
        }
        Ok(Self { q, k })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// `N = q^k`.
    pub fn message_count(&self) -> u64 {
        self.q.pow(self.k)
    }

    /// Coefficients of `p_i`, constant term first (the base-`q` digits of `i`).
    pub fn coefficients(&self, i: u64) -> Vec<u64> {
        let mut rest = i;
        (0..self.k)
            .map(|_| {
                let d = rest % self.q;
                rest /= self.q;
                d
            })
            .collect()
    }

    pub fn message_from_coefficients(&self, coeffs: &[u64]) -> u64 {
        coeffs.iter().rev().fold(0, |acc, &c| acc * self.q + c % self.q)
    }

    /// `p_i(u)` over `GF(q)`.
    pub fn eval(&self, i: u64, u: u64) -> u64 {
        self.coefficients(i).iter().rev().fold(0, |acc, &c| (acc * u + c) % self.q)
    }

    /// `T_i(u) = (u, p_i(u))`.
    pub fn tag(&self, i: u64, u: u64) -> (u64, u64) {
        (u, self.eval(i, u))
    }

    /// `|{u : p_i(u) = p_j(u)}|`.
    pub fn agreement(&self, i: u64, j: u64) -> usize {
        (0..self.q).filter(|&u| self.eval(i, u) == self.eval(j, u)).count()
    }

    /// A message agreeing with `i` on exactly `k − 1` points: `p_i` plus
    /// `c · Π_{r=1}^{k−1} (u − r)`, `c ≠ 0`.
    pub fn worst_partner(&self, i: u64, c: u64) -> u64 {
        let q = self.q;
        let mut prod = vec![1u64];
        for r in 1..u64::from(self.k) {
            let mut next = vec![0u64; prod.len() + 1];
            for (d, &a) in prod.iter().enumerate() {
                next[d + 1] = (next[d + 1] + a) % q;
                next[d] = (next[d] + (q - r % q) * a) % q;
            }
            prod = next;
        }
        let c = c % q;
        let coeffs: Vec<u64> = self.coefficients(i).iter().zip(&prod).map(|(&a, &b)| (a + c * b) % q).collect();
        self.message_from_coefficients(&coeffs)
    }
}

/// `(k − 1)/q`: the largest fraction of tags two messages can share.
pub fn tag_collision_bound(q: u64, k: u32) -> Result<f64> {
    let tags = TagFamily::new(q, k)?;
    Ok(f64::from(tags.k - 1) / tags.q as f64)
}

/// `log₂(log₂ N) / n`.
pub fn id_rate(messages: u64, n: usize) -> Result<f64> {
    if messages < 2 {
        return Err(invalid(format!("need N >= 2, got {messages}")));
    }
    if n == 0 {
        return Err(invalid("blocklength must be >= 1"));
    }
    Ok((messages as f64).log2().log2() / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionParams {
    /// Blocklength.
    pub n: usize,
    /// Number of codewords `M`.
    pub codewords: usize,
    /// Decoding threshold on the information density, bits.
    pub gamma: f64,
    /// Per-codeword bound on `(1/n) Σ x_t`.
    pub p_avg: f64,
    /// Output truncation for the decoder's tables.
    pub epsilon: f64,
    pub seed: u64,
}

impl TransmissionParams {
    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("blocklength must be >= 1"));
        }
        if self.codewords == 0 {
            return Err(invalid("need at least one codeword"));
        }
        if self.gamma.is_nan() {
            return Err(invalid("gamma must not be NaN"));
        }
        if !(self.p_avg.is_finite() && self.p_avg > 0.0) {
            return Err(invalid(format!("p_avg must be finite and > 0, got {}", self.p_avg)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!("epsilon must lie in (0,1), got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Random codebook with an information-density threshold decoder measured
/// against the output law of the codebook distribution.
pub struct TransmissionCode {
    params: TransmissionParams,
    dist: InputDistribution,
    /// Codeword symbols as indices into the support of `dist`.
    symbols: Vec<Vec<u32>>,
    rejections: u64,
    output: OutputDistribution,
    tables: SymbolTables,
}

/// Draws `params.codewords` codewords i.i.d. from `dist`, redrawing any
/// whose empirical average power exceeds `params.p_avg`.
pub fn build_transmission_code<C: Channel>(
    dist: &InputDistribution,
    channel: &C,
    params: &TransmissionParams,
) -> Result<TransmissionCode> {
    params.validate()?;
    if dist.is_empty() {
        return Err(invalid("empty input distribution"));
    }
    let p_max = dist.points()[dist.len() - 1];
    let y_max = channel.truncation(p_max, params.epsilon)?.y_max;
    let output = output_distribution(dist, channel, y_max);
    let tables = SymbolTables::new(channel, dist.points(), &output);
    let sampler = InputSampler::new(dist.masses());
    let limit = params.p_avg * params.n as f64 * (1.0 + 1e-12);

    let mut symbols = Vec::with_capacity(params.codewords);
    let mut rejections = 0u64;
    let mut draws = 0u64;
    for m in 0..params.codewords as u64 {
        let mut rng = stream_rng(params.seed, m);
        loop {
            let word: Vec<u32> = (0..params.n).map(|_| sampler.sample(&mut rng) as u32).collect();
            draws += 1;
            let power: f64 = word.iter().map(|&s| dist.points()[s as usize]).sum();
            if power <= limit {
                symbols.push(word);
                break;
            }
            rejections += 1;
            if draws >= MIN_DRAWS_FOR_ABORT && rejections as f64 > MAX_REJECTION_RATE * draws as f64 {
                return Err(Error::Construction(format!(
                    "{rejections} of {draws} codeword draws violated the average-power limit {}; \
                     the input distribution (mean {}) is inconsistent with the constraint",
                    params.p_avg,
                    dist.mean()
                )));
            }
        }
    }
    Ok(TransmissionCode { params: *params, dist: dist.clone(), symbols, rejections, output, tables })
}

impl TransmissionCode {
    pub fn params(&self) -> &TransmissionParams {
        &self.params
    }

    pub fn distribution(&self) -> &InputDistribution {
        &self.dist
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn gamma(&self) -> f64 {
        self.params.gamma
    }

    /// Redraws caused by the average-power limit.
    pub fn rejections(&self) -> u64 {
        self.rejections
    }

    /// The decoder's reference output law.
    pub fn output(&self) -> &OutputDistribution {
        &self.output
    }

    pub fn y_max(&self) -> u64 {
        self.tables.y_max()
    }

    pub fn codeword(&self, m: usize) -> Vec<f64> {
        self.symbols[m].iter().map(|&s| self.dist.points()[s as usize]).collect()
    }

    /// `(1/n) Σ_t x_t` of codeword `m`.
    pub fn codeword_power(&self, m: usize) -> f64 {
        self.symbols[m].iter().map(|&s| self.dist.points()[s as usize]).sum::<f64>() / self.params.n as f64
    }

    /// Information density of codeword `m` against `y`, from per-position
    /// densities `dens[t][s]` of every support symbol `s`.
    fn rate_from(&self, m: usize, dens: &[Vec<f64>]) -> f64 {
        self.symbols[m].iter().zip(dens).map(|(&s, d)| d[s as usize]).sum::<f64>() / self.params.n as f64
    }

    fn position_densities<C: Channel>(&self, channel: &C, y: &[u64], dens: &mut Vec<Vec<f64>>) {
        dens.resize(y.len(), Vec::new());
        for (d, &yt) in dens.iter_mut().zip(y) {
            d.clear();
            d.extend((0..self.dist.len()).map(|s| self.tables.density(channel, s, yt).0));
        }
    }
}

/// Identification code over a transmission code with `q²` codewords.
pub struct IdCode {
    tcode: TransmissionCode,
    tags: TagFamily,
    messages: Vec<u64>,
}

/// Binds tags to codewords. `messages` names the messages that evaluations
/// iterate over; the others remain reachable on demand.
pub fn assemble_id_code(tcode: TransmissionCode, tags: TagFamily, messages: Vec<u64>) -> Result<IdCode> {
    let q = tags.q();
    if tcode.len() as u64 != q * q {
        return Err(invalid(format!("transmission code has {} codewords, need q^2 = {}", tcode.len(), q * q)));
    }
    if let Some(&bad) = messages.iter().find(|&&i| i >= tags.message_count()) {
        return Err(invalid(format!("message {bad} out of range 0..{}", tags.message_count())));
    }
    Ok(IdCode { tcode, tags, messages })
}

impl IdCode {
    pub fn transmission(&self) -> &TransmissionCode {
        &self.tcode
    }

    pub fn tags(&self) -> &TagFamily {
        &self.tags
    }

    pub fn messages(&self) -> &[u64] {
        &self.messages
    }

    pub fn message_count(&self) -> u64 {
        self.tags.message_count()
    }

    /// Codeword index of tag `(u, v)`.
    pub fn codeword_index(&self, u: u64, v: u64) -> usize {
        (u * self.tags.q() + v) as usize
    }

    /// Codewords sent with equal probability for message `i`, indexed by `u`.
    pub fn encoder_support(&self, i: u64) -> Vec<usize> {
        (0..self.tags.q()).map(|u| self.codeword_index(u, self.tags.eval(i, u))).collect()
    }

    /// `yⁿ ∈ D_j`.
    pub fn in_decoding_set<C: Channel>(&self, channel: &C, j: u64, y: &[u64]) -> Result<bool> {
        if y.len() != self.tcode.n() {
            return Err(invalid(format!("output length {} != blocklength {}", y.len(), self.tcode.n())));
        }
        let mut dens = Vec::new();
        self.tcode.position_densities(channel, y, &mut dens);
        Ok(self.decodes(&self.encoder_support(j), &dens, 0))
    }

    /// Whether any codeword in `support` clears the threshold, trying
    /// `support[first]` first.
    fn decodes(&self, support: &[usize], dens: &[Vec<f64>], first: usize) -> bool {
        let gamma = self.tcode.gamma();
        let q = support.len();
        (0..q).any(|k| self.tcode.rate_from(support[(first + k) % q], dens) > gamma)
    }

    /// Enough to rebuild this code bit-exactly with [`IdCode::from_descriptor`].
    pub fn descriptor(&self) -> CodeDescriptor {
        CodeDescriptor {
            q: self.tags.q(),
            k: self.tags.k(),
            params: self.tcode.params,
            distribution: self.tcode.dist.clone(),
            messages: self.messages.clone(),
        }
    }

    pub fn from_descriptor<C: Channel>(desc: &CodeDescriptor, channel: &C) -> Result<Self> {
        let tags = TagFamily::new(desc.q, desc.k)?;
        let tcode = build_transmission_code(&desc.distribution, channel, &desc.params)?;
        assemble_id_code(tcode, tags, desc.messages.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeDescriptor {
    pub q: u64,
    pub k: u32,
    pub params: TransmissionParams,
    pub distribution: InputDistribution,
    pub messages: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageError {
    pub message: u64,
    pub estimate: f64,
    pub interval: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairError {
    pub sender: u64,
    pub decoder: u64,
    /// Tags the two messages share.
    pub agreement: usize,
    /// Chosen for maximal agreement rather than at random.
    pub worst_case: bool,
    pub estimate: f64,
    pub interval: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub method: Method,
    pub mu1_max: f64,
    pub mu1_per_message: Vec<MessageError>,
    pub mu2_max: f64,
    pub mu2_sampled_pairs: Vec<PairError>,
    pub num_trials: Option<u64>,
    pub confidence_level: Option<f64>,
    /// Largest interval half-width among the estimates.
    pub ci_halfwidth: Option<f64>,
}

impl ErrorReport {
    /// `μ1_max + μ2_max < 1`.
    pub fn admissible(&self) -> bool {
        self.mu1_max + self.mu2_max < 1.0
    }

    fn assemble(method: Method, mu1: Vec<MessageError>, mu2: Vec<PairError>, num_trials: Option<u64>) -> Self {
        let mu1_max = mu1.iter().map(|e| e.estimate).fold(0.0, f64::max);
        let mu2_max = mu2.iter().map(|e| e.estimate).fold(0.0, f64::max);
        let widths = mu1.iter().filter_map(|e| e.interval).chain(mu2.iter().filter_map(|e| e.interval));
        let ci_halfwidth = num_trials.map(|_| widths.map(|i| i.half_width()).fold(0.0, f64::max));
        Self {
            method,
            mu1_max,
            mu1_per_message: mu1,
            mu2_max,
            mu2_sampled_pairs: mu2,
            num_trials,
            confidence_level: num_trials.map(|_| CONFIDENCE),
            ci_halfwidth,
        }
    }
}

/// Ordered pairs for the second kind: `pair_sample_size` random pairs with
/// the sender among the evaluated messages, then each evaluated message with
/// a partner sharing the most tags.
pub fn select_pairs(code: &IdCode, pair_sample_size: usize, seed: u64) -> Vec<(u64, u64, bool)> {
    let n_msgs = code.message_count();
    let mut pairs = Vec::new();
    if code.messages.is_empty() {
        return pairs;
    }
    let mut rng = stream_rng(derive_seed(seed, TAG_PAIRS), 0);
    for _ in 0..pair_sample_size {
        let i = code.messages[rng.random_range(0..code.messages.len())];
        let mut j = rng.random_range(0..n_msgs);
        while j == i {
            j = rng.random_range(0..n_msgs);
        }
        pairs.push((i, j, false));
    }
    for &i in &code.messages {
        pairs.push((i, code.tags.worst_partner(i, 1), true));
    }
    pairs
}

/// `(1/q) Σ_u Σ_{yⁿ ∈ D_j} Wⁿ(yⁿ | c_(u, p_i(u)))` over the truncated grid,
/// and the mass the grid misses.
fn exact_acceptance<C: Channel>(code: &IdCode, channel: &C, i: u64, j: u64, budget: f64) -> Result<(f64, f64)> {
    let tc = &code.tcode;
    let n = tc.n();
    let base = tc.y_max() + 1;
    let required = (base as f64).powi(n as i32);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let total = base.pow(n as u32);
    let senders = code.encoder_support(i);
    let deciders = code.encoder_support(j);
    let q = senders.len() as f64;

    const CHUNK: u64 = 4096;
    let partial: Vec<f64> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut y = vec![0u64; n];
            let mut dens = Vec::new();
            let mut acc = 0.0;
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let mut rest = idx;
                for yt in y.iter_mut() {
                    *yt = rest % base;
                    rest /= base;
                }
                tc.position_densities(channel, &y, &mut dens);
                if !code.decodes(&deciders, &dens, 0) {
                    continue;
                }
                for &m in &senders {
                    acc += tc.symbols[m]
                        .iter()
                        .zip(&y)
                        .map(|(&s, &yt)| tc.tables.prob_row(s as usize)[yt as usize])
                        .product::<f64>();
                }
            }
            acc
        })
        .collect();
    let accepted = partial.iter().sum::<f64>() / q;
    let covered = senders
        .iter()
        .map(|&m| tc.symbols[m].iter().map(|&s| tc.tables.covered_mass(s as usize)).product::<f64>())
        .sum::<f64>()
        / q;
    Ok((accepted, (1.0 - covered).max(0.0)))
}

/// `μ1^(i) = (1/q) Σ_u Wⁿ(D_iᶜ | c_(u, p_i(u)))` by enumeration of the
/// truncated output grid. Sequences outside the grid count as errors.
pub fn error_first_kind_exact<C: Channel>(code: &IdCode, channel: &C, i: u64, budget: f64) -> Result<f64> {
    check_message(code, i)?;
    let (accepted, _) = exact_acceptance(code, channel, i, i, budget)?;
    Ok((1.0 - accepted).clamp(0.0, 1.0))
}

/// `μ2^(i,j) = (1/q) Σ_u Wⁿ(D_j | c_(u, p_i(u)))` by enumeration; sequences
/// outside the grid count as accepted.
pub fn error_second_kind_exact<C: Channel>(code: &IdCode, channel: &C, i: u64, j: u64, budget: f64) -> Result<f64> {
    check_message(code, i)?;
    check_message(code, j)?;
    if i == j {
        return Err(invalid("the error of the second kind needs distinct messages"));
    }
    let (accepted, missed) = exact_acceptance(code, channel, i, j, budget)?;
    Ok((accepted + missed).clamp(0.0, 1.0))
}

fn check_message(code: &IdCode, i: u64) -> Result<()> {
    if i >= code.message_count() {
        return Err(invalid(format!("message {i} out of range 0..{}", code.message_count())));
    }
    Ok(())
}

/// Exact errors for every evaluated message and every selected pair.
pub fn evaluate_errors_exact<C: Channel>(
    code: &IdCode,
    channel: &C,
    pair_sample_size: usize,
    seed: u64,
    budget: f64,
) -> Result<ErrorReport> {
    let mut mu1 = Vec::new();
    for &i in &code.messages {
        let estimate = error_first_kind_exact(code, channel, i, budget)?;
        mu1.push(MessageError { message: i, estimate, interval: None });
    }
    let mut mu2 = Vec::new();
    for (i, j, worst_case) in select_pairs(code, pair_sample_size, seed) {
        let estimate = error_second_kind_exact(code, channel, i, j, budget)?;
        mu2.push(PairError {
            sender: i,
            decoder: j,
            agreement: code.tags.agreement(i, j),
            worst_case,
            estimate,
            interval: None,
        });
    }
    Ok(ErrorReport::assemble(Method::Exact, mu1, mu2, None))
}

/// Fraction of `trials` transmissions of message `i` that land in `D_j`.
fn count_acceptances<C: Channel>(code: &IdCode, channel: &C, i: u64, j: u64, trials: u64, seed: u64) -> u64 {
    let tc = &code.tcode;
    let q = code.tags.q();
    let senders = code.encoder_support(i);
    let deciders = code.encoder_support(j);
    (0..trials)
        .into_par_iter()
        .map_init(
            || (vec![0u64; tc.n()], Vec::new()),
            |(y, dens), t| {
                let mut rng = stream_rng(seed, t);
                let u = rng.random_range(0..q) as usize;
                let m = senders[u];
                for (yt, &s) in y.iter_mut().zip(&tc.symbols[m]) {
                    *yt = tc.tables.sample_output(channel, s as usize, &mut rng);
                }
                tc.position_densities(channel, y, dens);
                // When decoding the sender's own message, its transmitted
                // codeword is the likeliest to clear the threshold.
                let first = if i == j { u } else { 0 };
                u64::from(code.decodes(&deciders, dens, first))
            },
        )
        .sum()
}

/// Monte Carlo errors of both kinds with 99% Clopper–Pearson intervals.
///
/// Each estimate draws from its own seed derived from `seed`, and each trial
/// from its own stream, so results do not depend on the thread count.
pub fn estimate_errors_mc<C: Channel>(
    code: &IdCode,
    channel: &C,
    trials: u64,
    seed: u64,
    pair_sample_size: usize,
) -> Result<ErrorReport> {
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let first_seed = derive_seed(seed, TAG_FIRST_KIND);
    let second_seed = derive_seed(seed, TAG_SECOND_KIND);
    let mut mu1 = Vec::new();
    for (idx, &i) in code.messages.iter().enumerate() {
        let hits = count_acceptances(code, channel, i, i, trials, derive_seed(first_seed, idx as u64));
        let p = Proportion::new(trials - hits, trials, CONFIDENCE)?;
        mu1.push(MessageError { message: i, estimate: p.estimate, interval: Some(p.interval) });
    }
    let mut mu2 = Vec::new();
    for (idx, (i, j, worst_case)) in select_pairs(code, pair_sample_size, seed).into_iter().enumerate() {
        let hits = count_acceptances(code, channel, i, j, trials, derive_seed(second_seed, idx as u64));
        let p = Proportion::new(hits, trials, CONFIDENCE)?;
        mu2.push(PairError {
            sender: i,
            decoder: j,
            agreement: code.tags.agreement(i, j),
            worst_case,
            estimate: p.estimate,
            interval: Some(p.interval),
        });
    }
    Ok(ErrorReport::assemble(Method::MonteCarlo, mu1, mu2, Some(trials)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PoissonChannel;

    #[test]
    fn primes() {
        let small: Vec<u64> = (0..30).filter(|&q| is_prime(q)).collect();
        assert_eq!(small, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
    }

    #[test]
    fn tag_family_validation() {
        assert!(TagFamily::new(4, 1).is_err());
        assert!(TagFamily::new(5, 0).is_err());
        assert!(TagFamily::new(5, 5).is_err());
        assert_eq!(TagFamily::new(31, 8).unwrap().message_count(), 852_891_037_441);
    }

    #[test]
    fn coefficients_round_trip() {
        let t = TagFamily::new(7, 3).unwrap();
        for i in [0, 1, 48, 200, 342] {
            assert_eq!(t.message_from_coefficients(&t.coefficients(i)), i);
        }
        // 2 + 3u + u² at u = 4 over GF(7): 2 + 12 + 16 = 30 = 2 (mod 7)
        let i = t.message_from_coefficients(&[2, 3, 1]);
        assert_eq!(t.eval(i, 4), 2);
    }

    #[test]
    fn worst_partner_shares_k_minus_one_tags() {
        for (q, k) in [(5, 1), (5, 2), (7, 3), (31, 8)] {
            let t = TagFamily::new(q, k).unwrap();
            for i in [0, 1, t.message_count() - 1] {
                let j = t.worst_partner(i, 1);
                assert_ne!(i, j);
                assert_eq!(t.agreement(i, j), (k - 1) as usize);
            }
        }
    }

    #[test]
    fn rate_examples() {
        assert_eq!(id_rate(16, 2).unwrap(), 1.0);
        assert_eq!(id_rate(2, 5).unwrap(), 0.0);
        assert!(id_rate(1, 5).is_err());
        assert_eq!(tag_collision_bound(5, 1).unwrap(), 0.0);
        assert_eq!(tag_collision_bound(5, 2).unwrap(), 0.2);
    }

    fn small_code(gamma: f64) -> (PoissonChannel, IdCode) {
        let ch = PoissonChannel::new(1.0).unwrap();
        let dist = InputDistribution::from_pairs(&[(0.0, 0.5), (5.0, 0.5)]).unwrap();
        let params = TransmissionParams { n: 2, codewords: 9, gamma, p_avg: 5.0, epsilon: 1e-8, seed: 3 };
        let tcode = build_transmission_code(&dist, &ch, &params).unwrap();
        let code = assemble_id_code(tcode, TagFamily::new(3, 1).unwrap(), vec![0, 1, 2]).unwrap();
        (ch, code)
    }

    #[test]
    fn infinite_thresholds() {
        let (ch, code) = small_code(f64::NEG_INFINITY);
        assert!(error_first_kind_exact(&code, &ch, 0, ENUMERATION_BUDGET).unwrap() < 1e-7);
        assert!(error_second_kind_exact(&code, &ch, 0, 1, ENUMERATION_BUDGET).unwrap() > 1.0 - 1e-12);
        let r = estimate_errors_mc(&code, &ch, 1000, 1, 0).unwrap();
        assert_eq!(r.mu1_max, 0.0);

        let (ch, code) = small_code(f64::INFINITY);
        assert!(error_first_kind_exact(&code, &ch, 0, ENUMERATION_BUDGET).unwrap() > 1.0 - 1e-12);
        assert!(error_second_kind_exact(&code, &ch, 0, 1, ENUMERATION_BUDGET).unwrap() < 1e-7);
    }

    #[test]
    fn same_message_pair_rejected() {
        let (ch, code) = small_code(0.5);
        assert!(error_second_kind_exact(&code, &ch, 1, 1, ENUMERATION_BUDGET).is_err());
    }

    #[test]
    fn budget_enforced() {
        let (ch, code) = small_code(0.5);
        assert!(matches!(error_first_kind_exact(&code, &ch, 0, 10.0), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn wrong_codebook_size_rejected() {
        let ch = PoissonChannel::new(1.0).unwrap();
        let dist = InputDistribution::point_mass(1.0).unwrap();
        let params = TransmissionParams { n: 2, codewords: 8, gamma: 0.0, p_avg: 5.0, epsilon: 1e-8, seed: 3 };
        let tcode = build_transmission_code(&dist, &ch, &params).unwrap();
        assert!(assemble_id_code(tcode, TagFamily::new(3, 1).unwrap(), vec![0]).is_err());
    }

    #[test]
    fn infeasible_average_aborts() {
        let ch = PoissonChannel::new(1.0).unwrap();
        let dist = InputDistribution::point_mass(4.0).unwrap();
        let params = TransmissionParams { n: 4, codewords: 4, gamma: 0.0, p_avg: 1.0, epsilon: 1e-8, seed: 0 };
        assert!(matches!(build_transmission_code(&dist, &ch, &params), Err(Error::Construction(_))));
    }
}
