//! Run configuration: file layer, flag overrides, validation.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use dtpc_core::idcodes::is_prime;
use dtpc_core::{MixtureChannel, PoissonChannel, PowerConstraints, SpectrumConfig, StateDependentChannel};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub weight: f64,
    pub lambda0: f64,
}

/// How `idcode` evaluates its error probabilities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EvalMethod {
    /// Exact when the output grid fits the enumeration budget, else Monte Carlo.
    #[default]
    Auto,
    Exact,
    Mc,
}

/// Every parameter a run uses. Defaults are filled in before the run and
/// echoed with the result, so the echo alone reproduces the payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dark current of a single-state channel. Exclusive with `states`.
    pub lambda0: Option<f64>,
    /// Weighted dark currents of a state-dependent channel.
    pub states: Option<Vec<StateSpec>>,
    pub p_max: f64,
    pub p_avg: f64,
    pub tol: f64,
    pub eps: f64,
    pub seed: u64,
    pub n: usize,
    pub samples: usize,
    pub nu: f64,
    /// `(point, mass)` pairs replacing the optimal input in `spectrum`.
    pub input: Option<Vec<[f64; 2]>>,
    /// Capacity document to reuse instead of solving again.
    pub capacity_from: Option<PathBuf>,
    pub q: u64,
    pub k: u32,
    /// Threshold backoff `C − gamma` in bits; 0.1·C when absent.
    pub delta: Option<f64>,
    pub trials: u64,
    /// Messages whose errors are evaluated.
    pub messages: usize,
    /// Random message pairs for the error of the second kind.
    pub pairs: usize,
    pub method: EvalMethod,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lambda0: None,
            states: None,
            p_max: 5.0,
            p_avg: 5.0,
            tol: 1e-4,
            eps: dtpc_core::channel::DEFAULT_EPSILON,
            seed: 0,
            n: 100,
            samples: 100_000,
            nu: 0.2,
            input: None,
            capacity_from: None,
            q: 31,
            k: 2,
            delta: None,
            trials: 100_000,
            messages: 20,
            pairs: 100,
            method: EvalMethod::Auto,
        }
    }
}

// Aliases keep clap from reading these as repeated flags.
type StateList = Vec<StateSpec>;
type PairList = Vec<[f64; 2]>;

/// Channel selected by the configuration.
#[derive(Debug, Clone)]
pub enum ChannelSpec {
    Poisson(PoissonChannel),
    StateAverage(MixtureChannel),
}

const MIN_TRIALS: u64 = 1_000;

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Fills defaults that depend on other fields and checks every value.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        match (&self.lambda0, &self.states) {
            (Some(_), Some(_)) => return Err(CliError::Validation("give either lambda0 or states, not both".into())),
            (None, None) => self.lambda0 = Some(1.0),
            _ => {}
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Validation(msg));
        self.channel()?;
        self.constraints()?;
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return bad(format!("tol must be > 0, got {}", self.tol));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("eps must lie in (0,1), got {}", self.eps));
        }
        // TOML integers are signed 64-bit.
        if self.seed > i64::MAX as u64 {
            return bad(format!("seed must be <= {}, got {}", i64::MAX, self.seed));
        }
        SpectrumConfig::new(self.n, self.samples, self.seed, self.nu)?;
        if let Some(pairs) = &self.input {
            if pairs.is_empty() {
                return bad("input needs at least one (point, mass) pair".into());
            }
        }
        if !is_prime(self.q) {
            return bad(format!("q must be prime, got {}", self.q));
        }
        if self.k == 0 || u64::from(self.k) >= self.q {
            return bad(format!("k must satisfy 1 <= k < q, got k={} q={}", self.k, self.q));
        }
        match self.q.checked_pow(self.k) {
            Some(count) if count <= i64::MAX as u64 => {}
            _ => return bad(format!("q^k = {}^{} is too large", self.q, self.k)),
        }
        if let Some(d) = self.delta {
            if !(d.is_finite() && d >= 0.0) {
                return bad(format!("delta must be finite and >= 0, got {d}"));
            }
        }
        if self.trials < MIN_TRIALS {
            return bad(format!("trials must be >= {MIN_TRIALS}, got {}", self.trials));
        }
        if self.messages == 0 {
            return bad("need at least one evaluated message".into());
        }
        Ok(())
    }

    pub fn channel(&self) -> Result<ChannelSpec, CliError> {
        match (&self.lambda0, &self.states) {
            (Some(l), None) => Ok(ChannelSpec::Poisson(PoissonChannel::new(*l)?)),
            (None, Some(states)) => {
                let states = states.iter().map(|s| Ok((s.weight, PoissonChannel::new(s.lambda0)?))).collect::<Result<
                    Vec<_>,
                    dtpc_core::Error,
                >>(
                )?;
                Ok(ChannelSpec::StateAverage(StateDependentChannel::new(states)?.average()))
            }
            _ => Err(CliError::Validation("exactly one of lambda0 and states must be set".into())),
        }
    }

    pub fn constraints(&self) -> Result<PowerConstraints, CliError> {
        Ok(PowerConstraints::new(self.p_max, self.p_avg)?)
    }

    pub fn spectrum_config(&self) -> SpectrumConfig {
        SpectrumConfig { n: self.n, num_samples: self.samples, seed: self.seed, nu: self.nu }
    }
}

/// Command-line flags shared by all subcommands. Set flags override the
/// config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dark current of a single-state channel.
    #[arg(long)]
    pub lambda0: Option<f64>,
    /// State list as `weight:lambda0,weight:lambda0,...`.
    #[arg(long, value_parser = parse_states)]
    pub states: Option<StateList>,
    /// Peak power.
    #[arg(long)]
    pub pmax: Option<f64>,
    /// Average power.
    #[arg(long)]
    pub pavg: Option<f64>,
    /// Capacity gap tolerance, bits.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output truncation: discarded tail mass per symbol.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Blocklength.
    #[arg(long)]
    pub n: Option<usize>,
    /// Monte Carlo blocks for the spectrum.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Tail threshold below capacity, bits.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Input law as `point:mass,point:mass,...` (spectrum only).
    #[arg(long, value_parser = parse_input)]
    pub input: Option<PairList>,
    /// Reuse the optimal law from a capacity result document.
    #[arg(long)]
    pub capacity_from: Option<PathBuf>,
    /// Prime field size of the tag code.
    #[arg(long)]
    pub q: Option<u64>,
    /// Tag polynomial degree bound.
    #[arg(long)]
    pub k: Option<u32>,
    /// Decoding threshold backoff below capacity, bits.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Monte Carlo trials per error estimate.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Messages whose first-kind error is evaluated.
    #[arg(long)]
    pub messages: Option<usize>,
    /// Random message pairs for the second-kind error.
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Error evaluation method.
    #[arg(long, value_enum)]
    pub method: Option<EvalMethod>,
    /// Result document path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-sample rates as CSV (spectrum only).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl Flags {
    /// Config file (or defaults) with the given flags applied, resolved.
    pub fn to_config(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.lambda0 {
            c.lambda0 = Some(v);
            c.states = None;
        }
        if let Some(v) = &self.states {
            c.states = Some(v.clone());
            c.lambda0 = None;
        }
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = &self.$flag { c.$field = v.clone(); })*
            };
        }
        set!(pmax => p_max, pavg => p_avg, tol => tol, eps => eps, seed => seed, n => n, samples => samples,
            nu => nu, q => q, k => k, trials => trials, messages => messages, pairs => pairs, method => method);
        if let Some(v) = &self.input {
            c.input = Some(v.clone());
        }
        if let Some(v) = &self.capacity_from {
            c.capacity_from = Some(v.clone());
        }
        if let Some(v) = self.delta {
            c.delta = Some(v);
        }
        c.resolve()
    }
}

fn parse_pairs(s: &str) -> Result<Vec<(f64, f64)>, String> {
    s.split(',')
        .map(|item| {
            let (a, b) = item.split_once(':').ok_or_else(|| format!("expected a:b, got {item:?}"))?;
            let a = a.trim().parse::<f64>().map_err(|e| format!("{a:?}: {e}"))?;
            let b = b.trim().parse::<f64>().map_err(|e| format!("{b:?}: {e}"))?;
            Ok((a, b))
        })
        .collect()
}

fn parse_states(s: &str) -> Result<StateList, String> {
    Ok(parse_pairs(s)?.into_iter().map(|(weight, lambda0)| StateSpec { weight, lambda0 }).collect())
}

fn parse_input(s: &str) -> Result<PairList, String> {
    Ok(parse_pairs(s)?.into_iter().map(|(x, p)| [x, p]).collect())
}
