use std::path::Path;
use std::time::Instant;

use dtpc_core::idcodes::{evaluate_errors_exact, CodeDescriptor, ErrorReport, ENUMERATION_BUDGET};
use dtpc_core::spectrum::sample_rates;
use dtpc_core::stats::{derive_seed, stream_rng};
use dtpc_core::*;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::config::{ChannelSpec, EvalMethod, RunConfig};
use crate::{CliError, Command, ResultDocument};

/// Grid of the KKT check reported with every capacity result.
const KKT_GRID: usize = 10_000;
/// Seed tag for choosing which messages an ID-code run evaluates.
const TAG_MESSAGES: u64 = 100;

macro_rules! with_channel {
    ($spec:expr, |$ch:ident| $body:expr) => {
        match $spec {
            ChannelSpec::Poisson($ch) => $body,
            ChannelSpec::StateAverage($ch) => $body,
        }
    };
}

#[derive(Debug, Serialize, Deserialize)]
struct KktSummary {
    grid_size: usize,
    min_lagrangian: f64,
    support_residual: f64,
    argmax: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CapacityPayload {
    converged: bool,
    capacity_bits: f64,
    gap: f64,
    multiplier: f64,
    mean_power: f64,
    support_size: usize,
    kkt: KktSummary,
    result: CapacityResult,
}

fn solver_options(config: &RunConfig) -> SolverOptions {
    SolverOptions { tol: config.tol, epsilon: config.eps, ..SolverOptions::default() }
}

pub fn cmd_capacity(config: &RunConfig) -> Result<ResultDocument, CliError> {
    let started = Instant::now();
    let constraints = config.constraints()?;
    with_channel!(config.channel()?, |ch| {
        let (result, converged) = match solve_capacity_with(&ch, &constraints, &solver_options(config)) {
            Ok(r) => (r, true),
            Err(Error::NotConverged(best)) => (*best, false),
            Err(e) => return Err(e.into()),
        };
        let cert = kkt_certificate(&result.distribution, result.multiplier, &ch, &constraints, result.y_max, KKT_GRID)?;
        let payload = CapacityPayload {
            converged,
            capacity_bits: result.capacity_bits,
            gap: result.gap(),
            multiplier: result.multiplier,
            mean_power: result.distribution.mean(),
            support_size: result.support_size(),
            kkt: KktSummary {
                grid_size: KKT_GRID,
                min_lagrangian: cert.min_lagrangian(),
                support_residual: cert.support_residual,
                argmax: cert.argmax,
            },
            result,
        };
        let doc = ResultDocument::new(Command::Capacity, config, started, &payload)?;
        if converged {
            Ok(doc)
        } else {
            Err(CliError::NotConverged { document: Some(Box::new(doc)) })
        }
    })
}

/// The capacity-achieving law: loaded from `capacity_from` or solved here.
fn optimal<C: Channel>(config: &RunConfig, channel: &C) -> Result<CapacityResult, CliError> {
    let constraints = config.constraints()?;
    let Some(path) = &config.capacity_from else {
        return solve_capacity_with(channel, &constraints, &solver_options(config)).map_err(CliError::from);
    };
    let doc = ResultDocument::load(path)?;
    let from = |msg: &str| CliError::Validation(format!("{}: {msg}", path.display()));
    if doc.command != Command::Capacity {
        return Err(from("not a capacity result"));
    }
    if doc.config.lambda0 != config.lambda0 || doc.config.states != config.states {
        return Err(from("channel differs from this run's"));
    }
    let payload: CapacityPayload =
        toml::Value::Table(doc.payload).try_into().map_err(|e| from(&format!("bad capacity payload: {e}")))?;
    if payload.result.constraints != constraints {
        return Err(from("power constraints differ from this run's"));
    }
    if !payload.converged {
        return Err(CliError::NotConverged { document: None });
    }
    Ok(payload.result)
}

#[derive(Debug, Serialize)]
struct SpectrumPayload {
    capacity_bits: f64,
    capacity_gap: f64,
    /// Whether `input` is the capacity-achieving law.
    optimal_input: bool,
    input: InputDistribution,
    estimate: SpectrumEstimate,
}

/// A spectrum document with the per-sample rates behind it.
pub struct SpectrumRun {
    pub document: ResultDocument,
    pub rates: Vec<f64>,
}

pub fn cmd_spectrum(config: &RunConfig) -> Result<SpectrumRun, CliError> {
    let started = Instant::now();
    let spec = config.channel()?;
    let bounds_required = matches!(spec, ChannelSpec::Poisson(_));
    with_channel!(spec, |ch| {
        let lambda0 = match ch.bound_dark_current() {
            Ok(l) => Some(l),
            Err(e) if bounds_required => return Err(e.into()),
            Err(_) => None,
        };
        let opt = optimal(config, &ch)?;
        let input = match &config.input {
            Some(pairs) => {
                let pairs: Vec<(f64, f64)> = pairs.iter().map(|p| (p[0], p[1])).collect();
                let dist = InputDistribution::from_pairs(&pairs)?;
                dist.check_constraints(&opt.constraints)?;
                dist
            }
            None => opt.distribution.clone(),
        };
        let sconfig = config.spectrum_config();
        let samples = sample_rates(&input, &ch, &opt.output_law(&ch), &sconfig)?;
        let bounds = lambda0.map(|l| (l, opt.constraints.p_max));
        let estimate = SpectrumEstimate::from_samples(&samples, &sconfig, opt.capacity_bits, bounds)?;
        let payload = SpectrumPayload {
            capacity_bits: opt.capacity_bits,
            capacity_gap: opt.gap(),
            optimal_input: config.input.is_none(),
            input,
            estimate,
        };
        let document = ResultDocument::new(Command::Spectrum, config, started, &payload)?;
        Ok(SpectrumRun { document, rates: samples.rates })
    })
}

/// Writes `sample_index,rate_bits` rows.
pub fn write_rates_csv(path: &Path, rates: &[f64]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["sample_index", "rate_bits"]).map_err(io)?;
    for (i, r) in rates.iter().enumerate() {
        w.serialize((i, r)).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[derive(Debug, Serialize)]
struct IdcodePayload {
    capacity_bits: f64,
    delta: f64,
    gamma: f64,
    message_count: u64,
    id_rate: f64,
    tag_collision_bound: f64,
    codewords: usize,
    y_max: u64,
    rejections: u64,
    admissible: bool,
    report: ErrorReport,
    code: CodeDescriptor,
}

/// `count` distinct messages out of `total`, ascending, chosen by `seed`.
fn pick_messages(total: u64, count: usize, seed: u64) -> Vec<u64> {
    if total <= count as u64 {
        return (0..total).collect();
    }
    let mut rng = stream_rng(derive_seed(seed, TAG_MESSAGES), 0);
    let mut picked: Vec<u64> = index::sample(&mut rng, total as usize, count).into_iter().map(|i| i as u64).collect();
    picked.sort_unstable();
    picked
}

pub fn cmd_idcode(config: &RunConfig) -> Result<ResultDocument, CliError> {
    let started = Instant::now();
    with_channel!(config.channel()?, |ch| {
        let opt = optimal(config, &ch)?;
        let delta = config.delta.unwrap_or(0.1 * opt.capacity_bits);
        let gamma = opt.capacity_bits - delta;
        let tags = build_tag_family(config.q, config.k)?;
        let params = TransmissionParams {
            n: config.n,
            codewords: (config.q * config.q) as usize,
            gamma,
            p_avg: opt.constraints.effective_avg(),
            epsilon: config.eps,
            seed: config.seed,
        };
        let tcode = build_transmission_code(&opt.distribution, &ch, &params)?;
        let (y_max, rejections) = (tcode.y_max(), tcode.rejections());
        let messages = pick_messages(tags.message_count(), config.messages, config.seed);
        let code = assemble_id_code(tcode, tags, messages)?;

        let enumerable = ((y_max + 1) as f64).powi(config.n as i32) <= ENUMERATION_BUDGET;
        let exact = match config.method {
            EvalMethod::Exact => true,
            EvalMethod::Mc => false,
            EvalMethod::Auto => enumerable,
        };
        let report = if exact {
            evaluate_errors_exact(&code, &ch, config.pairs, config.seed, ENUMERATION_BUDGET)?
        } else {
            estimate_errors_mc(&code, &ch, config.trials, config.seed, config.pairs)?
        };

        let resolved = RunConfig { delta: Some(delta), ..config.clone() };
        let payload = IdcodePayload {
            capacity_bits: opt.capacity_bits,
            delta,
            gamma,
            message_count: code.message_count(),
            id_rate: id_rate(code.message_count(), config.n)?,
            tag_collision_bound: tag_collision_bound(config.q, config.k)?,
            codewords: params.codewords,
            y_max,
            rejections,
            admissible: report.admissible(),
            report,
            code: code.descriptor(),
        };
        ResultDocument::new(Command::Idcode, &resolved, started, &payload)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn message_picks_are_distinct_and_stable() {
        let a = pick_messages(1 << 40, 20, 3);
        assert_eq!(a.len(), 20);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a, pick_messages(1 << 40, 20, 3));
        assert_eq!(pick_messages(5, 20, 3), vec![0, 1, 2, 3, 4]);
    }
}
