//! Capacity, information-spectrum and randomized identification-code toolkit
//! for the discrete-time Poisson channel.
//!
//! * [`channel`]: Poisson, state-dependent and averaged channel laws.
//! * [`capacity`]: constrained capacity with Kuhn–Tucker certificates.
//! * [`spectrum`]: Monte Carlo information-density spectrum and concentration bounds.
//! * [`idcodes`]: randomized identification codes from a transmission code and polynomial tags.
//! * [`stats`]: seed splitting and binomial confidence intervals.

pub mod capacity;
pub mod channel;
pub mod error;
pub mod idcodes;
pub mod spectrum;
pub mod stats;
mod tables;

pub use capacity::{
    capacity_of_state_channel, kkt_certificate, lagrangian, mutual_information, output_distribution, solve_capacity,
    solve_capacity_with, CapacityResult, InputDistribution, KktCertificate, OutputDistribution, PowerConstraints,
    SolverOptions,
};
pub use channel::{
    average_channel, kl_output, kl_poisson, truncation_point, Channel, MixtureChannel, PoissonChannel,
    StateDependentChannel, TruncationPolicy,
};
pub use error::{Error, Result};
pub use idcodes::{
    assemble_id_code, build_tag_family, build_transmission_code, error_first_kind_exact, error_second_kind_exact,
    estimate_errors_mc, id_rate, tag_collision_bound, ErrorReport, IdCode, TagFamily, TransmissionCode,
    TransmissionParams,
};
pub use spectrum::{
    chebyshev_tail_bound, conditional_mean_check, info_density_rate, sample_spectrum, second_moment_bound,
    SpectrumConfig, SpectrumEstimate,
};
