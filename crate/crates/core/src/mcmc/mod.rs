//! Bayesian inference by adaptive Metropolis-within-Gibbs sampling.

mod chain;
mod checkpoint;
mod diagnostics;
mod gibbs;
mod prior;
mod proposal;

pub use chain::{
    default_start, run_chain, ChainConfig, ChainData, ChainReport, ChainState, PosteriorSample,
    Response, Sampler, Tallies,
};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, MAGIC};
pub use diagnostics::{batch_means_se, effective_sample_size};
pub use gibbs::{
    gibbs_censored, gibbs_missing, lambda_log_density, mh_lambda_step,
    truncated_standard_normal_upper,
};
pub use prior::{from_sampling, log_jacobian, log_prior, reflect_psi, to_sampling, LOG_SCALE};
pub use proposal::{AdaptiveProposal, Welford};
