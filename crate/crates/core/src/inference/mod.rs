//! Filtering, likelihood, posterior path sampling, forecasting and
//! maximum-likelihood estimation.

mod dense;
mod forecast;
mod kalman;
mod mle;

pub use dense::{
    dense_backward_sample, dense_filter_ffbs, dense_kalman_filter, observation_matrix,
    DenseFilterOutput,
};
pub use forecast::{forecast, Forecast, ForecastStart};
pub use kalman::{backward_sample, log_likelihood, spectral_kalman_filter, FilterInit, FilterOutput};
pub use mle::{fit_mle, from_unconstrained, to_unconstrained, MleConfig, MleReport};
