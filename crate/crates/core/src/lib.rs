//! Spectral methods for the stochastic advection-diffusion equation.
//!
//! The latent field lives on the unit torus and is expanded in real Fourier
//! functions. In these coordinates the propagator is block diagonal, so
//! simulation costs one FFT per time step and, for gridded observations, the
//! Kalman filter and backward sampler reduce to elementwise recursions.
//! Scattered stations are handled through an incidence map with a reduced
//! low-frequency basis and a dense filter.

pub mod bessel;
pub mod error;
pub mod inference;
pub mod io;
pub mod mcmc;
pub mod rng;
pub mod scoring;
pub mod spde_model;
pub mod spectral_grid;
pub mod state_space;
#[cfg(any(test, feature = "oracle"))]
pub mod testing;
pub mod tobit;

pub use error::{Result, SpdeError};
pub use inference::{FilterInit, FilterOutput};
pub use spde_model::{SpdeParams, SpectralSystem};
pub use spectral_grid::{FieldGrid, FrequencySelection, IncidenceMap, WavenumberGrid};
pub use state_space::{InitialState, ObservationSet, Trajectory};
