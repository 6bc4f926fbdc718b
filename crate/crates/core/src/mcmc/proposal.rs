//! Adaptive Gaussian random-walk proposal.
//!
//! During adaptation the covariance is refit from the running empirical
//! covariance of the chain as `2.38²/d · Σ̂ + εI`. An optional global factor
//! is tuned by a Robbins-Monro recursion toward a target acceptance rate.
//! Both stop changing once adaptation is switched off.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;

use crate::rng;

/// Running mean and scatter matrix (Welford).
#[derive(Clone, Debug, PartialEq)]
pub struct Welford {
    pub count: u64,
    pub mean: Vec<f64>,
    /// Row-major `d × d` sum of outer products of deviations.
    pub m2: Vec<f64>,
}

impl Welford {
    pub fn new(d: usize) -> Self {
        Welford {
            count: 0,
            mean: vec![0.0; d],
            m2: vec![0.0; d * d],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        let d = self.mean.len();
        self.count += 1;
        let n = self.count as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for i in 0..d {
            self.mean[i] += delta[i] / n;
        }
        for i in 0..d {
            let after = x[i] - self.mean[i];
            for j in 0..d {
                self.m2[i * d + j] += after * delta[j];
            }
        }
    }

    /// Unbiased sample covariance; zero with fewer than two points.
    pub fn covariance(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.m2.len()];
        }
        let c = (self.count - 1) as f64;
        self.m2.iter().map(|v| v / c).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveProposal {
    pub dim: usize,
    /// Row-major covariance of the random-walk increment, before the global
    /// factor `exp(log_scale)`.
    pub cov: Vec<f64>,
    pub log_scale: f64,
    pub jitter: f64,
    pub history: Welford,
    /// Number of completed scale updates, which sets the step size.
    pub scale_updates: u64,
}

impl AdaptiveProposal {
    pub fn new(initial_sd: &[f64], jitter: f64) -> Self {
        let d = initial_sd.len();
        let mut cov = vec![0.0; d * d];
        for (i, s) in initial_sd.iter().enumerate() {
            cov[i * d + i] = s * s;
        }
        AdaptiveProposal {
            dim: d,
            cov,
            log_scale: 0.0,
            jitter,
            history: Welford::new(d),
            scale_updates: 0,
        }
    }

    pub fn record(&mut self, x: &[f64]) {
        self.history.push(x);
    }

    /// Proposal covariance implied by the recorded history.
    pub fn adapted_covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let s = 2.38 * 2.38 / d as f64;
        let mut c: Vec<f64> = self.history.covariance().iter().map(|v| s * v).collect();
        for i in 0..d {
            c[i * d + i] += self.jitter;
        }
        c
    }

    /// Replaces the covariance by the adapted one.
    pub fn adapt(&mut self) {
        if self.history.count >= 2 {
            self.cov = self.adapted_covariance();
        }
    }

    /// Moves the global factor toward `target` acceptance, with a step that
    /// shrinks like `1/√k`.
    pub fn update_scale(&mut self, acceptance: f64, target: f64) {
        self.scale_updates += 1;
        let step = 1.0 / (self.scale_updates as f64).sqrt();
        self.log_scale = (self.log_scale + 2.0 * step * (acceptance - target)).clamp(-15.0, 15.0);
    }

    /// Effective covariance `exp(log_scale)·cov`.
    pub fn effective_covariance(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.cov) * self.log_scale.exp()
    }

    pub fn propose<R: Rng + ?Sized>(&self, rng: &mut R, x: &[f64]) -> Vec<f64> {
        let c = self.effective_covariance();
        let l = match Cholesky::new(c.clone()) {
            Some(ch) => ch.l(),
            None => {
                let eig = c.symmetric_eigen();
                let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
                &eig.eigenvectors * DMatrix::from_diagonal(&vals)
            }
        };
        let mut z = vec![0.0; self.dim];
        rng::fill_normal(rng, &mut z);
        let step = l * DVector::from_column_slice(&z);
        x.iter().zip(step.iter()).map(|(a, s)| a + s).collect()
    }
}
