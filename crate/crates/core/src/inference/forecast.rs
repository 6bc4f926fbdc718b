//! k-step-ahead prediction from a filter state.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;

use super::dense::{sqrt_cov, DenseFilterOutput};
use super::kalman::FilterOutput;
use crate::error::{Result, SpdeError};
use crate::rng::{self, tags};
use crate::spde_model::SpectralSystem;

/// Distribution of the state at the forecast origin.
#[derive(Clone, Debug)]
pub enum ForecastStart {
    Diagonal { mean: Vec<f64>, var: Vec<f64> },
    Dense { mean: Vec<f64>, cov: DMatrix<f64> },
    /// A known state, for instance one posterior draw of `α(t_T)`.
    Point(Vec<f64>),
}

impl ForecastStart {
    pub fn from_filter(f: &FilterOutput) -> Self {
        let (m, r) = f.final_state();
        ForecastStart::Diagonal {
            mean: m.to_vec(),
            var: r.to_vec(),
        }
    }

    pub fn from_dense(f: &DenseFilterOutput) -> Self {
        let t = f.len() - 1;
        ForecastStart::Dense {
            mean: f.m_filt[t].as_slice().to_vec(),
            cov: f.p_filt[t].clone(),
        }
    }

    fn mean(&self) -> &[f64] {
        match self {
            ForecastStart::Diagonal { mean, .. } | ForecastStart::Dense { mean, .. } => mean,
            ForecastStart::Point(a) => a,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Forecast {
    /// Predictive means, row `h−1` for lead `h`.
    pub mean: Array2<f64>,
    /// Predictive marginal variances of the state coordinates.
    pub var: Array2<f64>,
    /// Joint sample paths, one `k × dim` array per sample.
    pub samples: Vec<Array2<f64>>,
}

pub fn forecast(
    start: &ForecastStart,
    system: &SpectralSystem,
    k_steps: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Forecast> {
    if k_steps == 0 {
        return Err(SpdeError::invalid("forecast horizon must be at least one step"));
    }
    let d = system.dim();
    if start.mean().len() != d {
        return Err(SpdeError::invalid(format!(
            "start state has length {}, expected {d}",
            start.mean().len()
        )));
    }
    let mut mean = Array2::zeros((k_steps, d));
    let mut var = Array2::zeros((k_steps, d));
    let mut m = start.mean().to_vec();
    let mut next = vec![0.0; d];
    // Diagonal covariances stay diagonal because each block of G is a scaled
    // rotation acting on a multiple of the identity.
    let mut diag: Option<Vec<f64>> = match start {
        ForecastStart::Diagonal { var, .. } => Some(var.clone()),
        ForecastStart::Point(_) => Some(vec![0.0; d]),
        ForecastStart::Dense { .. } => None,
    };
    let mut full: Option<DMatrix<f64>> = match start {
        ForecastStart::Dense { cov, .. } => Some(cov.clone()),
        _ => None,
    };
    let g = full.as_ref().map(|_| DMatrix::from_row_slice(d, d, &system.dense_g()));
    for h in 0..k_steps {
        system.apply_g(&m, &mut next);
        std::mem::swap(&mut m, &mut next);
        for p in 0..d {
            mean[[h, p]] = m[p];
        }
        if let Some(r) = diag.as_mut() {
            for p in 0..d {
                r[p] = system.qtilde[p] + system.f[p] * r[p];
                var[[h, p]] = r[p];
            }
        }
        if let (Some(c), Some(g)) = (full.as_mut(), g.as_ref()) {
            let mut nc = g * &*c * g.transpose();
            for p in 0..d {
                nc[(p, p)] += system.qtilde[p];
                var[[h, p]] = nc[(p, p)];
            }
            *c = nc;
        }
    }

    let root = match start {
        ForecastStart::Dense { cov, .. } => Some(sqrt_cov(cov)),
        _ => None,
    };
    let mut samples = Vec::with_capacity(n_samples);
    let mut z = vec![0.0; d];
    for i in 0..n_samples {
        let base = i as u64 * (k_steps as u64 + 1);
        let mut rng = rng::stream(seed, tags::FORECAST, base);
        rng::fill_normal(&mut rng, &mut z);
        let mut a: Vec<f64> = match start {
            ForecastStart::Diagonal { mean, var } => (0..d)
                .map(|p| mean[p] + var[p].max(0.0).sqrt() * z[p])
                .collect(),
            ForecastStart::Dense { mean, .. } => {
                let e = root.as_ref().expect("dense start has a factor") * DVector::from_column_slice(&z);
                (0..d).map(|p| mean[p] + e[p]).collect()
            }
            ForecastStart::Point(a) => a.clone(),
        };
        let mut path = Array2::zeros((k_steps, d));
        for h in 0..k_steps {
            let mut rng = rng::stream(seed, tags::FORECAST, base + h as u64 + 1);
            rng::fill_normal(&mut rng, &mut z);
            system.apply_g(&a, &mut next);
            for p in 0..d {
                a[p] = next[p] + system.qtilde[p].sqrt() * z[p];
                path[[h, p]] = a[p];
            }
        }
        samples.push(path);
    }
    Ok(Forecast { mean, var, samples })
}
