//! Kalman filter and backward sampler in spectral coordinates.
//!
//! For complete gridded data, `Φᵀw(t) = α(t) + Φᵀν(t)` and `Φᵀν` is again white
//! noise with variance τ², so every covariance stays diagonal and the filter is
//! an elementwise recursion over the `n²` coefficients.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};

use crate::error::{Result, SpdeError};
use crate::rng::{self, tags};
use crate::spde_model::SpectralSystem;

/// Law of `α(t₀)` assumed by the filter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FilterInit {
    /// `N(0, Q̃)`.
    #[default]
    Innovation,
    /// `N(0, Q̃/(1−F))`.
    Stationary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterOutput {
    pub m_pred: Array2<f64>,
    pub m_filt: Array2<f64>,
    pub r_pred: Array2<f64>,
    pub r_filt: Array2<f64>,
    pub loglik: f64,
}

impl FilterOutput {
    pub fn len(&self) -> usize {
        self.m_filt.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.m_filt.nrows() == 0
    }

    /// Filter mean and variance at the last time.
    pub fn final_state(&self) -> (Array1<f64>, Array1<f64>) {
        let t = self.len() - 1;
        (self.m_filt.row(t).to_owned(), self.r_filt.row(t).to_owned())
    }
}

fn gaussian_logpdf(resid: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * PI * var).ln() + resid * resid / var)
}

/// Runs the diagonal filter on spectral data `w_spectral` (`T × n²`, the
/// forward transforms of complete gridded observations).
///
/// When `system` keeps only some slots, the remaining slots of the data are
/// pure noise under the model; they contribute `N(0, τ²)` terms to the
/// log-likelihood and nothing else.
pub fn spectral_kalman_filter(
    w_spectral: &Array2<f64>,
    system: &SpectralSystem,
    tau2: f64,
    init: FilterInit,
) -> Result<FilterOutput> {
    let n_slots = system.n * system.n;
    if w_spectral.ncols() != n_slots {
        return Err(SpdeError::invalid(format!(
            "spectral data has {} columns, expected {n_slots}",
            w_spectral.ncols()
        )));
    }
    if !(tau2 >= 0.0) {
        return Err(SpdeError::invalid(format!("tau2 must be non-negative, got {tau2}")));
    }
    let steps = w_spectral.nrows();
    if steps == 0 {
        return Err(SpdeError::invalid("no observation times"));
    }
    let d = system.dim();
    let mut m_pred = Array2::zeros((steps, d));
    let mut m_filt = Array2::zeros((steps, d));
    let mut r_pred = Array2::zeros((steps, d));
    let mut r_filt = Array2::zeros((steps, d));
    let mut m_prev = vec![0.0; d];
    let mut r_prev = match init {
        FilterInit::Innovation => system.qtilde.clone(),
        FilterInit::Stationary => system.q0.clone(),
    };
    let mut a = vec![0.0; d];
    let mut loglik = 0.0;

    let mut dropped = Vec::new();
    if d < n_slots {
        let mut kept = vec![false; n_slots];
        for &s in &system.slots {
            kept[s] = true;
        }
        dropped = (0..n_slots).filter(|&s| !kept[s]).collect();
        if tau2 == 0.0 {
            return Err(SpdeError::degenerate(
                "a reduced model with tau2 = 0 gives dropped slots zero variance",
            ));
        }
    }

    for t in 0..steps {
        let w = w_spectral.row(t);
        system.apply_g(&m_prev, &mut a);
        let mut mp = m_pred.row_mut(t);
        let mut rp = r_pred.row_mut(t);
        let mut mf = m_filt.row_mut(t);
        let mut rf = r_filt.row_mut(t);
        for p in 0..d {
            let rpred = system.qtilde[p] + r_prev[p] * system.f[p];
            let var = rpred + tau2;
            if !(var > 0.0) || !var.is_finite() {
                return Err(SpdeError::degenerate(format!(
                    "predictive variance {var} at time {t}, coordinate {p}"
                )));
            }
            let resid = w[system.slots[p]] - a[p];
            let rfilt = if tau2 == 0.0 { 0.0 } else { rpred * tau2 / var };
            let gain = rpred / var;
            mp[p] = a[p];
            rp[p] = rpred;
            mf[p] = a[p] + gain * resid;
            rf[p] = rfilt;
            loglik += gaussian_logpdf(resid, var);
            m_prev[p] = mf[p];
            r_prev[p] = rfilt;
        }
        for &s in &dropped {
            loglik += gaussian_logpdf(w[s], tau2);
        }
    }
    if !loglik.is_finite() {
        return Err(SpdeError::degenerate("log-likelihood is not finite"));
    }
    Ok(FilterOutput {
        m_pred,
        m_filt,
        r_pred,
        r_filt,
        loglik,
    })
}

/// Recomputes the Gaussian log-likelihood from filter moments.
pub fn log_likelihood(
    filter: &FilterOutput,
    w_spectral: &Array2<f64>,
    system: &SpectralSystem,
    tau2: f64,
) -> Result<f64> {
    let mut ll = 0.0;
    let n_slots = w_spectral.ncols();
    let mut kept = vec![false; n_slots];
    for &s in &system.slots {
        kept[s] = true;
    }
    for t in 0..filter.len() {
        for p in 0..system.dim() {
            let var = filter.r_pred[[t, p]] + tau2;
            if !(var > 0.0) {
                return Err(SpdeError::degenerate(format!(
                    "predictive variance {var} at time {t}, coordinate {p}"
                )));
            }
            ll += gaussian_logpdf(w_spectral[[t, system.slots[p]]] - filter.m_pred[[t, p]], var);
        }
        for s in (0..n_slots).filter(|&s| !kept[s]) {
            ll += gaussian_logpdf(w_spectral[[t, s]], tau2);
        }
    }
    Ok(ll)
}

/// Draws `α(t₁..t_T)` from its conditional law given the data.
///
/// Backward step: mean `m_{t|t} + (R_{t|t}/R_{t+1|t}) Gᵀ(α(t+1) − m_{t+1|t})`,
/// variance `R_{t|t} Q̃ / R_{t+1|t}`, which is `(GᵀQ̃⁻¹G + R_{t|t}⁻¹)⁻¹` for the
/// scaled-rotation blocks of G.
pub fn backward_sample(
    filter: &FilterOutput,
    system: &SpectralSystem,
    seed: u64,
) -> Result<Array2<f64>> {
    let steps = filter.len();
    let d = system.dim();
    let mut out = Array2::zeros((steps, d));
    let mut z = vec![0.0; d];
    let last = steps - 1;
    let mut rng = rng::stream(seed, tags::BACKWARD, last as u64);
    rng::fill_normal(&mut rng, &mut z);
    for p in 0..d {
        out[[last, p]] = filter.m_filt[[last, p]] + filter.r_filt[[last, p]].sqrt() * z[p];
    }
    let mut diff = vec![0.0; d];
    let mut back = vec![0.0; d];
    for t in (0..last).rev() {
        let mut rng = rng::stream(seed, tags::BACKWARD, t as u64);
        rng::fill_normal(&mut rng, &mut z);
        for p in 0..d {
            diff[p] = out[[t + 1, p]] - filter.m_pred[[t + 1, p]];
        }
        system.apply_gt(&diff, &mut back);
        for p in 0..d {
            let rp = filter.r_pred[[t + 1, p]];
            if !(rp > 0.0) {
                return Err(SpdeError::degenerate(format!(
                    "zero predictive variance at time {}, coordinate {p}",
                    t + 1
                )));
            }
            let rf = filter.r_filt[[t, p]];
            let mean = filter.m_filt[[t, p]] + rf / rp * back[p];
            let var = (rf * system.qtilde[p] / rp).max(0.0);
            out[[t, p]] = mean + var.sqrt() * z[p];
        }
    }
    Ok(out)
}
