//! Maximum-likelihood fitting of the nine SPDE parameters on gridded data.
//!
//! The likelihood comes from the spectral filter. The search runs Nelder-Mead
//! on unconstrained coordinates: log scale for ρ₀, σ², ζ, ρ₁, τ²; a logistic
//! map onto `[log 0.1, log 10]` for log γ and onto `[0, π/2]` for ψ; the drift
//! is used directly and clamped to its box.

use std::f64::consts::FRAC_PI_2;

use argmin::core::{CostFunction, Error as ArgminError, Executor, State};
use argmin::solver::neldermead::NelderMead;
use ndarray::Array2;

use super::kalman::{spectral_kalman_filter, FilterInit};
use crate::error::{Result, SpdeError};
use crate::spde_model::{SpdeParams, SpectralSystem};
use crate::spectral_grid::{FrequencySelection, WavenumberGrid};

const LOG_GAMMA_MIN: f64 = -2.302_585_092_994_046; // ln 0.1
const LOG_GAMMA_SPAN: f64 = 4.605_170_185_988_092; // ln 100

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

/// Maps parameters to the unconstrained optimization scale.
pub fn to_unconstrained(p: &SpdeParams) -> [f64; 9] {
    let a = p.to_array();
    [
        a[0].ln(),
        a[1].ln(),
        a[2].ln(),
        a[3].max(1e-300).ln(),
        logit((a[4].ln() - LOG_GAMMA_MIN) / LOG_GAMMA_SPAN),
        logit(a[5] / FRAC_PI_2),
        a[6],
        a[7],
        a[8].max(1e-300).ln(),
    ]
}

pub fn from_unconstrained(u: &[f64; 9]) -> SpdeParams {
    SpdeParams::from_array(&[
        u[0].exp(),
        u[1].exp(),
        u[2].exp(),
        u[3].exp(),
        (LOG_GAMMA_MIN + LOG_GAMMA_SPAN * logistic(u[4])).exp().clamp(0.1, 10.0),
        FRAC_PI_2 * logistic(u[5]),
        u[6].clamp(-0.5, 0.5),
        u[7].clamp(-0.5, 0.5),
        u[8].exp(),
    ])
}

#[derive(Clone, Debug)]
pub struct MleConfig {
    /// Which of the nine parameters are estimated; the rest stay at their
    /// initial values.
    pub free: [bool; 9],
    pub max_iter: u64,
    pub delta: f64,
    pub init: FilterInit,
    /// Relative size of the initial simplex on the unconstrained scale.
    pub step: f64,
}

impl Default for MleConfig {
    fn default() -> Self {
        MleConfig {
            free: [true; 9],
            max_iter: 2000,
            delta: 1.0,
            init: FilterInit::Innovation,
            step: 0.3,
        }
    }
}

impl MleConfig {
    /// Estimates only ρ₀, σ², ζ and τ², keeping the model separable.
    pub fn separable() -> Self {
        MleConfig {
            free: [true, true, true, false, false, false, false, false, true],
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct MleReport {
    pub params: SpdeParams,
    pub loglik: f64,
    pub initial_loglik: f64,
    pub iterations: u64,
    pub converged: bool,
    /// Norm of a central-difference gradient on the free unconstrained
    /// coordinates at the optimum.
    pub grad_norm: f64,
}

struct Objective<'a> {
    w: &'a Array2<f64>,
    grid: &'a WavenumberGrid,
    selection: &'a FrequencySelection,
    base: [f64; 9],
    fixed: [f64; 9],
    free: Vec<usize>,
    cfg: &'a MleConfig,
}

impl Objective<'_> {
    fn params(&self, x: &[f64]) -> SpdeParams {
        let mut u = self.base;
        for (&i, &v) in self.free.iter().zip(x) {
            u[i] = v;
        }
        // Fixed parameters bypass the transform so values on the boundary,
        // such as rho1 = 0, are kept exactly.
        let mapped = from_unconstrained(&u).to_array();
        let mut a = self.fixed;
        for &i in &self.free {
            a[i] = mapped[i];
        }
        SpdeParams::from_array(&a)
    }

    fn loglik(&self, x: &[f64]) -> f64 {
        let p = self.params(x);
        let sys = match SpectralSystem::with_selection(self.grid, &p, self.cfg.delta, self.selection) {
            Ok(s) => s,
            Err(_) => return f64::NEG_INFINITY,
        };
        match spectral_kalman_filter(self.w, &sys, p.tau2, self.cfg.init) {
            Ok(f) => f.loglik,
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, ArgminError> {
        let ll = self.loglik(x);
        Ok(if ll.is_finite() { -ll } else { 1e300 })
    }
}

/// Maximizes the spectral-filter log-likelihood starting from `init`.
///
/// `w_spectral` holds the forward transforms of complete gridded data. If
/// the iteration limit is reached, the best point found is returned with
/// `converged = false`.
pub fn fit_mle(
    w_spectral: &Array2<f64>,
    grid: &WavenumberGrid,
    selection: &FrequencySelection,
    init: &SpdeParams,
    cfg: &MleConfig,
) -> Result<MleReport> {
    init.validate()?;
    if w_spectral.iter().any(|v| !v.is_finite()) {
        return Err(SpdeError::invalid("maximum likelihood needs complete data"));
    }
    let free: Vec<usize> = (0..9).filter(|&i| cfg.free[i]).collect();
    if free.is_empty() {
        return Err(SpdeError::invalid("no free parameters"));
    }
    if cfg.free[3] && init.rho1 == 0.0 {
        return Err(SpdeError::invalid(
            "rho1 = 0 (no diffusion) cannot be estimated on the log scale; fix it",
        ));
    }
    if cfg.free[8] && init.tau2 == 0.0 {
        return Err(SpdeError::invalid("tau2 must start positive when it is estimated"));
    }
    let base = to_unconstrained(init);
    let obj = Objective {
        w: w_spectral,
        grid,
        selection,
        base,
        fixed: init.to_array(),
        free: free.clone(),
        cfg,
    };
    let x0: Vec<f64> = free.iter().map(|&i| base[i]).collect();
    let initial_loglik = obj.loglik(&x0);
    if !initial_loglik.is_finite() {
        return Err(SpdeError::degenerate("log-likelihood at the initial value is not finite"));
    }
    let mut simplex = vec![x0.clone()];
    for j in 0..x0.len() {
        let mut v = x0.clone();
        v[j] += if free[j] >= 6 && free[j] <= 7 { 0.05 } else { cfg.step };
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-9)
        .map_err(|e| SpdeError::invalid(e.to_string()))?;
    let res = Executor::new(obj, solver)
        .configure(|s| s.max_iters(cfg.max_iter))
        .run()
        .map_err(|e| SpdeError::degenerate(e.to_string()))?;
    let state = res.state();
    let iterations = state.get_iter();
    let best = state
        .get_best_param()
        .cloned()
        .unwrap_or_else(|| x0.clone());
    let converged = iterations < cfg.max_iter;
    let obj = Objective {
        w: w_spectral,
        grid,
        selection,
        base,
        fixed: init.to_array(),
        free,
        cfg,
    };
    let mut loglik = obj.loglik(&best);
    let mut best = best;
    if !(loglik >= initial_loglik) {
        best = x0;
        loglik = initial_loglik;
    }
    let h = 1e-4;
    let mut g2 = 0.0;
    for j in 0..best.len() {
        let mut a = best.clone();
        let mut b = best.clone();
        a[j] += h;
        b[j] -= h;
        let g = (obj.loglik(&a) - obj.loglik(&b)) / (2.0 * h);
        g2 += g * g;
    }
    let params = obj.params(&best);
    if !converged {
        log::warn!("Nelder-Mead stopped at the iteration limit ({iterations})");
    }
    Ok(MleReport {
        params,
        loglik,
        initial_loglik,
        iterations,
        converged,
        grad_norm: g2.sqrt(),
    })
}
