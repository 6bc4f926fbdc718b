//! Advection-diffusion SPDE with Whittle innovations, in spectral form.
//!
//! Each Fourier mode `k` of the solution is an Ornstein-Uhlenbeck process with
//! rate `r(k) = kᵀΣk + ζ` that is rotated by the drift: over a step `Δ` the
//! cosine/sine pair is multiplied by `e^{−Δr}` and rotated by `Δμᵀk`. The
//! innovation of a step has variance `f̃(k)(1 − e^{−2Δr})/(2r)` per complex
//! mode. Coefficients here are taken with respect to the orthonormal basis of
//! [`WavenumberGrid`], which multiplies those variances by `n²`.

use std::f64::consts::PI;

use crate::bessel::x_k1;
use crate::error::{Result, SpdeError};
use crate::spectral_grid::{FrequencySelection, WavenumberGrid};

pub const PARAM_NAMES: [&str; 9] = [
    "rho0", "sigma2", "zeta", "rho1", "gamma", "psi", "mu_x", "mu_y", "tau2",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpdeParams {
    /// Range of the Whittle innovations.
    pub rho0: f64,
    pub sigma2: f64,
    /// Damping rate.
    pub zeta: f64,
    /// Diffusion range. Zero switches diffusion off entirely.
    pub rho1: f64,
    /// Anisotropy ratio.
    pub gamma: f64,
    /// Anisotropy direction in radians.
    pub psi: f64,
    /// Drift per unit time.
    pub mu: [f64; 2],
    /// Nugget variance of the observations.
    pub tau2: f64,
}

impl SpdeParams {
    /// Anisotropic diffusion with a drift from north-east to south-west.
    pub fn advection_example() -> Self {
        SpdeParams {
            rho0: 0.05,
            sigma2: 0.49,
            zeta: -(0.99f64.ln()),
            rho1: 0.06,
            gamma: 3.0,
            psi: PI / 4.0,
            mu: [-0.1, -0.1],
            tau2: 0.0,
        }
    }

    /// No drift and no diffusion: the covariance separates into space × time.
    pub fn separable(rho0: f64, sigma2: f64, zeta: f64, tau2: f64) -> Self {
        SpdeParams {
            rho0,
            sigma2,
            zeta,
            rho1: 0.0,
            gamma: 1.0,
            psi: 0.0,
            mu: [0.0, 0.0],
            tau2,
        }
    }

    pub fn to_array(&self) -> [f64; 9] {
        [
            self.rho0, self.sigma2, self.zeta, self.rho1, self.gamma, self.psi, self.mu[0],
            self.mu[1], self.tau2,
        ]
    }

    pub fn from_array(a: &[f64; 9]) -> Self {
        SpdeParams {
            rho0: a[0],
            sigma2: a[1],
            zeta: a[2],
            rho1: a[3],
            gamma: a[4],
            psi: a[5],
            mu: [a[6], a[7]],
            tau2: a[8],
        }
    }

    /// Checks the parameter domain used throughout: positive scales, γ in
    /// [0.1, 10], ψ in [0, π/2], drift components in [−0.5, 0.5], τ² ≥ 0.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(SpdeError::invalid(format!("{what} = {v} is outside its domain")))
        };
        for (name, v) in PARAM_NAMES.iter().zip(self.to_array()) {
            if !v.is_finite() {
                return bad(name, v);
            }
        }
        if self.rho0 <= 0.0 {
            return bad("rho0", self.rho0);
        }
        if self.sigma2 <= 0.0 {
            return bad("sigma2", self.sigma2);
        }
        if self.zeta <= 0.0 {
            return bad("zeta", self.zeta);
        }
        if self.rho1 < 0.0 {
            return bad("rho1", self.rho1);
        }
        if !(0.1..=10.0).contains(&self.gamma) {
            return bad("gamma", self.gamma);
        }
        if !(0.0..=PI / 2.0).contains(&self.psi) {
            return bad("psi", self.psi);
        }
        if !(-0.5..=0.5).contains(&self.mu[0]) {
            return bad("mu_x", self.mu[0]);
        }
        if !(-0.5..=0.5).contains(&self.mu[1]) {
            return bad("mu_y", self.mu[1]);
        }
        if self.tau2 < 0.0 {
            return bad("tau2", self.tau2);
        }
        Ok(())
    }

    /// Σ, or the zero matrix when `rho1 == 0`.
    pub fn sigma_matrix(&self) -> [[f64; 2]; 2] {
        if self.rho1 == 0.0 {
            [[0.0; 2]; 2]
        } else {
            diffusion_matrix(self.rho1, self.gamma, self.psi)
                .expect("validated parameters give a valid diffusion matrix")
        }
    }

    /// Decay rate `kᵀΣk + ζ` of mode `k`.
    pub fn rate(&self, k: [f64; 2]) -> f64 {
        quad_form(&self.sigma_matrix(), k) + self.zeta
    }
}

fn quad_form(m: &[[f64; 2]; 2], k: [f64; 2]) -> f64 {
    k[0] * (m[0][0] * k[0] + m[0][1] * k[1]) + k[1] * (m[1][0] * k[0] + m[1][1] * k[1])
}

/// Σ from `Σ⁻¹ = ρ₁⁻² AᵀA` with `A = diag(1, γ)·[[cos ψ, sin ψ], [−sin ψ, cos ψ]]`.
///
/// The result is `ρ₁² Rᵀ diag(1, γ⁻²) R`: variance `ρ₁²` along `(cos ψ, sin ψ)` and
/// `ρ₁²/γ²` across it.
pub fn diffusion_matrix(rho1: f64, gamma: f64, psi: f64) -> Result<[[f64; 2]; 2]> {
    if !(rho1 > 0.0) || !(gamma > 0.0) {
        return Err(SpdeError::invalid(format!(
            "diffusion needs rho1 > 0 and gamma > 0, got rho1={rho1}, gamma={gamma}"
        )));
    }
    if !(0.0..=PI / 2.0).contains(&psi) {
        return Err(SpdeError::invalid(format!("psi = {psi} is outside [0, pi/2]")));
    }
    let (s, c) = psi.sin_cos();
    let r2 = rho1 * rho1;
    let l2 = r2 / (gamma * gamma);
    Ok([
        [r2 * c * c + l2 * s * s, (r2 - l2) * c * s],
        [(r2 - l2) * c * s, r2 * s * s + l2 * c * c],
    ])
}

/// Whittle innovation spectrum `σ²/(2π)² (kᵀk + ρ₀⁻²)⁻²`.
pub fn whittle_spectrum(k: [f64; 2], rho0: f64, sigma2: f64) -> f64 {
    let a = k[0] * k[0] + k[1] * k[1] + 1.0 / (rho0 * rho0);
    sigma2 / (4.0 * PI * PI) / (a * a)
}

/// Whittle (Matérn, smoothness one) covariance `σ² (d/ρ₀) K₁(d/ρ₀)`.
pub fn whittle_covariance(d: f64, rho0: f64, sigma2: f64) -> f64 {
    sigma2 * x_k1(d / rho0)
}

/// Space-time spectrum `f̃(k) / (2π) / ((kᵀΣk+ζ)² + (ω+μᵀk)²)` of the stationary solution.
pub fn spde_spectrum(omega: f64, k: [f64; 2], params: &SpdeParams) -> f64 {
    let r = params.rate(k);
    let v = omega + params.mu[0] * k[0] + params.mu[1] * k[1];
    whittle_spectrum(k, params.rho0, params.sigma2) / (2.0 * PI) / (r * r + v * v)
}

/// One mode of the state vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    /// Wavenumber index in the grid.
    pub wavenumber: usize,
    /// Position of the cosine coefficient in the state vector.
    pub cos: usize,
    /// Position of the sine coefficient, absent for cosine-only modes.
    pub sin: Option<usize>,
    /// `e^{−Δ(kᵀΣk+ζ)}`.
    pub decay: f64,
    /// Rotation angle `Δμᵀk`.
    pub angle: f64,
    /// Innovation variance of each coefficient of the mode.
    pub q: f64,
    /// `decay·cos(angle)` and `decay·sin(angle)`, cached for the propagation loops.
    pub gc: f64,
    pub gs: f64,
}

/// Linear Gaussian state space `α(t+Δ) = Gα(t) + ε`, `ε ~ N(0, Q̃)`, in the
/// orthonormal spectral coordinates, possibly restricted to a subset of slots.
#[derive(Clone, Debug)]
pub struct SpectralSystem {
    pub delta: f64,
    pub n: usize,
    pub modes: Vec<Mode>,
    /// Grid slot of each state coordinate.
    pub slots: Vec<usize>,
    /// Diagonal of Q̃ per state coordinate.
    pub qtilde: Vec<f64>,
    /// Diagonal of F = GGᵀ.
    pub f: Vec<f64>,
    /// Stationary variances `Q̃/(1 − F)`.
    pub q0: Vec<f64>,
}

/// `(1 − e^{−2Δr}) / (2r)`, finite as `r → 0`.
fn integrated_decay(delta: f64, r: f64) -> f64 {
    if r.abs() < 1e-300 {
        delta
    } else {
        -(-2.0 * delta * r).exp_m1() / (2.0 * r)
    }
}

impl SpectralSystem {
    pub fn new(grid: &WavenumberGrid, params: &SpdeParams, delta: f64) -> Result<Self> {
        Self::with_selection(grid, params, delta, &FrequencySelection::full(grid))
    }

    pub fn with_selection(
        grid: &WavenumberGrid,
        params: &SpdeParams,
        delta: f64,
        selection: &FrequencySelection,
    ) -> Result<Self> {
        params.validate()?;
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(SpdeError::invalid(format!("time step must be positive, got {delta}")));
        }
        let sigma = params.sigma_matrix();
        let n2 = (grid.n() * grid.n()) as f64;
        let mut modes = Vec::new();
        let mut slots = Vec::with_capacity(selection.len());
        let mut pos_of_slot = vec![usize::MAX; grid.num_slots()];
        for (p, &s) in selection.kept.iter().enumerate() {
            pos_of_slot[s] = p;
            slots.push(s);
        }
        let mut qtilde = vec![0.0; slots.len()];
        let mut f = vec![0.0; slots.len()];
        let mut q0 = vec![0.0; slots.len()];
        for w in 0..grid.num_wavenumbers() {
            let sp = grid.slots(w);
            let cos = pos_of_slot[sp.cos];
            if cos == usize::MAX {
                continue;
            }
            let sin = match sp.sin {
                Some(s) if pos_of_slot[s] == usize::MAX => {
                    return Err(SpdeError::invalid(format!(
                        "selection keeps the cosine slot {} but not its sine partner {s}",
                        sp.cos
                    )))
                }
                Some(s) => Some(pos_of_slot[s]),
                None => None,
            };
            let k = grid.wavenumber(w);
            let r = quad_form(&sigma, k) + params.zeta;
            let decay = (-delta * r).exp();
            let spec = whittle_spectrum(k, params.rho0, params.sigma2);
            let q = n2 * spec * integrated_decay(delta, r);
            let ff = decay * decay;
            // Q̃/(1 − F) = n² f̃ / (2r) exactly; evaluate it that way to avoid
            // the cancellation in 1 − F for slowly decaying modes.
            let stat = n2 * spec / (2.0 * r);
            if r * delta < 1e-10 {
                log::warn!("mode {w} is nearly non-stationary (rate {r:e})");
            }
            let angle = delta * (params.mu[0] * k[0] + params.mu[1] * k[1]);
            for p in std::iter::once(cos).chain(sin) {
                qtilde[p] = q;
                f[p] = ff;
                q0[p] = stat;
            }
            modes.push(Mode {
                wavenumber: w,
                cos,
                sin,
                decay,
                angle,
                q,
                gc: decay * angle.cos(),
                gs: decay * angle.sin(),
            });
        }
        if modes.iter().map(|m| 1 + m.sin.is_some() as usize).sum::<usize>() != slots.len() {
            return Err(SpdeError::invalid("selection contains an orphan sine slot"));
        }
        Ok(SpectralSystem {
            delta,
            n: grid.n(),
            modes,
            slots,
            qtilde,
            f,
            q0,
        })
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.slots.len()
    }

    /// `out = G x`.
    pub fn apply_g(&self, x: &[f64], out: &mut [f64]) {
        for m in &self.modes {
            match m.sin {
                None => out[m.cos] = m.decay * x[m.cos],
                Some(s) => {
                    let (a, b) = (x[m.cos], x[s]);
                    out[m.cos] = m.gc * a - m.gs * b;
                    out[s] = m.gs * a + m.gc * b;
                }
            }
        }
    }

    /// `out = Gᵀ x`.
    pub fn apply_gt(&self, x: &[f64], out: &mut [f64]) {
        for m in &self.modes {
            match m.sin {
                None => out[m.cos] = m.decay * x[m.cos],
                Some(s) => {
                    let (a, b) = (x[m.cos], x[s]);
                    out[m.cos] = m.gc * a + m.gs * b;
                    out[s] = -m.gs * a + m.gc * b;
                }
            }
        }
    }

    /// G as a dense matrix, row-major `dim × dim`. Intended for small systems.
    pub fn dense_g(&self) -> Vec<f64> {
        let d = self.dim();
        let mut g = vec![0.0; d * d];
        for m in &self.modes {
            match m.sin {
                None => g[m.cos * d + m.cos] = m.decay,
                Some(s) => {
                    let (sn, cs) = m.angle.sin_cos();
                    g[m.cos * d + m.cos] = m.decay * cs;
                    g[m.cos * d + s] = -m.decay * sn;
                    g[s * d + m.cos] = m.decay * sn;
                    g[s * d + s] = m.decay * cs;
                }
            }
        }
        g
    }

    /// Largest `|eigenvalue|` of G, i.e. the largest mode decay.
    pub fn spectral_radius(&self) -> f64 {
        self.modes.iter().map(|m| m.decay).fold(0.0, f64::max)
    }
}

/// Covariance `C(t, s)` of the solution truncated to the wavenumbers of an
/// `n_trunc × n_trunc` grid, summed in real arithmetic.
///
/// Cosine-only wavenumbers contribute `f̃ e^{−r|t|} cos(kᵀs) / (2r)`; each pair
/// contributes twice `f̃ e^{−r|t|} cos(kᵀs − μᵀk t) / (2r)`, covering `±k`.
pub fn covariance_function(
    t_lag: f64,
    s_lag: [f64; 2],
    params: &SpdeParams,
    n_trunc: usize,
) -> Result<f64> {
    let grid = WavenumberGrid::new(n_trunc)?;
    params.validate()?;
    Ok(covariance_on(&grid, t_lag, s_lag, params))
}

pub(crate) fn covariance_on(
    grid: &WavenumberGrid,
    t_lag: f64,
    s_lag: [f64; 2],
    params: &SpdeParams,
) -> f64 {
    let sigma = params.sigma_matrix();
    let mut total = 0.0;
    for w in 0..grid.num_wavenumbers() {
        let k = grid.wavenumber(w);
        let r = quad_form(&sigma, k) + params.zeta;
        let base = whittle_spectrum(k, params.rho0, params.sigma2) * (-r * t_lag.abs()).exp() / (2.0 * r);
        let ks = k[0] * s_lag[0] + k[1] * s_lag[1];
        if grid.is_cosine_only(w) {
            total += base * ks.cos();
        } else {
            let drift = (params.mu[0] * k[0] + params.mu[1] * k[1]) * t_lag;
            total += 2.0 * base * (ks - drift).cos();
        }
    }
    total
}

/// Covariance table over many lags for one truncation, sharing the grid.
pub fn covariance_table(
    lags: &[(f64, [f64; 2])],
    params: &SpdeParams,
    n_trunc: usize,
) -> Result<Vec<f64>> {
    let grid = WavenumberGrid::new(n_trunc)?;
    params.validate()?;
    Ok(lags
        .iter()
        .map(|&(t, s)| covariance_on(&grid, t, s, params))
        .collect())
}

/// Default reference truncation used in place of the infinite sum.
pub fn default_reference(n: usize) -> usize {
    8 * n
}

/// Marginal variance at truncation `n_ref` minus that at `n`.
///
/// This bounds `|C^{n_ref}(t,s) − C^n(t,s)|` for all lags, because every
/// omitted or reweighted term is at most its own contribution at zero lag.
/// The value is relative to the reference truncation, not the infinite sum.
pub fn approximation_bound(params: &SpdeParams, n: usize, n_ref: usize) -> Result<f64> {
    if n_ref < n {
        return Err(SpdeError::invalid(format!(
            "reference truncation {n_ref} is coarser than n = {n}"
        )));
    }
    if n_ref == n {
        WavenumberGrid::new(n)?;
        return Ok(0.0);
    }
    let coarse = covariance_function(0.0, [0.0, 0.0], params, n)?;
    let fine = covariance_function(0.0, [0.0, 0.0], params, n_ref)?;
    Ok((fine - coarse).max(0.0))
}
