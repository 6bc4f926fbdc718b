//! Prior density and the sampling coordinates of the parameters.
//!
//! The prior is `1/(√σ² √τ² γ)` on the box `μ ∈ [−0.5, 0.5]²`, `ψ ∈ [0, π/2]`,
//! `γ ∈ [0.1, 10]` with positive scales, flat in the regression coefficients
//! and flat in λ > 0. The random walk moves ρ₀, σ², ζ, ρ₁, γ, τ² on the log
//! scale and ψ, μ, b on their own scale.

use std::f64::consts::FRAC_PI_2;

use crate::spde_model::SpdeParams;

/// Parameters sampled on the log scale, by index into `SpdeParams::to_array`.
pub const LOG_SCALE: [bool; 9] = [true, true, true, true, true, false, false, false, true];

pub fn log_prior(theta: &SpdeParams, _b: &[f64], lambda: f64) -> f64 {
    let a = theta.to_array();
    if a.iter().any(|v| !v.is_finite()) || !lambda.is_finite() {
        return f64::NEG_INFINITY;
    }
    let in_box = (-0.5..=0.5).contains(&theta.mu[0])
        && (-0.5..=0.5).contains(&theta.mu[1])
        && (0.0..=FRAC_PI_2).contains(&theta.psi)
        && (0.1..=10.0).contains(&theta.gamma)
        && lambda > 0.0
        && theta.rho0 > 0.0
        && theta.rho1 >= 0.0
        && theta.zeta > 0.0
        && theta.sigma2 > 0.0
        && theta.tau2 > 0.0;
    if !in_box {
        return f64::NEG_INFINITY;
    }
    -0.5 * theta.sigma2.ln() - 0.5 * theta.tau2.ln() - theta.gamma.ln()
}

/// Folds `x` back into `[0, π/2]` by reflection at both ends.
pub fn reflect_psi(x: f64) -> f64 {
    let period = 2.0 * FRAC_PI_2;
    let mut r = x.rem_euclid(period);
    if r > FRAC_PI_2 {
        r = period - r;
    }
    r
}

/// Sampling-scale value of parameter `i`.
pub fn to_sampling(i: usize, v: f64) -> f64 {
    if LOG_SCALE[i] {
        v.ln()
    } else {
        v
    }
}

pub fn from_sampling(i: usize, u: f64) -> f64 {
    if LOG_SCALE[i] {
        u.exp()
    } else if i == 5 {
        reflect_psi(u)
    } else {
        u
    }
}

/// `log |dθ/du|` summed over the free log-scale parameters.
pub fn log_jacobian(theta: &SpdeParams, free: &[bool; 9]) -> f64 {
    let a = theta.to_array();
    (0..9)
        .filter(|&i| free[i] && LOG_SCALE[i])
        .map(|i| a[i].ln())
        .sum()
}
