//! Data-augmentation and λ updates of the censored model.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::rng;

/// Draw from `N(0, 1)` restricted to `(−∞, a]`.
///
/// Inverse-CDF sampling is used unless the bound lies more than six standard
/// deviations in the lower tail, where Robert's exponential rejection sampler
/// takes over.
pub fn truncated_standard_normal_upper<R: Rng + ?Sized>(rng: &mut R, a: f64) -> f64 {
    if a < -6.0 {
        // Sample x ≥ c = −a from the tail, then reflect.
        let c = -a;
        let rate = 0.5 * (c + (c * c + 4.0).sqrt());
        loop {
            let u: f64 = rng.random();
            let x = c - u.ln() / rate;
            let v: f64 = rng.random();
            if v.ln() <= -0.5 * (x - rate) * (x - rate) {
                return -x;
            }
        }
    }
    let std = Normal::standard();
    let pa = std.cdf(a);
    loop {
        let u: f64 = rng.random();
        let p = u * pa;
        if p > 0.0 {
            let z = std.inverse_cdf(p);
            return z.min(a);
        }
    }
}

/// Redraws the censored entries: `w ~ N(mean, τ²)` truncated to `w ≤ 0`.
pub fn gibbs_censored<R: Rng + ?Sized>(
    rng: &mut R,
    w: &mut [f64],
    mean: &[f64],
    censored: &[bool],
    tau2: f64,
) {
    let tau = tau2.sqrt();
    for i in 0..w.len() {
        if censored[i] {
            if tau == 0.0 {
                w[i] = mean[i].min(0.0);
                continue;
            }
            let z = truncated_standard_normal_upper(rng, -mean[i] / tau);
            w[i] = (mean[i] + tau * z).min(0.0);
        }
    }
}

/// Redraws the missing entries from `N(mean, τ²)`.
pub fn gibbs_missing<R: Rng + ?Sized>(
    rng: &mut R,
    w: &mut [f64],
    mean: &[f64],
    missing: &[bool],
    tau2: f64,
) {
    let tau = tau2.sqrt();
    for i in 0..w.len() {
        if missing[i] {
            w[i] = mean[i] + tau * rng::normal(rng);
        }
    }
}

/// Conditional log-density of λ given the latent mean at the positive
/// entries, up to a constant: Gaussian terms of `y^{1/λ}` plus the Jacobian
/// `Π (1/λ) y^{1/λ − 1}`.
pub fn lambda_log_density(lambda: f64, y_pos: &[f64], mean_pos: &[f64], tau2: f64) -> f64 {
    if !(lambda > 0.0) {
        return f64::NEG_INFINITY;
    }
    let inv = 1.0 / lambda;
    let mut lp = 0.0;
    for (&y, &m) in y_pos.iter().zip(mean_pos) {
        let ly = y.ln();
        let w = (inv * ly).exp();
        let r = w - m;
        lp += -0.5 * r * r / tau2 - lambda.ln() + (inv - 1.0) * ly;
    }
    lp
}

/// Random-walk Metropolis step on `log λ`. Returns the new λ and whether the
/// proposal was accepted. The λ prior is flat on `(0, ∞)`.
pub fn mh_lambda_step<R: Rng + ?Sized>(
    rng: &mut R,
    lambda: f64,
    step_sd: f64,
    y_pos: &[f64],
    mean_pos: &[f64],
    tau2: f64,
) -> (f64, bool) {
    let prop = lambda * (step_sd * rng::normal(rng)).exp();
    let cur = lambda_log_density(lambda, y_pos, mean_pos, tau2) + lambda.ln();
    let new = lambda_log_density(prop, y_pos, mean_pos, tau2) + prop.ln();
    let u: f64 = rng.random();
    if u.ln() < new - cur {
        (prop, true)
    } else {
        (lambda, false)
    }
}
