//! Censored power-transformed Gaussian model for precipitation.
//!
//! Rain `y` is zero when the latent Gaussian `w` is non-positive and `w^λ`
//! otherwise. The regression mean uses two covariates built from the NWP
//! forecast `y_F`: the centered `y_F^{1/λ̃}` and the indicator of `y_F = 0`.
//! There is no intercept, since the constant Fourier term plays that role.

use std::f64::consts::PI;

use argmin::core::{CostFunction, Error as ArgminError, Executor, State};
use argmin::solver::goldensectionsearch::GoldenSectionSearch;
use ndarray::Array2;
use statrs::function::erf::erfc;

use crate::error::{Result, SpdeError};

/// `y^{1/λ}` for positive rain.
pub fn transform_positive(y: f64, lambda: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(SpdeError::invalid(format!(
            "only positive amounts are transformed, got {y}; censored values are sampled"
        )));
    }
    if !(lambda > 0.0) {
        return Err(SpdeError::invalid(format!("lambda must be positive, got {lambda}")));
    }
    Ok(y.powf(1.0 / lambda))
}

/// Rain implied by a latent value: `0` for `w ≤ 0`, else `w^λ`.
pub fn inverse_transform(w: f64, lambda: f64) -> f64 {
    if w <= 0.0 {
        0.0
    } else {
        w.powf(lambda)
    }
}

/// Regression covariates, each `T × m`, plus the centering constant of the
/// first column.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    pub columns: Vec<Array2<f64>>,
    pub center: f64,
    pub lambda_tilde: f64,
}

impl Design {
    pub fn p(&self) -> usize {
        self.columns.len()
    }

    /// `xᵀb` at every time and station.
    pub fn mean(&self, b: &[f64]) -> Array2<f64> {
        let mut out = Array2::zeros(self.columns[0].raw_dim());
        for (col, &bj) in self.columns.iter().zip(b) {
            out.scaled_add(bj, col);
        }
        out
    }
}

/// Builds the design, centering the first column over the non-missing
/// forecasts in `y_f`.
pub fn build_design(y_f: &Array2<f64>, lambda_tilde: f64) -> Result<Design> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for &v in y_f.iter().filter(|v| !v.is_nan()) {
        if v < 0.0 {
            return Err(SpdeError::invalid(format!("negative forecast {v}")));
        }
        sum += v.powf(1.0 / lambda_tilde);
        count += 1;
    }
    if count == 0 {
        return Err(SpdeError::invalid("all forecasts are missing"));
    }
    build_design_centered(y_f, lambda_tilde, sum / count as f64)
}

/// Builds the design with a given centering constant, e.g. one frozen from a
/// fitting window. Missing forecasts give zero covariates.
pub fn build_design_centered(y_f: &Array2<f64>, lambda_tilde: f64, center: f64) -> Result<Design> {
    if !(lambda_tilde > 0.0) {
        return Err(SpdeError::invalid(format!("lambda must be positive, got {lambda_tilde}")));
    }
    let x1 = y_f.mapv(|v| if v.is_nan() { 0.0 } else { v.powf(1.0 / lambda_tilde) - center });
    let x2 = y_f.mapv(|v| if v == 0.0 { 1.0 } else { 0.0 });
    Ok(Design {
        columns: vec![x1, x2],
        center,
        lambda_tilde,
    })
}

/// Station rain data aligned with forecasts and coordinates.
#[derive(Clone, Debug)]
pub struct TobitDataset {
    /// `T × m` rain amounts; NaN marks missing.
    pub y: Array2<f64>,
    /// `T × m` NWP forecasts.
    pub y_f: Array2<f64>,
    pub coords: Vec<[f64; 2]>,
    pub design: Design,
}

impl TobitDataset {
    pub fn new(y: Array2<f64>, y_f: Array2<f64>, coords: Vec<[f64; 2]>, lambda_tilde: f64) -> Result<Self> {
        if y.dim() != y_f.dim() || coords.len() != y.ncols() {
            return Err(SpdeError::invalid(format!(
                "rain {:?}, forecasts {:?} and {} coordinates do not line up",
                y.dim(),
                y_f.dim(),
                coords.len()
            )));
        }
        if y.iter().any(|&v| v < 0.0) {
            return Err(SpdeError::invalid("negative rain amount"));
        }
        let design = build_design(&y_f, lambda_tilde)?;
        Ok(TobitDataset { y, y_f, coords, design })
    }
}

fn ln_norm_sf(d: f64) -> f64 {
    // log Φ(−d)
    let v = 0.5 * erfc(d / std::f64::consts::SQRT_2);
    if v > 1e-300 {
        v.ln()
    } else {
        -0.5 * d * d - (d * (2.0 * PI).sqrt()).ln() + (1.0 - 1.0 / (d * d)).ln()
    }
}

fn mills(d: f64) -> f64 {
    // φ(d)/Φ(−d)
    let v = 0.5 * erfc(d / std::f64::consts::SQRT_2);
    if v > 1e-300 {
        (-0.5 * d * d).exp() / (2.0 * PI).sqrt() / v
    } else {
        d + 1.0 / d
    }
}

/// Sufficient data for the iid Tobit likelihood at fixed λ.
struct Marginal {
    zeros: f64,
    w: Vec<f64>,
    log_y_sum: f64,
}

/// Profile log-likelihood over (μ, s) at fixed λ, maximized by Newton's
/// method in `δ = μ/s`, `h = 1/s`, where the problem is concave.
fn profile_loglik(data: &Marginal, lambda: f64) -> f64 {
    let w: Vec<f64> = data.w.iter().map(|lw| (lw / lambda).exp()).collect();
    let np = w.len() as f64;
    let mean = w.iter().sum::<f64>() / np;
    let var = (w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / np).max(1e-12);
    let eval = |d: f64, h: f64| -> f64 {
        if h <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let mut ll = data.zeros * ln_norm_sf(d) + np * (h.ln() - 0.5 * (2.0 * PI).ln());
        for &x in &w {
            let e = h * x - d;
            ll -= 0.5 * e * e;
        }
        ll
    };
    let mut h = 1.0 / var.sqrt();
    let mut d = mean * h;
    let mut cur = eval(d, h);
    for _ in 0..100 {
        let m = mills(d);
        let (mut gd, mut gh) = (-data.zeros * m, np / h);
        let (mut hdd, mut hdh, mut hhh) = (-data.zeros * m * (m - d), 0.0, -np / (h * h));
        for &x in &w {
            let e = h * x - d;
            gd += e;
            gh -= e * x;
            hdd -= 1.0;
            hdh += x;
            hhh -= x * x;
        }
        let det = hdd * hhh - hdh * hdh;
        if !(det > 0.0) {
            break;
        }
        let step_d = -(hhh * gd - hdh * gh) / det;
        let step_h = -(-hdh * gd + hdd * gh) / det;
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-10 {
            let (nd, nh) = (d + t * step_d, h + t * step_h);
            let v = eval(nd, nh);
            if v >= cur {
                d = nd;
                h = nh;
                improved = v - cur > 1e-12 * cur.abs().max(1.0);
                cur = v;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let jac = np * (1.0 / lambda).ln() + (1.0 / lambda - 1.0) * data.log_y_sum;
    cur + jac
}

/// Negative profile log-likelihood of λ, the golden-section objective.
struct LambdaObjective<'a>(&'a Marginal);

impl CostFunction for LambdaObjective<'_> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, lambda: &f64) -> std::result::Result<f64, ArgminError> {
        Ok(-profile_loglik(self.0, *lambda))
    }
}

fn marginal(sample: &[f64]) -> Result<Marginal> {
    let mut zeros = 0.0;
    let mut w = Vec::new();
    let mut log_y_sum = 0.0;
    for &y in sample.iter().filter(|v| !v.is_nan()) {
        if y < 0.0 {
            return Err(SpdeError::invalid(format!("negative rain amount {y}")));
        }
        if y == 0.0 {
            zeros += 1.0;
        } else {
            w.push(y.ln());
            log_y_sum += y.ln();
        }
    }
    if w.len() < 2 {
        return Err(SpdeError::invalid("need at least two positive amounts to fit lambda"));
    }
    Ok(Marginal { zeros, w, log_y_sum })
}

/// Profile log-likelihood of λ under the iid Tobit model for the pooled sample.
pub fn lambda_profile_loglik(sample: &[f64], lambda: f64) -> Result<f64> {
    Ok(profile_loglik(&marginal(sample)?, lambda))
}

/// Power λ̃ maximizing the iid Tobit likelihood of a pooled rain sample,
/// searched over `[0.2, 5]`. NaN entries are ignored.
pub fn fit_lambda_tilde(sample: &[f64]) -> Result<f64> {
    let data = marginal(sample)?;
    let solver = GoldenSectionSearch::new(0.2, 5.0)
        .map_err(|e| SpdeError::invalid(e.to_string()))?
        .with_tolerance(1e-9)
        .map_err(|e| SpdeError::invalid(e.to_string()))?;
    let res = Executor::new(LambdaObjective(&data), solver)
        .configure(|s| s.param(1.5).max_iters(500))
        .run()
        .map_err(|e| SpdeError::degenerate(e.to_string()))?;
    res.state()
        .get_best_param()
        .copied()
        .ok_or_else(|| SpdeError::degenerate("lambda search returned no estimate"))
}
