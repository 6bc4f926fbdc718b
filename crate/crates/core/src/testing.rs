//! Dense reference computations for verifying the fast paths at small sizes.
//!
//! Everything here builds full joint covariance matrices and is only meant
//! for systems with a few hundred dimensions at most.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::inference::FilterInit;
use crate::spde_model::SpectralSystem;
use crate::spectral_grid::WavenumberGrid;

/// The orthonormal basis matrix `Φ` evaluated cell by cell.
pub fn dense_basis(grid: &WavenumberGrid) -> DMatrix<f64> {
    let n2 = grid.num_slots();
    DMatrix::from_fn(n2, n2, |cell, slot| grid.basis_value(slot, cell))
}

pub fn dense_g(system: &SpectralSystem) -> DMatrix<f64> {
    let d = system.dim();
    DMatrix::from_row_slice(d, d, &system.dense_g())
}

/// Joint covariance of the stacked states `(α(t₁), …, α(t_T))`.
pub fn state_covariance(system: &SpectralSystem, steps: usize, init: FilterInit) -> DMatrix<f64> {
    let d = system.dim();
    let g = dense_g(system);
    let q = DMatrix::from_diagonal(&DVector::from_column_slice(&system.qtilde));
    let p0 = match init {
        FilterInit::Innovation => q.clone(),
        FilterInit::Stationary => DMatrix::from_diagonal(&DVector::from_column_slice(&system.q0)),
    };
    let mut s = DMatrix::zeros(d * steps, d * steps);
    let mut marg = p0;
    for t in 0..steps {
        marg = &g * &marg * g.transpose() + &q;
        s.view_mut((t * d, t * d), (d, d)).copy_from(&marg);
        let mut cross = marg.clone();
        for u in t + 1..steps {
            cross = &g * cross;
            s.view_mut((u * d, t * d), (d, d)).copy_from(&cross);
            s.view_mut((t * d, u * d), (d, d)).copy_from(&cross.transpose());
        }
    }
    s
}

/// Block-diagonal observation matrix repeating `a` for each time.
pub fn stacked_observation(a: &DMatrix<f64>, steps: usize) -> DMatrix<f64> {
    let (m, d) = a.shape();
    let mut out = DMatrix::zeros(m * steps, d * steps);
    for t in 0..steps {
        out.view_mut((t * m, t * d), (m, d)).copy_from(a);
    }
    out
}

/// `log N(y; 0, Σ)`.
pub fn mvn_logpdf(y: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let chol = Cholesky::new(cov.clone()).expect("covariance must be positive definite");
    let logdet: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let sol = chol.solve(y);
    -0.5 * (y.len() as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + y.dot(&sol))
}

/// Log-likelihood of stacked observations `y = Āα + ν` under the model.
pub fn dense_loglik(
    y: &DVector<f64>,
    a: &DMatrix<f64>,
    system: &SpectralSystem,
    steps: usize,
    tau2: f64,
    init: FilterInit,
) -> f64 {
    let s = state_covariance(system, steps, init);
    let abar = stacked_observation(a, steps);
    let mut c = &abar * s * abar.transpose();
    for i in 0..c.nrows() {
        c[(i, i)] += tau2;
    }
    mvn_logpdf(y, &c)
}

/// Mean and covariance of the stacked states given stacked observations.
pub fn dense_conditional(
    y: &DVector<f64>,
    a: &DMatrix<f64>,
    system: &SpectralSystem,
    steps: usize,
    tau2: f64,
    init: FilterInit,
) -> (DVector<f64>, DMatrix<f64>) {
    let s = state_covariance(system, steps, init);
    let abar = stacked_observation(a, steps);
    let sa = &s * abar.transpose();
    let mut c = &abar * &sa;
    for i in 0..c.nrows() {
        c[(i, i)] += tau2;
    }
    let chol = Cholesky::new(c).expect("observation covariance must be positive definite");
    let mean = &sa * chol.solve(y);
    let cov = &s - &sa * chol.solve(&sa.transpose());
    (mean, cov)
}

/// `O(m²)` sample CRPS straight from the double sum.
pub fn crps_double_sum(samples: &[f64], y: f64) -> f64 {
    let m = samples.len() as f64;
    let a: f64 = samples.iter().map(|x| (x - y).abs()).sum::<f64>() / m;
    let mut b = 0.0;
    for x in samples {
        for z in samples {
            b += (x - z).abs();
        }
    }
    a - b / (2.0 * m * m)
}

/// `∫₀^∞ e^{−x cosh t} cosh t dt`, an independent evaluation of `K₁(x)`,
/// by the trapezoid rule, which converges geometrically for this integrand.
pub fn bessel_k1_integral(x: f64) -> f64 {
    let h: f64 = 1e-3;
    let mut sum = 0.5 * (-x).exp();
    let mut t: f64 = h;
    loop {
        let c = t.cosh();
        let v = (-x * c).exp() * c;
        sum += v;
        if v < 1e-300 || (v < 1e-20 * sum && t > 1.0) {
            break;
        }
        t += h;
    }
    sum * h
}
