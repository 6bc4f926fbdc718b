//! Dense Kalman filter and FFBS for observations through an incidence map.
//!
//! Once the field is observed only at scattered cells, `HΦ` is no longer
//! orthogonal and the filter covariances fill in. This path works with a
//! reduced basis of `K` slots and costs `O(K³)` per time step. Missing values
//! (NaN) are handled by dropping the corresponding rows of `HΦ`.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};
use ndarray::Array2;

use super::kalman::FilterInit;
use crate::error::{Result, SpdeError};
use crate::rng::{self, tags};
use crate::spde_model::SpectralSystem;
use crate::spectral_grid::{IncidenceMap, WavenumberGrid};

#[derive(Clone, Debug)]
pub struct DenseFilterOutput {
    pub m_pred: Vec<DVector<f64>>,
    pub p_pred: Vec<DMatrix<f64>>,
    pub m_filt: Vec<DVector<f64>>,
    pub p_filt: Vec<DMatrix<f64>>,
    pub loglik: f64,
}

impl DenseFilterOutput {
    pub fn len(&self) -> usize {
        self.m_filt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m_filt.is_empty()
    }
}

/// Rows of `Φ` at the observed cells, restricted to the system's slots.
pub fn observation_matrix(
    grid: &WavenumberGrid,
    incidence: Option<&IncidenceMap>,
    system: &SpectralSystem,
) -> DMatrix<f64> {
    let cells: Vec<usize> = match incidence {
        Some(h) => h.rows.clone(),
        None => (0..grid.num_slots()).collect(),
    };
    DMatrix::from_fn(cells.len(), system.dim(), |r, c| {
        grid.basis_value(system.slots[c], cells[r])
    })
}

/// `G P Gᵀ` using the block structure of G.
fn propagate_cov(system: &SpectralSystem, p: &DMatrix<f64>) -> DMatrix<f64> {
    let d = system.dim();
    let mut tmp = DMatrix::zeros(d, d);
    let mut col = vec![0.0; d];
    let mut out = vec![0.0; d];
    for j in 0..d {
        col.copy_from_slice(p.column(j).as_slice());
        system.apply_g(&col, &mut out);
        tmp.column_mut(j).copy_from_slice(&out);
    }
    // (G tmp ᵀ)ᵀ = tmp Gᵀ; tmp is G P, so apply G to the rows of tmp.
    let mut res = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            col[j] = tmp[(i, j)];
        }
        system.apply_g(&col, &mut out);
        for j in 0..d {
            res[(i, j)] = out[j];
        }
    }
    res
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn dense_kalman_filter(
    w: &Array2<f64>,
    obs: &DMatrix<f64>,
    system: &SpectralSystem,
    tau2: f64,
    init: FilterInit,
) -> Result<DenseFilterOutput> {
    let d = system.dim();
    if obs.ncols() != d || obs.nrows() != w.ncols() {
        return Err(SpdeError::invalid(format!(
            "observation matrix is {}x{}, data has {} columns and the state {d} coordinates",
            obs.nrows(),
            obs.ncols(),
            w.ncols()
        )));
    }
    if !(tau2 > 0.0) {
        return Err(SpdeError::degenerate("the dense filter needs tau2 > 0"));
    }
    let init_var = match init {
        FilterInit::Innovation => &system.qtilde,
        FilterInit::Stationary => &system.q0,
    };
    let mut m = DVector::zeros(d);
    let mut p = DMatrix::from_diagonal(&DVector::from_column_slice(init_var));
    let q = DMatrix::from_diagonal(&DVector::from_column_slice(&system.qtilde));
    let steps = w.nrows();
    let mut out = DenseFilterOutput {
        m_pred: Vec::with_capacity(steps),
        p_pred: Vec::with_capacity(steps),
        m_filt: Vec::with_capacity(steps),
        p_filt: Vec::with_capacity(steps),
        loglik: 0.0,
    };
    let mut buf = vec![0.0; d];
    let full_sqrt = sqrt_cov(&obs.tr_mul(obs));
    for t in 0..steps {
        system.apply_g(m.as_slice(), &mut buf);
        let mp = DVector::from_column_slice(&buf);
        let pp = propagate_cov(system, &p) + &q;
        let rows: Vec<usize> = (0..w.ncols()).filter(|&j| !w[[t, j]].is_nan()).collect();
        if rows.is_empty() {
            m = mp.clone();
            p = pp.clone();
        } else if rows.len() > d {
            let all = rows.len() == obs.nrows();
            let y = DVector::from_iterator(rows.len(), rows.iter().map(|&j| w[[t, j]]));
            let (resid, u, sqrt) = if all {
                let resid = y - obs * &mp;
                let u = obs.tr_mul(&resid);
                (resid, u, None)
            } else {
                let a = obs.select_rows(rows.iter());
                let resid = y - &a * &mp;
                let u = a.tr_mul(&resid);
                (resid, u, Some(sqrt_cov(&a.tr_mul(&a))))
            };
            let gram_sqrt = sqrt.as_ref().unwrap_or(&full_sqrt);
            let (mf, pf, ll) =
                reduced_update(gram_sqrt, &u, resid.norm_squared(), rows.len(), &mp, &pp, tau2, t)?;
            out.loglik += ll;
            m = mf;
            p = pf;
        } else {
            let a = obs.select_rows(rows.iter());
            let y = DVector::from_iterator(rows.len(), rows.iter().map(|&j| w[[t, j]]));
            let ap = &a * &pp;
            let mut s = &ap * a.transpose();
            for i in 0..rows.len() {
                s[(i, i)] += tau2;
            }
            symmetrize(&mut s);
            let chol = Cholesky::new(s).ok_or_else(|| {
                SpdeError::degenerate(format!("innovation covariance not positive definite at time {t}"))
            })?;
            let resid = y - &a * &mp;
            let sinv_r = chol.solve(&resid);
            let logdet: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
            out.loglik += -0.5
                * (rows.len() as f64 * (2.0 * PI).ln() + logdet + resid.dot(&sinv_r));
            // Gain K = P Aᵀ S⁻¹; P_f = P − K A P.
            let sinv_ap = chol.solve(&ap);
            m = &mp + ap.transpose() * &sinv_r;
            p = &pp - ap.transpose() * sinv_ap;
            symmetrize(&mut p);
        }
        if !p.iter().all(|v| v.is_finite()) {
            return Err(SpdeError::degenerate(format!("covariance update not finite at time {t}")));
        }
        out.m_pred.push(mp);
        out.p_pred.push(pp);
        out.m_filt.push(m.clone());
        out.p_filt.push(p.clone());
    }
    if !out.loglik.is_finite() {
        return Err(SpdeError::degenerate("log-likelihood is not finite"));
    }
    Ok(out)
}

/// Measurement update for more observations than state coordinates, done
/// in `d` dimensions. Let `W` be a square root of `AᵀA` (`WWᵀ = AᵀA`). By
/// the matrix determinant lemma and Woodbury, with `S = A P Aᵀ + τ²I` and
/// `S' = WᵀPW + τ²I`,
/// `log det S = (m − d) log τ² + log det S'`,
/// `P_f = P − PW S'⁻¹ WᵀP` and
/// `rᵀS⁻¹r = (rᵀr − uᵀP_f u/τ²)/τ²` with `u = Aᵀr`.
#[allow(clippy::too_many_arguments)]
fn reduced_update(
    gram_sqrt: &DMatrix<f64>,
    u: &DVector<f64>,
    rr: f64,
    m_obs: usize,
    mp: &DVector<f64>,
    pp: &DMatrix<f64>,
    tau2: f64,
    t: usize,
) -> Result<(DVector<f64>, DMatrix<f64>, f64)> {
    let d = mp.len();
    let pw = pp * gram_sqrt;
    let mut s = gram_sqrt.transpose() * &pw;
    for i in 0..d {
        s[(i, i)] += tau2;
    }
    symmetrize(&mut s);
    let chol = Cholesky::new(s).ok_or_else(|| {
        SpdeError::degenerate(format!("reduced innovation covariance not positive definite at time {t}"))
    })?;
    let logdet_s: f64 = chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum::<f64>()
        + (m_obs - d) as f64 * tau2.ln();
    let mut v = pw.transpose();
    chol.l_dirty().solve_lower_triangular_mut(&mut v);
    let mut pf = pp - v.transpose() * &v;
    symmetrize(&mut pf);
    let pf_u = &pf * u;
    let quad = (rr - u.dot(&pf_u) / tau2) / tau2;
    let ll = -0.5 * (m_obs as f64 * (2.0 * PI).ln() + logdet_s + quad);
    let mf = mp + pf_u / tau2;
    Ok((mf, pf, ll))
}

/// Lower factor of a covariance matrix, tolerating rounding-level indefiniteness.
pub(crate) fn sqrt_cov(c: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = Cholesky::new(c.clone()) {
        return ch.l();
    }
    let eig = c.clone().symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals)
}

pub fn dense_backward_sample(
    filter: &DenseFilterOutput,
    system: &SpectralSystem,
    seed: u64,
) -> Result<Array2<f64>> {
    let steps = filter.len();
    let d = system.dim();
    let mut out = Array2::zeros((steps, d));
    let mut z = vec![0.0; d];
    let last = steps - 1;
    let mut rng = rng::stream(seed, tags::DENSE, last as u64);
    rng::fill_normal(&mut rng, &mut z);
    let draw = &filter.m_filt[last] + sqrt_cov(&filter.p_filt[last]) * DVector::from_column_slice(&z);
    let mut next = draw.clone();
    for p in 0..d {
        out[[last, p]] = draw[p];
    }
    let g = DMatrix::from_row_slice(d, d, &system.dense_g());
    for t in (0..last).rev() {
        let pf = &filter.p_filt[t];
        let pp = &filter.p_pred[t + 1];
        let chol = Cholesky::new(pp.clone()).ok_or_else(|| {
            SpdeError::degenerate(format!("predictive covariance singular at time {}", t + 1))
        })?;
        // J = P_f Gᵀ P_p⁻¹, computed as (P_p⁻¹ G P_f)ᵀ.
        let gpf = &g * pf;
        let j = chol.solve(&gpf).transpose();
        let mean = &filter.m_filt[t] + &j * (&next - &filter.m_pred[t + 1]);
        let mut cov = pf - &j * gpf;
        symmetrize(&mut cov);
        let mut rng = rng::stream(seed, tags::DENSE, t as u64);
        rng::fill_normal(&mut rng, &mut z);
        let draw = mean + sqrt_cov(&cov) * DVector::from_column_slice(&z);
        for p in 0..d {
            out[[t, p]] = draw[p];
        }
        next = draw;
    }
    Ok(out)
}

/// Filter plus one joint posterior draw of the state path.
pub fn dense_filter_ffbs(
    w: &Array2<f64>,
    obs: &DMatrix<f64>,
    system: &SpectralSystem,
    tau2: f64,
    init: FilterInit,
    seed: u64,
) -> Result<(DenseFilterOutput, Array2<f64>, f64)> {
    let filt = dense_kalman_filter(w, obs, system, tau2, init)?;
    let draw = dense_backward_sample(&filt, system, seed)?;
    let ll = filt.loglik;
    Ok((filt, draw, ll))
}
