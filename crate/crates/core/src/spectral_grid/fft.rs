//! FFT-backed orthonormal transforms between grid values and real coefficients.
//!
//! Forward: with `X` the 2-D DFT of the field, the cosine coefficient of `k` is
//! `scale·Re X(k)` and the sine coefficient is `−scale·Im X(k)`.
//! Inverse: the coefficients are packed Hermitian-symmetrically into `Y` with
//! `Y(k) = scale·(a_c − i a_s)/2`, `Y(−k) = conj Y(k)`, and the real part of the
//! unnormalized inverse DFT is the field.

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::Fft;

use super::WavenumberGrid;
use crate::error::{Result, SpdeError};

fn transpose(buf: &[Complex64], out: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in 0..n {
            out[c * n + r] = buf[r * n + c];
        }
    }
}

fn run(plan: &dyn Fft<f64>, buf: &mut [Complex64], scratch: &mut Vec<Complex64>) {
    let need = plan.get_inplace_scratch_len();
    if scratch.len() < need {
        scratch.resize(need, Complex64::new(0.0, 0.0));
    }
    plan.process_with_scratch(buf, &mut scratch[..need]);
}

impl WavenumberGrid {
    fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.num_slots() {
            return Err(SpdeError::invalid(format!(
                "{what} has length {len}, expected {}",
                self.num_slots()
            )));
        }
        Ok(())
    }

    /// `Φᵀ field`.
    pub fn forward(&self, field: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.num_slots()];
        self.forward_into(field, &mut out)?;
        Ok(out)
    }

    pub fn forward_into(&self, field: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(field.len(), "field")?;
        self.check_len(out.len(), "coefficient buffer")?;
        let n = self.n;
        let mut a: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut b = vec![Complex64::new(0.0, 0.0); n * n];
        let mut scratch = Vec::new();
        run(self.fwd.as_ref(), &mut a, &mut scratch);
        transpose(&a, &mut b, n);
        run(self.fwd.as_ref(), &mut b, &mut scratch);
        // b is now indexed [x-frequency][y-frequency].
        for w in 0..self.num_wavenumbers() {
            let x = b[self.fft_pos[w].0];
            let sc = self.scale(w);
            let slots = self.slots(w);
            out[slots.cos] = sc * x.re;
            if let Some(s) = slots.sin {
                out[s] = -sc * x.im;
            }
        }
        Ok(())
    }

    /// `Φ coeffs`.
    pub fn inverse(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.num_slots()];
        self.inverse_into(coeffs, &mut out)?;
        Ok(out)
    }

    pub fn inverse_into(&self, coeffs: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(coeffs.len(), "coefficients")?;
        self.check_len(out.len(), "field buffer")?;
        let n = self.n;
        let mut b = vec![Complex64::new(0.0, 0.0); n * n];
        for w in 0..self.num_wavenumbers() {
            let sc = self.scale(w);
            let slots = self.slots(w);
            let (p, q) = self.fft_pos[w];
            match slots.sin {
                None => b[p] = Complex64::new(sc * coeffs[slots.cos], 0.0),
                Some(s) => {
                    let y = Complex64::new(0.5 * sc * coeffs[slots.cos], -0.5 * sc * coeffs[s]);
                    b[p] = y;
                    b[q] = y.conj();
                }
            }
        }
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        let mut scratch = Vec::new();
        run(self.inv.as_ref(), &mut b, &mut scratch);
        transpose(&b, &mut a, n);
        run(self.inv.as_ref(), &mut a, &mut scratch);
        for (o, v) in out.iter_mut().zip(&a) {
            *o = v.re;
        }
        Ok(())
    }

    /// Forward transform of every row of a `T × n²` matrix, rows in parallel.
    pub fn forward_rows(&self, fields: &Array2<f64>) -> Result<Array2<f64>> {
        self.map_rows(fields, |g, x, y| g.forward_into(x, y))
    }

    /// Inverse transform of every row of a `T × n²` matrix, rows in parallel.
    pub fn inverse_rows(&self, coeffs: &Array2<f64>) -> Result<Array2<f64>> {
        self.map_rows(coeffs, |g, x, y| g.inverse_into(x, y))
    }

    fn map_rows<F>(&self, input: &Array2<f64>, f: F) -> Result<Array2<f64>>
    where
        F: Fn(&WavenumberGrid, &[f64], &mut [f64]) -> Result<()> + Sync,
    {
        self.check_len(input.ncols(), "row")?;
        let mut out = Array2::zeros(input.raw_dim());
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(input.axis_iter(Axis(0)).into_par_iter())
            .try_for_each(|(mut o, i)| {
                let src = i.to_vec();
                let mut dst = vec![0.0; src.len()];
                f(self, &src, &mut dst)?;
                o.assign(&ndarray::ArrayView1::from(&dst));
                Ok::<(), crate::error::SpdeError>(())
            })?;
        Ok(out)
    }
}
