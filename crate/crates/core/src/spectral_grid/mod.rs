//! Real-Fourier wavenumber grid on the unit torus.
//!
//! A field sampled on the regular `n × n` grid `s_l = (col/n, row/n)` (row-major,
//! `l = row·n + col`) is expanded into `n²` orthonormal real basis functions.
//! The wavenumbers are `k = 2π(i, j)` with `i, j ∈ {−(n/2−1), …, n/2}`. Four of
//! them, `(0,0), (0,n/2), (n/2,0), (n/2,n/2)` in index units, have a sine part
//! that vanishes on every grid point and so contribute a single cosine slot
//! each. They occupy slots 0..4. All other wavenumbers come in `±k` pairs of
//! which one representative is kept; it owns a cosine slot followed by a sine
//! slot, and the pairs are ordered by increasing `|k|²` with ties broken
//! lexicographically on `(i, j)`.
//!
//! Cosine-only columns of the basis matrix `Φ` are scaled by `1/n` and paired
//! columns by `√2/n`, which makes `Φ` orthogonal.

mod fft;
mod incidence;
mod selection;

pub use incidence::{build_incidence, embed_padded, inner_cells, IncidenceMap};
pub use selection::{select_frequencies, select_low_frequencies, FrequencySelection, SelectionRule};

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Result, SpdeError};

/// Coefficient vector of length `n²` in slot order.
pub type SpectralCoeffs = Vec<f64>;

/// Where a wavenumber lives inside the coefficient vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotPair {
    pub cos: usize,
    pub sin: Option<usize>,
}

#[derive(Clone)]
pub struct WavenumberGrid {
    n: usize,
    /// Integer wavenumber indices `(i, j)`; the physical wavenumber is `2π(i, j)`.
    index: Vec<(i64, i64)>,
    wavenumbers: Vec<[f64; 2]>,
    /// Wavenumber owning each slot.
    slot_owner: Vec<usize>,
    /// Position of `+k` and `−k` in the (transposed) complex FFT buffer.
    fft_pos: Vec<(usize, usize)>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for WavenumberGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WavenumberGrid")
            .field("n", &self.n)
            .field("wavenumbers", &self.index.len())
            .finish()
    }
}

impl WavenumberGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(SpdeError::invalid(format!(
                "grid size must be even and at least 4, got {n}"
            )));
        }
        let h = (n / 2) as i64;
        let mut index = vec![(0, 0), (0, h), (h, 0), (h, h)];
        let mut pairs = Vec::with_capacity(n * n / 2 - 2);
        for i in 0..=h {
            for j in -(h - 1)..=h {
                let cos_only = (i == 0 || i == h) && (j == 0 || j == h);
                if cos_only {
                    continue;
                }
                // One representative per ±k pair. On the i = n/2 line the
                // partner of (n/2, j) is (n/2, −j), so keep j > 0 there.
                let keep = match i {
                    0 => j > 0,
                    i if i == h => j > 0,
                    _ => true,
                };
                if keep {
                    pairs.push((i, j));
                }
            }
        }
        pairs.sort_by_key(|&(i, j)| (i * i + j * j, i, j));
        debug_assert_eq!(pairs.len(), n * n / 2 - 2);
        index.extend(pairs);

        let wavenumbers = index
            .iter()
            .map(|&(i, j)| [2.0 * PI * i as f64, 2.0 * PI * j as f64])
            .collect();
        let mut slot_owner = vec![0, 1, 2, 3];
        for w in 4..index.len() {
            slot_owner.push(w);
            slot_owner.push(w);
        }
        let ni = n as i64;
        let fft_pos = index
            .iter()
            .map(|&(i, j)| {
                let p = (i.rem_euclid(ni) * ni + j.rem_euclid(ni)) as usize;
                let q = ((-i).rem_euclid(ni) * ni + (-j).rem_euclid(ni)) as usize;
                (p, q)
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(WavenumberGrid {
            n,
            index,
            wavenumbers,
            slot_owner,
            fft_pos,
            fwd,
            inv,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of distinct wavenumbers, `n²/2 + 2`.
    pub fn num_wavenumbers(&self) -> usize {
        self.index.len()
    }

    /// Number of real coefficients, `n²`.
    pub fn num_slots(&self) -> usize {
        self.n * self.n
    }

    pub fn wavenumbers(&self) -> &[[f64; 2]] {
        &self.wavenumbers
    }

    pub fn wavenumber(&self, w: usize) -> [f64; 2] {
        self.wavenumbers[w]
    }

    pub fn index(&self, w: usize) -> (i64, i64) {
        self.index[w]
    }

    /// Wavenumbers whose sine basis function vanishes on the grid.
    pub fn cosine_only(&self) -> [usize; 4] {
        [0, 1, 2, 3]
    }

    pub fn is_cosine_only(&self, w: usize) -> bool {
        w < 4
    }

    pub fn slots(&self, w: usize) -> SlotPair {
        if w < 4 {
            SlotPair { cos: w, sin: None }
        } else {
            let c = 4 + 2 * (w - 4);
            SlotPair {
                cos: c,
                sin: Some(c + 1),
            }
        }
    }

    pub fn slot_owner(&self, slot: usize) -> usize {
        self.slot_owner[slot]
    }

    pub fn slot_is_sine(&self, slot: usize) -> bool {
        slot >= 4 && (slot - 4) % 2 == 1
    }

    /// Scaling that makes the basis column of wavenumber `w` unit-norm.
    pub fn scale(&self, w: usize) -> f64 {
        let n = self.n as f64;
        if w < 4 {
            1.0 / n
        } else {
            std::f64::consts::SQRT_2 / n
        }
    }

    /// `(cos, sin)` of `kᵀ s_l` for wavenumber `w` and grid cell `l`.
    ///
    /// The phase is reduced modulo `n` in integer arithmetic so the quarter-turn
    /// values, in particular the vanishing sines of the cosine-only
    /// wavenumbers, are exact.
    pub fn phase(&self, w: usize, cell: usize) -> (f64, f64) {
        let n = self.n as i64;
        let (i, j) = self.index[w];
        let row = (cell / self.n) as i64;
        let col = (cell % self.n) as i64;
        let m = (i * col + j * row).rem_euclid(n);
        unit_circle(m, n)
    }

    /// Entry `Φ[cell, slot]` of the orthonormal basis matrix.
    pub fn basis_value(&self, slot: usize, cell: usize) -> f64 {
        let w = self.slot_owner[slot];
        let (c, s) = self.phase(w, cell);
        let v = if self.slot_is_sine(slot) { s } else { c };
        self.scale(w) * v
    }

    /// Row `cell` of `Φ` restricted to the given slots.
    pub fn basis_row(&self, cell: usize, slots: &[usize]) -> Vec<f64> {
        slots.iter().map(|&s| self.basis_value(s, cell)).collect()
    }
}

fn unit_circle(m: i64, n: i64) -> (f64, f64) {
    if m == 0 {
        (1.0, 0.0)
    } else if 2 * m == n {
        (-1.0, 0.0)
    } else if 4 * m == n {
        (0.0, 1.0)
    } else if 4 * m == 3 * n {
        (0.0, -1.0)
    } else {
        let a = 2.0 * PI * m as f64 / n as f64;
        (a.cos(), a.sin())
    }
}

pub fn build_wavenumber_grid(n: usize) -> Result<WavenumberGrid> {
    WavenumberGrid::new(n)
}

/// The `n × n` collocation grid with optional padding bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FieldGrid {
    pub n: usize,
    pub padding_factor: usize,
}

impl FieldGrid {
    pub fn new(n: usize) -> Self {
        FieldGrid {
            n,
            padding_factor: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn location(&self, cell: usize) -> [f64; 2] {
        let n = self.n as f64;
        [(cell % self.n) as f64 / n, (cell / self.n) as f64 / n]
    }

    pub fn locations(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|l| self.location(l)).collect()
    }
}

pub fn forward_transform(field: &[f64], grid: &WavenumberGrid) -> Result<SpectralCoeffs> {
    grid.forward(field)
}

pub fn inverse_transform(coeffs: &[f64], grid: &WavenumberGrid) -> Result<Vec<f64>> {
    grid.inverse(coeffs)
}
