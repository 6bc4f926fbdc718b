//! Assignment of off-grid locations to grid cells, and padding.

use super::FieldGrid;
use crate::error::{Result, SpdeError};

/// For each observation location, the grid cell it reads from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncidenceMap {
    pub rows: Vec<usize>,
    /// Side length of the grid the cells refer to.
    pub n: usize,
}

impl IncidenceMap {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Picks the observed values out of a full grid field.
    pub fn gather(&self, field: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|&c| field[c]).collect()
    }
}

/// Periodic distance along one axis of the unit torus.
fn torus_delta(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(1.0 - d)
}

/// Nearest grid point on the torus for each location; ties go to the lower
/// cell index.
pub fn build_incidence(locations: &[[f64; 2]], grid: &FieldGrid) -> Result<IncidenceMap> {
    let n = grid.n;
    let mut rows = Vec::with_capacity(locations.len());
    for (idx, p) in locations.iter().enumerate() {
        if !(0.0..=1.0).contains(&p[0]) || !(0.0..=1.0).contains(&p[1]) {
            return Err(SpdeError::invalid(format!(
                "location {idx} = ({}, {}) lies outside the unit square",
                p[0], p[1]
            )));
        }
        let mut best = (f64::INFINITY, 0usize);
        for cell in 0..grid.len() {
            let s = grid.location(cell);
            let dx = torus_delta(p[0], s[0]);
            let dy = torus_delta(p[1], s[1]);
            let d2 = dx * dx + dy * dy;
            if d2 < best.0 - 1e-15 {
                best = (d2, cell);
            }
        }
        rows.push(best.1);
    }
    Ok(IncidenceMap { rows, n })
}

/// Cells of an `outer × outer` grid covered by an `inner_rows × inner_cols`
/// block placed at the origin (lower-left corner).
pub fn inner_cells(inner_rows: usize, inner_cols: usize, outer: usize) -> Result<Vec<usize>> {
    if inner_rows > outer || inner_cols > outer {
        return Err(SpdeError::invalid(format!(
            "a {inner_rows}x{inner_cols} block does not fit in a {outer}x{outer} grid"
        )));
    }
    let mut cells = Vec::with_capacity(inner_rows * inner_cols);
    for r in 0..inner_rows {
        for c in 0..inner_cols {
            cells.push(r * outer + c);
        }
    }
    Ok(cells)
}

/// Places a row-major `inner_rows × inner_cols` field in the lower-left corner
/// of an `outer × outer` grid; the remaining cells are zero.
pub fn embed_padded(
    inner: &[f64],
    inner_rows: usize,
    inner_cols: usize,
    outer: usize,
) -> Result<Vec<f64>> {
    if inner.len() != inner_rows * inner_cols {
        return Err(SpdeError::invalid(format!(
            "field has {} values, expected {inner_rows}x{inner_cols}",
            inner.len()
        )));
    }
    if outer % 2 != 0 {
        return Err(SpdeError::invalid(format!("padded size {outer} must be even")));
    }
    let cells = inner_cells(inner_rows, inner_cols, outer)?;
    let mut out = vec![0.0; outer * outer];
    for (v, c) in inner.iter().zip(cells) {
        out[c] = *v;
    }
    Ok(out)
}
