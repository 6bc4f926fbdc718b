//! Choosing a reduced set of coefficient slots.
//!
//! Two policies are provided. `CosineFirst` always keeps the four cosine-only
//! slots and then adds whole cosine/sine pairs in slot order. `LowPass` adds
//! complete shells of equal `|k|²` starting from the constant, so the kept set
//! has the same resolution along both axes and includes a Nyquist cosine only
//! once its shell is reached. Both round the requested count up to the next
//! feasible size, so a larger request never drops a slot kept by a smaller one.

use super::WavenumberGrid;
use crate::error::{Result, SpdeError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionRule {
    CosineFirst,
    LowPass,
    Full,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrequencySelection {
    /// Kept slots in increasing order.
    pub kept: Vec<usize>,
    pub rule: SelectionRule,
    /// Slot count that was asked for before rounding up.
    pub requested: usize,
}

impl FrequencySelection {
    pub fn full(grid: &WavenumberGrid) -> Self {
        FrequencySelection {
            kept: (0..grid.num_slots()).collect(),
            rule: SelectionRule::Full,
            requested: grid.num_slots(),
        }
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    pub fn is_full(&self, grid: &WavenumberGrid) -> bool {
        self.kept.len() == grid.num_slots()
    }
}

fn check_range(grid: &WavenumberGrid, count: usize, min: usize) -> Result<()> {
    let total = grid.num_slots();
    if count < min || count > total {
        return Err(SpdeError::invalid(format!(
            "cannot keep {count} slots on an n={} grid; feasible sizes range from {min} to {total}",
            grid.n()
        )));
    }
    Ok(())
}

/// Four cosine-only slots plus whole pairs in increasing `|k|²`.
pub fn select_frequencies(grid: &WavenumberGrid, count: usize) -> Result<FrequencySelection> {
    check_range(grid, count, 4)?;
    let pairs = count.saturating_sub(4).div_ceil(2);
    let kept: Vec<usize> = (0..4 + 2 * pairs).collect();
    Ok(FrequencySelection {
        kept,
        rule: SelectionRule::CosineFirst,
        requested: count,
    })
}

/// Complete `|k|²` shells, lowest first, until at least `count` slots are kept.
pub fn select_low_frequencies(grid: &WavenumberGrid, count: usize) -> Result<FrequencySelection> {
    check_range(grid, count, 1)?;
    let mut order: Vec<usize> = (0..grid.num_wavenumbers()).collect();
    let norm2 = |w: usize| {
        let (i, j) = grid.index(w);
        i * i + j * j
    };
    order.sort_by_key(|&w| (norm2(w), w));
    let mut kept = Vec::new();
    let mut pos = 0;
    while kept.len() < count && pos < order.len() {
        let shell = norm2(order[pos]);
        while pos < order.len() && norm2(order[pos]) == shell {
            let slots = grid.slots(order[pos]);
            kept.push(slots.cos);
            kept.extend(slots.sin);
            pos += 1;
        }
    }
    kept.sort_unstable();
    Ok(FrequencySelection {
        kept,
        rule: SelectionRule::LowPass,
        requested: count,
    })
}
