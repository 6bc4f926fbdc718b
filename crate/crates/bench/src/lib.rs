//! Fixtures shared by the benchmarks.

use ndarray::Array2;
use spectral_spde::spectral_grid::{build_incidence, select_low_frequencies};
use spectral_spde::state_space::{observe, simulate};
use spectral_spde::{FieldGrid, IncidenceMap, InitialState, SpdeParams, SpectralSystem, WavenumberGrid};

/// Moderately smooth, drifting parameters with a visible nugget.
pub fn params() -> SpdeParams {
    SpdeParams {
        rho0: 0.05,
        sigma2: 1.6e5,
        zeta: 0.1,
        rho1: 0.05,
        gamma: 2.0,
        psi: 0.6,
        mu: [0.03, 0.015],
        tau2: 0.1,
    }
}

/// Simulated fields on an `n × n` grid, one row per step.
pub fn gridded_fields(n: usize, steps: usize) -> (WavenumberGrid, SpectralSystem, Array2<f64>) {
    let grid = WavenumberGrid::new(n).expect("grid");
    let sys = SpectralSystem::new(&grid, &params(), 1.0).expect("system");
    let traj = simulate(&sys, steps, 1, &InitialState::Stationary).expect("simulate");
    let obs = observe(&traj, &grid, &sys, params().tau2, None, 2).expect("observe");
    (grid, sys, obs.w)
}

/// A `side × side` station layout on an `n × n` grid with a `k`-coefficient
/// basis, plus simulated station values.
pub fn station_data(n: usize, side: usize, k: usize, steps: usize) -> (WavenumberGrid, SpectralSystem, IncidenceMap, Array2<f64>) {
    let grid = WavenumberGrid::new(n).expect("grid");
    let sel = select_low_frequencies(&grid, k).expect("selection");
    let sys = SpectralSystem::with_selection(&grid, &params(), 1.0, &sel).expect("system");
    let coords: Vec<[f64; 2]> = (0..side * side)
        .map(|i| [(i % side) as f64 / side as f64 / 2.0, (i / side) as f64 / side as f64 / 2.0])
        .collect();
    let h = build_incidence(&coords, &FieldGrid::new(n)).expect("incidence");
    let traj = simulate(&sys, steps, 3, &InitialState::Stationary).expect("simulate");
    let obs = observe(&traj, &grid, &sys, params().tau2, Some(&h), 4).expect("observe");
    (grid, sys, h, obs.w)
}
