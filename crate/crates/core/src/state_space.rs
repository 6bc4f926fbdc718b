//! Simulation of the spectral state space and of noisy observations of it.

use ndarray::{Array2, Axis};

use crate::error::{Result, SpdeError};
use crate::rng::{self, tags};
use crate::spde_model::SpectralSystem;
use crate::spectral_grid::{IncidenceMap, WavenumberGrid};

/// Distribution of the state at the initial time.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    /// The stationary law `N(0, Q̃/(1−F))`.
    Stationary,
    /// One innovation, `N(0, Q̃)`.
    Innovation,
    Fixed(Vec<f64>),
}

/// A path of spectral coefficients `α(t₁..t_T)` started from `α(t₀)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub initial: Vec<f64>,
    /// `T × dim`, row `i` holding `α(t_{i+1})`.
    pub alphas: Array2<f64>,
    pub delta: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.alphas.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.nrows() == 0
    }

    /// Physical fields `Φα(t)` on the full grid, one row per time.
    pub fn fields(&self, grid: &WavenumberGrid, system: &SpectralSystem) -> Result<Array2<f64>> {
        let full = scatter_rows(&self.alphas, system, grid.num_slots());
        grid.inverse_rows(&full)
    }

    pub fn initial_field(&self, grid: &WavenumberGrid, system: &SpectralSystem) -> Result<Vec<f64>> {
        let mut full = vec![0.0; grid.num_slots()];
        for (p, &s) in system.slots.iter().enumerate() {
            full[s] = self.initial[p];
        }
        grid.inverse(&full)
    }
}

/// Expands state rows into full `n²` coefficient rows, zero at dropped slots.
pub fn scatter_rows(rows: &Array2<f64>, system: &SpectralSystem, n_slots: usize) -> Array2<f64> {
    let mut full = Array2::zeros((rows.nrows(), n_slots));
    for (mut f, r) in full.axis_iter_mut(Axis(0)).zip(rows.axis_iter(Axis(0))) {
        for (p, &s) in system.slots.iter().enumerate() {
            f[s] = r[p];
        }
    }
    full
}

/// Picks the state columns out of full `n²` coefficient rows.
pub fn gather_rows(full: &Array2<f64>, system: &SpectralSystem) -> Array2<f64> {
    full.select(Axis(1), &system.slots)
}

fn draw_initial(system: &SpectralSystem, init: &InitialState, seed: u64) -> Result<Vec<f64>> {
    let d = system.dim();
    let mut rng = rng::stream(seed, tags::SIMULATE, 0);
    match init {
        InitialState::Fixed(a) => {
            if a.len() != d {
                return Err(SpdeError::invalid(format!(
                    "initial state has length {}, expected {d}",
                    a.len()
                )));
            }
            Ok(a.clone())
        }
        InitialState::Stationary | InitialState::Innovation => {
            let var = if *init == InitialState::Stationary {
                &system.q0
            } else {
                &system.qtilde
            };
            let mut z = vec![0.0; d];
            rng::fill_normal(&mut rng, &mut z);
            Ok(z.iter().zip(var).map(|(z, v)| z * v.sqrt()).collect())
        }
    }
}

/// Draws `α(t_{i+1}) = Gα(t_i) + ε(t_{i+1})` for `steps` steps.
///
/// Step `i` uses its own random stream, so paths are reproducible from `seed`.
pub fn simulate(
    system: &SpectralSystem,
    steps: usize,
    seed: u64,
    init: &InitialState,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(SpdeError::invalid("simulation needs at least one step"));
    }
    let d = system.dim();
    let initial = draw_initial(system, init, seed)?;
    let mut alphas = Array2::zeros((steps, d));
    let mut prev = initial.clone();
    let mut next = vec![0.0; d];
    let mut z = vec![0.0; d];
    for t in 0..steps {
        let mut rng = rng::stream(seed, tags::SIMULATE, t as u64 + 1);
        rng::fill_normal(&mut rng, &mut z);
        system.apply_g(&prev, &mut next);
        for p in 0..d {
            next[p] += system.qtilde[p].sqrt() * z[p];
        }
        alphas.row_mut(t).assign(&ndarray::ArrayView1::from(&next));
        std::mem::swap(&mut prev, &mut next);
    }
    Ok(Trajectory {
        initial,
        alphas,
        delta: system.delta,
    })
}

/// Noise-free propagation `α(t) = G^t α₀`.
pub fn propagate_deterministic(
    alpha0: &[f64],
    system: &SpectralSystem,
    steps: usize,
) -> Result<Trajectory> {
    let d = system.dim();
    if alpha0.len() != d {
        return Err(SpdeError::invalid(format!(
            "initial state has length {}, expected {d}",
            alpha0.len()
        )));
    }
    let mut alphas = Array2::zeros((steps, d));
    let mut prev = alpha0.to_vec();
    let mut next = vec![0.0; d];
    for t in 0..steps {
        system.apply_g(&prev, &mut next);
        alphas.row_mut(t).assign(&ndarray::ArrayView1::from(&next));
        std::mem::swap(&mut prev, &mut next);
    }
    Ok(Trajectory {
        initial: alpha0.to_vec(),
        alphas,
        delta: system.delta,
    })
}

/// Observed values with their missing-data mask.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet {
    /// `T × m`. Missing entries hold NaN.
    pub w: Array2<f64>,
    pub incidence: Option<IncidenceMap>,
    pub missing: Array2<bool>,
}

impl ObservationSet {
    pub fn complete(w: Array2<f64>, incidence: Option<IncidenceMap>) -> Self {
        let missing = w.mapv(|v| v.is_nan());
        ObservationSet {
            w,
            incidence,
            missing,
        }
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }
}

/// `w(t) = HΦα(t) + ν(t)` with `ν ~ N(0, τ²I)`; without an incidence map the
/// whole grid is observed.
pub fn observe(
    traj: &Trajectory,
    grid: &WavenumberGrid,
    system: &SpectralSystem,
    tau2: f64,
    incidence: Option<&IncidenceMap>,
    seed: u64,
) -> Result<ObservationSet> {
    if !(tau2 >= 0.0) {
        return Err(SpdeError::invalid(format!("tau2 must be non-negative, got {tau2}")));
    }
    if let Some(h) = incidence {
        if h.n != grid.n() {
            return Err(SpdeError::invalid(format!(
                "incidence refers to an n={} grid but the model grid has n={}",
                h.n,
                grid.n()
            )));
        }
    }
    let fields = traj.fields(grid, system)?;
    let mut w = match incidence {
        Some(h) => fields.select(Axis(1), &h.rows),
        None => fields,
    };
    let tau = tau2.sqrt();
    let m = w.ncols();
    let mut z = vec![0.0; m];
    for (t, mut row) in w.axis_iter_mut(Axis(0)).enumerate() {
        let mut rng = rng::stream(seed, tags::OBSERVE, t as u64);
        rng::fill_normal(&mut rng, &mut z);
        for (v, e) in row.iter_mut().zip(&z) {
            *v += tau * e;
        }
    }
    Ok(ObservationSet::complete(w, incidence.cloned()))
}
