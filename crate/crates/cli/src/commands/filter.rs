//! Kalman filter and log-likelihood at given parameters.
//!
//! Complete gridded data use the diagonal spectral filter and write the
//! filter moments on the full coefficient layout as `.spte` files. Station
//! data or gaps use the dense filter on the selected coefficients; its means
//! and marginal variances go to CSV matrices.

use ndarray::Array2;
use spectral_spde::inference::{dense_kalman_filter, observation_matrix, spectral_kalman_filter};
use spectral_spde::state_space::scatter_rows;
use spectral_spde::SpectralSystem;

use crate::data::{Dataset, Model};
use crate::error::CliResult;
use crate::run::Run;

pub fn run(mut run: Run) -> CliResult<()> {
    let model = Model::from_run(&run)?;
    let params = super::model_params(&run)?;
    let data = Dataset::load(&run, &model)?.fitting(&run)?;
    let system = SpectralSystem::with_selection(&model.grid, &params, model.delta, &model.selection)?;
    let n = model.n();
    let slots = model.grid.num_slots();

    let mut report = String::new();
    if data.incidence.is_none() && data.is_complete() {
        let spec = model.grid.forward_rows(&data.values)?;
        let f = spectral_kalman_filter(&spec, &system, params.tau2, model.filter_init)?;
        report.push_str("engine = spectral\n");
        report.push_str(&format!("loglik = {:?}\n", f.loglik));
        run.save_spte("m_pred.spte", n, &scatter_rows(&f.m_pred, &system, slots))?;
        run.save_spte("r_pred.spte", n, &scatter_rows(&f.r_pred, &system, slots))?;
        run.save_spte("m_filt.spte", n, &scatter_rows(&f.m_filt, &system, slots))?;
        run.save_spte("r_filt.spte", n, &scatter_rows(&f.r_filt, &system, slots))?;
    } else {
        let a = observation_matrix(&model.grid, data.incidence.as_ref(), &system);
        let f = dense_kalman_filter(&data.values, &a, &system, params.tau2, model.filter_init)?;
        report.push_str("engine = dense\n");
        report.push_str(&format!("loglik = {:?}\n", f.loglik));
        let d = system.dim();
        let t = f.len();
        let mean = Array2::from_shape_fn((t, d), |(i, j)| f.m_filt[i][j]);
        let var = Array2::from_shape_fn((t, d), |(i, j)| f.p_filt[i][(j, j)]);
        run.save_csv("m_filt.csv", &mean)?;
        run.save_csv("p_filt_diag.csv", &var)?;
    }
    report.push_str(&format!("steps = {}\n", data.steps()));
    report.push_str(&format!("stations = {}\n", data.stations()));
    report.push_str(&format!("state_dim = {}\n", system.dim()));
    run.write_text("filter_report.txt", &report)?;
    run.finish()
}
