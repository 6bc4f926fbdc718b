//! Predictive samples at the stations (or grid cells) for leads `1..=horizon`
//! after the fitting window.
//!
//! With `chain = DIR` each retained posterior draw contributes
//! `samples_per_draw` paths started from its own `α(t_T)`, so parameter and
//! transform uncertainty are propagated. With `params = FILE` the paths start
//! from the filter distribution at the end of the fitting window under fixed
//! parameters. The nugget noise comes from a separate random stream, so
//! switching `nugget` on or off leaves the latent paths unchanged.

use nalgebra::DMatrix;
use ndarray::{s, Array2};
use spectral_spde::inference::{
    dense_kalman_filter, forecast, observation_matrix, spectral_kalman_filter, ForecastStart,
};
use spectral_spde::io::Config;
use spectral_spde::rng::{self, mix};
use spectral_spde::tobit::{build_design_centered, inverse_transform, Design};
use spectral_spde::{SpdeParams, SpectralSystem};

use super::{model_params, rows_to_matrix, Table};
use crate::data::{Dataset, Model};
use crate::error::{CliError, CliResult, Context};
use crate::run::Run;

const NUGGET_STREAM: u64 = 0x4E55_47;

/// Maps state vectors on the selected slots to the observed locations.
struct Locator {
    /// Basis rows at the stations; `None` means every grid cell via the FFT.
    basis: Option<DMatrix<f64>>,
    slots: Vec<usize>,
}

impl Locator {
    fn new(model: &Model, data: &Dataset, system: &SpectralSystem) -> Self {
        let basis = match (&data.incidence, model.selection.is_full(&model.grid)) {
            (None, true) => None,
            (h, _) => Some(observation_matrix(&model.grid, h.as_ref(), system)),
        };
        Locator { basis, slots: system.slots.clone() }
    }

    fn locate(&self, model: &Model, alpha: &[f64]) -> CliResult<Vec<f64>> {
        match &self.basis {
            Some(a) => Ok((a * nalgebra::DVector::from_column_slice(alpha)).as_slice().to_vec()),
            None => {
                let mut full = vec![0.0; model.grid.num_slots()];
                for (p, &s) in self.slots.iter().enumerate() {
                    full[s] = alpha[p];
                }
                Ok(model.grid.inverse(&full)?)
            }
        }
    }
}

/// One predictive path: horizon × stations latent values before the link.
struct LatentPath {
    values: Array2<f64>,
    /// Tobit power of the draw; `None` for a Gaussian response.
    lambda: Option<f64>,
    tau2: f64,
}

pub fn run(mut run: Run) -> CliResult<()> {
    let seed = run.seed()?;
    let horizon: usize = run.require("horizon")?;
    if horizon < 1 {
        return Err(CliError::usage("horizon must be at least 1"));
    }
    let model = Model::from_run(&run)?;
    let all = Dataset::load(&run, &model)?;
    let fit = all.fitting(&run)?;
    let origin = fit.steps();
    let nugget = run.flag("nugget", true)?;

    let paths = if run.cfg.contains("chain") {
        from_chain(&run, &model, &all, &fit, horizon, seed)?
    } else {
        let params = model_params(&run)?;
        from_filter(&run, &model, &fit, &params, horizon, seed)?
    };
    if paths.is_empty() {
        return Err(CliError::usage("no posterior draws to forecast from"));
    }

    let m = fit.stations();
    let mut leads: Vec<Array2<f64>> = (0..horizon).map(|_| Array2::zeros((paths.len(), m))).collect();
    for (i, path) in paths.iter().enumerate() {
        let mut z = vec![0.0; m];
        for (h, lead) in leads.iter_mut().enumerate() {
            if nugget {
                let mut r = rng::stream(mix(seed, NUGGET_STREAM), i as u64, h as u64);
                rng::fill_normal(&mut r, &mut z);
            }
            for j in 0..m {
                let w = path.values[[h, j]] + if nugget { path.tau2.sqrt() * z[j] } else { 0.0 };
                lead[[i, j]] = match path.lambda {
                    Some(l) => inverse_transform(w, l),
                    None => w,
                };
            }
        }
    }

    let mut median = Array2::zeros((horizon, m));
    let mut spread = Array2::zeros((horizon, m));
    for (h, lead) in leads.iter().enumerate() {
        for j in 0..m {
            let mut col: Vec<f64> = lead.column(j).to_vec();
            col.sort_by(f64::total_cmp);
            let med = quantile(&col, 0.5);
            median[[h, j]] = med;
            spread[[h, j]] = quantile(&col, 0.75) - med;
        }
        run.save_csv(&format!("samples_lead{}.csv", h + 1), lead)?;
    }
    run.save_csv("median.csv", &median)?;
    run.save_csv("q3_minus_median.csv", &spread)?;
    run.write_text(
        "forecast.txt",
        &format!("origin = {origin}\nhorizon = {horizon}\nsamples = {}\nstations = {m}\n", paths.len()),
    )?;
    run.finish()
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn from_chain(
    run: &Run,
    model: &Model,
    all: &Dataset,
    fit: &Dataset,
    horizon: usize,
    seed: u64,
) -> CliResult<Vec<LatentPath>> {
    let dir = run.path("chain")?;
    let chain = Table::load(&dir.join("chain.csv"))?;
    let alpha = Table::load(&dir.join("final_alpha.csv"))?;
    if chain.rows.len() != alpha.rows.len() {
        return Err(CliError::data("chain.csv and final_alpha.csv have different lengths"));
    }
    let design_path = dir.join("design.txt");
    let design_cfg = Config::load(&design_path).data(&design_path.display().to_string())?;
    let tobit = design_cfg.get_str("response") == Some("tobit");
    let design = future_design(&design_cfg, all, fit.steps(), horizon)?;

    let col = |name: &str| {
        chain
            .column(name)
            .ok_or_else(|| CliError::data(format!("chain.csv has no column {name:?}")))
    };
    let idx: Vec<usize> = spectral_spde::spde_model::PARAM_NAMES
        .iter()
        .map(|n| col(n))
        .collect::<CliResult<_>>()?;
    let lambda_col = col("lambda")?;
    let b_cols: Vec<usize> = (1..)
        .map_while(|j| chain.column(&format!("b{j}")))
        .collect();

    let total = chain.rows.len();
    let wanted: usize = run.get_or("forecast_draws", total)?;
    let per_draw: usize = run.get_or("samples_per_draw", 1)?;
    if wanted == 0 || per_draw == 0 {
        return Err(CliError::usage("forecast_draws and samples_per_draw must be positive"));
    }
    let picks: Vec<usize> = if total == 0 {
        Vec::new()
    } else {
        let k = wanted.min(total);
        (0..k).map(|i| i * total / k).collect()
    };

    let mut out = Vec::new();
    let mut locator: Option<Locator> = None;
    for (i, &r) in picks.iter().enumerate() {
        let row = &chain.rows[r];
        let a: [f64; 9] = std::array::from_fn(|k| row[idx[k]]);
        let theta = SpdeParams::from_array(&a);
        let lambda = row[lambda_col];
        let system =
            SpectralSystem::with_selection(&model.grid, &theta, model.delta, &model.selection)?;
        let loc = locator.get_or_insert_with(|| Locator::new(model, fit, &system));
        let mean = match &design {
            Some(d) => {
                let b: Vec<f64> = b_cols.iter().map(|&c| row[c]).collect();
                Some(d.mean(&b))
            }
            None => None,
        };
        let f = forecast(
            &ForecastStart::Point(alpha.rows[r].clone()),
            &system,
            horizon,
            per_draw,
            mix(seed, i as u64),
        )?;
        for sample in &f.samples {
            let mut values = Array2::zeros((horizon, fit.stations()));
            for h in 0..horizon {
                let v = loc.locate(model, sample.row(h).as_slice().expect("contiguous"))?;
                for (j, x) in v.into_iter().enumerate() {
                    values[[h, j]] = x + mean.as_ref().map_or(0.0, |mu| mu[[h, j]]);
                }
            }
            out.push(LatentPath {
                values,
                lambda: tobit.then_some(lambda),
                tau2: theta.tau2,
            });
        }
    }
    Ok(out)
}

/// Covariates for the forecast window, built with the centering constant
/// frozen from the fit.
fn future_design(cfg: &Config, all: &Dataset, origin: usize, horizon: usize) -> CliResult<Option<Design>> {
    let what = "design.txt";
    if !cfg.contains("center") {
        return Ok(None);
    }
    let nwp = all
        .nwp
        .as_ref()
        .ok_or_else(|| CliError::data("the chain used NWP covariates but the data have none"))?;
    if origin + horizon > all.steps() {
        return Err(CliError::data(format!(
            "NWP forecasts end at step {}, the forecast needs {}",
            all.steps(),
            origin + horizon
        )));
    }
    let future = nwp.slice(s![origin..origin + horizon, ..]).to_owned();
    let lambda_tilde: f64 = cfg.require("lambda_tilde").data(what)?;
    let center: f64 = cfg.require("center").data(what)?;
    Ok(Some(build_design_centered(&future, lambda_tilde, center).data("NWP forecasts")?))
}

fn from_filter(
    run: &Run,
    model: &Model,
    fit: &Dataset,
    params: &SpdeParams,
    horizon: usize,
    seed: u64,
) -> CliResult<Vec<LatentPath>> {
    let samples: usize = run.get_or("samples", 500)?;
    if samples == 0 {
        return Err(CliError::usage("samples must be positive"));
    }
    let system = SpectralSystem::with_selection(&model.grid, params, model.delta, &model.selection)?;
    let start = if fit.incidence.is_none() && fit.is_complete() {
        let spec = model.grid.forward_rows(&fit.values)?;
        ForecastStart::from_filter(&spectral_kalman_filter(&spec, &system, params.tau2, model.filter_init)?)
    } else {
        let a = observation_matrix(&model.grid, fit.incidence.as_ref(), &system);
        ForecastStart::from_dense(&dense_kalman_filter(&fit.values, &a, &system, params.tau2, model.filter_init)?)
    };
    let f = forecast(&start, &system, horizon, samples, seed)?;
    let loc = Locator::new(model, fit, &system);
    let mut out = Vec::with_capacity(samples);
    for sample in &f.samples {
        let rows: Vec<Vec<f64>> = (0..horizon)
            .map(|h| loc.locate(model, sample.row(h).as_slice().expect("contiguous")))
            .collect::<CliResult<_>>()?;
        out.push(LatentPath {
            values: rows_to_matrix(&rows),
            lambda: None,
            tau2: params.tau2,
        });
    }
    Ok(out)
}
