pub mod covariance;
pub mod filter;
pub mod fit_mcmc;
pub mod fit_mle;
pub mod forecast;
pub mod score;
pub mod simulate;

use std::fs::File;
use std::path::Path;

use ndarray::Array2;
use spectral_spde::mcmc::default_start;
use spectral_spde::spde_model::{covariance_function, PARAM_NAMES};
use spectral_spde::SpdeParams;

use crate::data::{read_params, Dataset};
use crate::error::{CliError, CliResult, Context};
use crate::run::Run;

/// Parameters from a `params` file if given, else from the config itself.
pub fn model_params(run: &Run) -> CliResult<SpdeParams> {
    if run.cfg.contains("params") {
        read_params(&run.path("params")?)
    } else {
        Ok(run.cfg.params()?)
    }
}

/// Starting point for a fit: explicit parameters if present and
/// `start = auto` is not set, otherwise
/// [`default_start`] rescaled so that the model's marginal variance matches
/// nine tenths of the variance of the latent values, with the nugget taking
/// the remaining tenth. For a Tobit response the positive amounts are
/// transformed with `lambda` and censored entries count as zero, which is a
/// rough but serviceable guess.
pub fn start_params(run: &Run, data: &Dataset, n: usize, lambda: Option<f64>) -> CliResult<SpdeParams> {
    let auto = match run.cfg.get_str("start") {
        None => !(run.cfg.contains("params") || run.cfg.contains("rho0")),
        Some("auto") => true,
        Some("config") => false,
        Some(other) => {
            return Err(CliError::usage(format!("start must be auto or config, got {other:?}")))
        }
    };
    if !auto {
        return model_params(run);
    }
    let vals: Vec<f64> = data
        .values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .map(|v| match lambda {
            Some(l) if v > 0.0 => v.powf(1.0 / l),
            _ => v,
        })
        .collect();
    if vals.len() < 2 {
        return Err(CliError::data("too few observed values to pick a start"));
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
    if !(var > 0.0) {
        return Err(CliError::data("the data have no variation"));
    }
    let mut p = default_start(0.1 * var);
    let unit = covariance_function(0.0, [0.0, 0.0], &p, n)? / p.sigma2;
    p.sigma2 = 0.9 * var / unit;
    Ok(p)
}

/// Parameters listed in `fixed = name,name,...` stay at their start values.
pub fn free_mask(run: &Run) -> CliResult<[bool; 9]> {
    let mut free = [true; 9];
    if let Some(list) = run.cfg.get_str("fixed") {
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let i = PARAM_NAMES
                .iter()
                .position(|p| *p == name)
                .ok_or_else(|| CliError::usage(format!("fixed: unknown parameter {name:?}")))?;
            free[i] = false;
        }
    }
    Ok(free)
}

/// A CSV table with a header row.
pub struct Table {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn to_bytes(&self) -> CliResult<Vec<u8>> {
        let mut wr = csv::Writer::from_writer(Vec::new());
        wr.write_record(&self.names).data("csv")?;
        for r in &self.rows {
            wr.write_record(r.iter().map(|v| format!("{v:?}"))).data("csv")?;
        }
        wr.into_inner().data("csv")
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let what = path.display().to_string();
        let mut rd = csv::Reader::from_reader(File::open(path).data(&what)?);
        let names = rd.headers().data(&what)?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.data(&what)?;
            let row: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            rows.push(row.data(&what)?);
        }
        Ok(Table { names, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Array2<f64> {
    let cols = rows.first().map_or(0, Vec::len);
    Array2::from_shape_fn((rows.len(), cols), |(i, j)| rows[i][j])
}
