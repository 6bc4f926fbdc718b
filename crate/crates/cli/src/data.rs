//! Model settings and datasets shared by the subcommands.
//!
//! A dataset is either a gridded field sequence (`.spte`), where every grid
//! cell is observed, or a station table (`.csv`) with columns `time_index`,
//! `station_id`, `x`, `y`, `rain_mm` and `nwp_mm`. Station coordinates are
//! on the physical unit square; with `padding = p` the study area occupies
//! the lower-left `1/p` of the periodic domain so that the wrap-around does
//! not connect opposite edges.

use std::fs::File;
use std::path::Path;

use ndarray::{s, Array2};
use spectral_spde::io::{self, StationTable};
use spectral_spde::mcmc::Response;
use spectral_spde::spectral_grid::{build_incidence, select_low_frequencies};
use spectral_spde::{FieldGrid, FilterInit, FrequencySelection, IncidenceMap, SpdeParams, WavenumberGrid};

use crate::error::{CliError, CliResult, Context};
use crate::run::Run;

pub struct Model {
    pub grid: WavenumberGrid,
    pub selection: FrequencySelection,
    pub delta: f64,
    pub filter_init: FilterInit,
    pub padding: usize,
    /// Side of the physical study area in km, for reporting.
    pub domain_km: Option<f64>,
}

impl Model {
    pub fn from_run(run: &Run) -> CliResult<Self> {
        let n: usize = run.require("n")?;
        let grid = WavenumberGrid::new(n)?;
        let selection = match run.cfg.get_str("k") {
            Some(_) => select_low_frequencies(&grid, run.require("k")?)?,
            None => FrequencySelection::full(&grid),
        };
        let filter_init = match run.get_or("filter_init", "innovation".to_string())?.as_str() {
            "innovation" => FilterInit::Innovation,
            "stationary" => FilterInit::Stationary,
            other => {
                return Err(CliError::usage(format!(
                    "filter_init must be innovation or stationary, got {other:?}"
                )))
            }
        };
        let padding: usize = run.get_or("padding", 1)?;
        if padding == 0 {
            return Err(CliError::usage("padding must be at least 1"));
        }
        let domain_km = match run.cfg.get_str("domain_km") {
            Some(_) => Some(run.require::<f64>("domain_km")?),
            None => None,
        };
        Ok(Model {
            grid,
            selection,
            delta: run.get_or("delta", 1.0)?,
            filter_init,
            padding,
            domain_km,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// Maps physical station coordinates onto the periodic domain.
    pub fn incidence(&self, coords: &[[f64; 2]]) -> CliResult<IncidenceMap> {
        let p = self.padding as f64;
        let scaled: Vec<[f64; 2]> = coords.iter().map(|c| [c[0] / p, c[1] / p]).collect();
        build_incidence(&scaled, &FieldGrid::new(self.n())).data("station coordinates")
    }

    /// Lines giving the ranges and drift in km, when a domain size is set.
    pub fn physical_lines(&self, prefix: &str, p: &SpdeParams) -> String {
        let Some(km) = self.domain_km else {
            return String::new();
        };
        let scale = km * self.padding as f64;
        format!(
            "{prefix}rho0_km = {:?}\n{prefix}rho1_km = {:?}\n{prefix}mu_x_km = {:?}\n{prefix}mu_y_km = {:?}\n",
            p.rho0 * scale,
            p.rho1 * scale,
            p.mu[0] * scale,
            p.mu[1] * scale
        )
    }
}

pub fn response(run: &Run) -> CliResult<Response> {
    match run.get_or("response", "gaussian".to_string())?.as_str() {
        "gaussian" => Ok(Response::Gaussian),
        "tobit" => Ok(Response::Tobit),
        other => Err(CliError::usage(format!(
            "response must be gaussian or tobit, got {other:?}"
        ))),
    }
}

pub struct Dataset {
    /// `T × m` values; NaN marks missing.
    pub values: Array2<f64>,
    /// NWP forecasts for station data.
    pub nwp: Option<Array2<f64>>,
    /// Station cells; `None` for gridded data.
    pub incidence: Option<IncidenceMap>,
}

impl Dataset {
    pub fn load(run: &Run, model: &Model) -> CliResult<Self> {
        let path = run.path("data")?;
        Self::load_path(&path, model)
    }

    pub fn load_path(path: &Path, model: &Model) -> CliResult<Self> {
        let what = path.display().to_string();
        match path.extension().and_then(|e| e.to_str()) {
            Some("spte") => {
                let (n, values) = io::load_spte(path).data(&what)?;
                if n != model.n() {
                    return Err(CliError::data(format!(
                        "{what} holds an n={n} grid but the model has n={}",
                        model.n()
                    )));
                }
                Ok(Dataset { values, nwp: None, incidence: None })
            }
            Some("csv") => {
                let table: StationTable = io::read_station_csv(File::open(path).data(&what)?).data(&what)?;
                let incidence = model.incidence(&table.coords)?;
                Ok(Dataset {
                    values: table.rain,
                    nwp: Some(table.nwp),
                    incidence: Some(incidence),
                })
            }
            _ => Err(CliError::usage(format!(
                "{what}: data files must end in .spte or .csv"
            ))),
        }
    }

    pub fn steps(&self) -> usize {
        self.values.nrows()
    }

    pub fn stations(&self) -> usize {
        self.values.ncols()
    }

    /// Rows `start..end`.
    pub fn window(&self, start: usize, end: usize) -> CliResult<Dataset> {
        if start >= end || end > self.steps() {
            return Err(CliError::data(format!(
                "time window {start}..{end} does not fit the {} available steps",
                self.steps()
            )));
        }
        Ok(Dataset {
            values: self.values.slice(s![start..end, ..]).to_owned(),
            nwp: self.nwp.as_ref().map(|m| m.slice(s![start..end, ..]).to_owned()),
            incidence: self.incidence.clone(),
        })
    }

    /// Leading steps used for fitting: `fit_steps` or everything.
    pub fn fitting(&self, run: &Run) -> CliResult<Dataset> {
        let t: usize = run.get_or("fit_steps", self.steps())?;
        self.window(0, t)
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

pub fn read_params(cfg_path: &Path) -> CliResult<SpdeParams> {
    let what = cfg_path.display().to_string();
    let cfg = io::Config::load(cfg_path).data(&what)?;
    cfg.params().data(&what)
}
