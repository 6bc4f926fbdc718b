//! Draws a latent trajectory and the matching observations.
//!
//! Without stations every grid cell is observed and the output is
//! `observations.spte`. With stations (`station_grid` or `stations_file`)
//! the output is a station table. A Tobit response also gets an NWP column:
//! the forecast is driven by an independent field with the same dynamics,
//! `y_F = max(0, nwp_offset + nwp_scale·η)^λ̃`, and the latent rain is
//! `w = x(y_F)ᵀb + ξ + ν`. A stations file is a CSV with a header and the
//! columns `station_id,x,y`.

use std::fs::File;

use ndarray::{Array2, Axis};
use spectral_spde::io::{write_station_csv, Config, StationTable};
use spectral_spde::mcmc::Response;
use spectral_spde::rng::mix;
use spectral_spde::state_space::{observe, simulate, InitialState};
use spectral_spde::tobit::{build_design, inverse_transform};
use spectral_spde::SpectralSystem;

use crate::data::{response, Model};
use crate::error::{CliError, CliResult, Context};
use crate::run::Run;

/// Seed tag of the NWP driver field.
const NWP_STREAM: u64 = 0x4E57_50;
const OBS_STREAM: u64 = 0x4F42_53;

struct Stations {
    ids: Vec<String>,
    coords: Vec<[f64; 2]>,
}

fn stations(run: &Run) -> CliResult<Option<Stations>> {
    if let Some(side) = run.cfg.get_str("station_grid").map(|_| run.require::<usize>("station_grid")) {
        let side = side?;
        if side == 0 {
            return Err(CliError::usage("station_grid must be positive"));
        }
        let mut ids = Vec::new();
        let mut coords = Vec::new();
        for r in 0..side {
            for c in 0..side {
                ids.push(format!("s{r:03}_{c:03}"));
                coords.push([c as f64 / side as f64, r as f64 / side as f64]);
            }
        }
        return Ok(Some(Stations { ids, coords }));
    }
    if run.cfg.contains("stations_file") {
        let path = run.path("stations_file")?;
        let what = path.display().to_string();
        let mut rd = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(File::open(&path).data(&what)?);
        let mut ids = Vec::new();
        let mut coords = Vec::new();
        for rec in rd.deserialize::<(String, f64, f64)>() {
            let (id, x, y) = rec.data(&what)?;
            ids.push(id);
            coords.push([x, y]);
        }
        if ids.is_empty() {
            return Err(CliError::data(format!("{what} lists no stations")));
        }
        return Ok(Some(Stations { ids, coords }));
    }
    Ok(None)
}

pub fn run(mut run: Run) -> CliResult<()> {
    let seed = run.seed()?;
    let model = Model::from_run(&run)?;
    let params = run.cfg.params()?;
    let steps: usize = run.require("steps")?;
    let init = match run.get_or("init", "stationary".to_string())?.as_str() {
        "stationary" => InitialState::Stationary,
        "innovation" => InitialState::Innovation,
        other => {
            return Err(CliError::usage(format!(
                "init must be stationary or innovation, got {other:?}"
            )))
        }
    };
    let resp = response(&run)?;
    let n = model.n();
    let system = SpectralSystem::with_selection(&model.grid, &params, model.delta, &model.selection)?;
    let traj = simulate(&system, steps, seed, &init)?;
    run.save_spte("fields.spte", n, &traj.fields(&model.grid, &system)?)?;

    let mut truth = Config::default();
    truth.set_params(&params);

    let Some(st) = stations(&run)? else {
        if resp == Response::Tobit {
            return Err(CliError::usage("a tobit response needs stations"));
        }
        let obs = observe(&traj, &model.grid, &system, params.tau2, None, mix(seed, OBS_STREAM))?;
        run.save_spte("observations.spte", n, &obs.w)?;
        run.write_text("truth.txt", &truth.to_text())?;
        return run.finish();
    };

    let incidence = model.incidence(&st.coords)?;
    let obs = observe(
        &traj,
        &model.grid,
        &system,
        params.tau2,
        Some(&incidence),
        mix(seed, OBS_STREAM),
    )?;
    let mut values = obs.w;
    let m = st.ids.len();
    let nwp = match resp {
        Response::Gaussian => Array2::from_elem((steps, m), f64::NAN),
        Response::Tobit => {
            let lambda: f64 = run.require("lambda")?;
            let lambda_tilde: f64 = run.get_or("lambda_tilde", lambda)?;
            let b = [run.require::<f64>("b1")?, run.require::<f64>("b2")?];
            let offset: f64 = run.get_or("nwp_offset", 0.0)?;
            let scale: f64 = run.get_or("nwp_scale", 1.0)?;
            let driver = simulate(&system, steps, mix(seed, NWP_STREAM), &init)?;
            let eta = driver
                .fields(&model.grid, &system)?
                .select(Axis(1), &incidence.rows);
            let nwp = eta.mapv(|e| inverse_transform(offset + scale * e, lambda_tilde));
            let design = build_design(&nwp, lambda_tilde)?;
            values += &design.mean(&b);
            values.mapv_inplace(|w| inverse_transform(w, lambda));
            truth.set("lambda", format!("{lambda:?}"));
            truth.set("lambda_tilde", format!("{lambda_tilde:?}"));
            truth.set("b1", format!("{:?}", b[0]));
            truth.set("b2", format!("{:?}", b[1]));
            truth.set("center", format!("{:?}", design.center));
            nwp
        }
    };
    let table = StationTable {
        station_ids: st.ids,
        coords: st.coords,
        rain: values,
        nwp,
    };
    let mut buf = Vec::new();
    write_station_csv(&mut buf, &table)?;
    run.write_bytes("stations.csv", &buf)?;
    run.write_text("truth.txt", &truth.to_text())?;
    run.finish()
}
