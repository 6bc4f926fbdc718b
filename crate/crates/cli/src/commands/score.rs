//! Scores a forecast directory against the observations that follow the
//! fitting window, next to the persistence baseline that repeats the last
//! observed value of each station.

use ndarray::Array2;
use spectral_spde::io::{load_csv_matrix, Config};
use spectral_spde::scoring::{aggregate, ForecastCase, Grouping, ScoreReport};

use crate::data::{Dataset, Model};
use crate::error::{CliError, CliResult, Context};
use crate::run::Run;

pub fn run(mut run: Run) -> CliResult<()> {
    let model = Model::from_run(&run)?;
    let all = Dataset::load(&run, &model)?;
    let dir = run.path("forecast")?;
    let info_path = dir.join("forecast.txt");
    let info = Config::load(&info_path).data(&info_path.display().to_string())?;
    let origin: usize = info.require("origin").data("forecast.txt")?;
    let horizon: usize = info.require("horizon").data("forecast.txt")?;
    if origin + horizon > all.steps() {
        return Err(CliError::data(format!(
            "observations end at step {}, the forecast reaches step {}",
            all.steps(),
            origin + horizon
        )));
    }
    let m = all.stations();
    let last = last_observed(&all.values, origin)?;

    let mut cases = Vec::with_capacity(horizon);
    let mut baseline = Vec::with_capacity(horizon);
    for h in 1..=horizon {
        let name = format!("samples_lead{h}.csv");
        let samples = load_csv_matrix(&dir.join(&name)).data(&name)?;
        if samples.ncols() != m {
            return Err(CliError::data(format!(
                "{name} has {} columns for {m} stations",
                samples.ncols()
            )));
        }
        let observed = all.values.row(origin + h - 1).to_vec();
        cases.push(ForecastCase {
            lead: h,
            samples: samples.outer_iter().map(|r| r.to_vec()).collect(),
            observed: observed.clone(),
        });
        // A point mass written as two equal members, so its CRPS is defined
        // and equals the absolute error.
        baseline.push(ForecastCase { lead: h, samples: vec![last.clone(), last.clone()], observed });
    }

    let mut csv = String::from("grouping,lead,crps,mae,persistence_mae,count\n");
    let mut summary = String::new();
    for (label, grouping) in [("stationwise", Grouping::Stationwise), ("areal", Grouping::Areal)] {
        let model_scores: ScoreReport = aggregate(&cases, grouping)?;
        let base: ScoreReport = aggregate(&baseline, grouping)?;
        for (ls, bs) in model_scores.per_lead.iter().zip(&base.per_lead) {
            csv.push_str(&format!(
                "{label},{},{:?},{:?},{:?},{}\n",
                ls.lead, ls.crps, ls.mae, bs.mae, ls.count
            ));
        }
        csv.push_str(&format!(
            "{label},all,{:?},{:?},{:?},{}\n",
            model_scores.crps, model_scores.mae, base.mae, model_scores.count
        ));
        summary.push_str(&format!(
            "{label}.crps = {:?}\n{label}.mae = {:?}\n{label}.persistence_mae = {:?}\n{label}.beats_persistence = {}\n",
            model_scores.crps,
            model_scores.mae,
            base.mae,
            model_scores.mae < base.mae
        ));
    }
    run.write_text("scores.csv", &csv)?;
    run.write_text("score_report.txt", &summary)?;
    run.finish()
}

/// Most recent observed value of each station before `origin`.
fn last_observed(values: &Array2<f64>, origin: usize) -> CliResult<Vec<f64>> {
    (0..values.ncols())
        .map(|j| {
            (0..origin)
                .rev()
                .map(|t| values[[t, j]])
                .find(|v| v.is_finite())
                .ok_or_else(|| CliError::data(format!("station {j} has no observation before the forecast")))
        })
        .collect()
}
