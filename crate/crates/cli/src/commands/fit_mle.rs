//! Maximum-likelihood fit on complete gridded data.

use spectral_spde::inference::{fit_mle, MleConfig};
use spectral_spde::io::Config;

use crate::data::{Dataset, Model};
use crate::error::{CliError, CliResult};
use crate::run::Run;

pub fn run(mut run: Run) -> CliResult<()> {
    let model = Model::from_run(&run)?;
    let data = Dataset::load(&run, &model)?.fitting(&run)?;
    if data.incidence.is_some() || !data.is_complete() {
        return Err(CliError::data(
            "fit-mle needs complete gridded data; use fit-mcmc for stations or gaps",
        ));
    }
    let start = super::start_params(&run, &data, model.n(), None)?;
    let cfg = MleConfig {
        free: super::free_mask(&run)?,
        max_iter: run.get_or("max_iter", 2000)?,
        delta: model.delta,
        init: model.filter_init,
        ..Default::default()
    };
    let spec = model.grid.forward_rows(&data.values)?;
    let fit = fit_mle(&spec, &model.grid, &model.selection, &start, &cfg)?;

    let mut out = Config::default();
    out.set_params(&fit.params);
    run.write_text("params.txt", &out.to_text())?;
    let mut report = format!(
        "loglik = {:?}\ninitial_loglik = {:?}\niterations = {}\nconverged = {}\ngrad_norm = {:?}\n",
        fit.loglik, fit.initial_loglik, fit.iterations, fit.converged, fit.grad_norm
    );
    report.push_str(&model.physical_lines("", &fit.params));
    run.write_text("mle_report.txt", &report)?;
    run.finish()
}
