//! Adaptive Metropolis-within-Gibbs fit.
//!
//! Writes the retained draws (`chain.csv`), the final-time latent
//! coefficients of each draw for forecasting (`final_alpha.csv`), the
//! log-likelihood trace, a checkpoint that `--resume` continues from, and the
//! design constants a forecast needs to rebuild the covariates.

use std::fs::File;
use std::path::Path;
use std::time::Instant;

use spectral_spde::io::Config;
use spectral_spde::mcmc::{
    read_checkpoint, write_checkpoint, ChainConfig, ChainData, ChainReport, Response, Sampler,
};
use spectral_spde::tobit::{build_design, fit_lambda_tilde};

use super::{start_params, Table};
use crate::data::{response, Dataset, Model};
use crate::error::{CliError, CliResult, Context};
use crate::run::Run;

pub fn run(mut run: Run, resume: Option<&Path>) -> CliResult<()> {
    let seed = run.seed()?;
    let model = Model::from_run(&run)?;
    let resp = response(&run)?;
    let data = Dataset::load(&run, &model)?.fitting(&run)?;

    let mut design_cfg = Config::default();
    let design = match (resp, &data.nwp) {
        (Response::Tobit, Some(nwp)) => {
            let lambda_tilde: f64 = match run.cfg.get_str("lambda_tilde") {
                Some(_) => run.require("lambda_tilde")?,
                None => {
                    let pooled: Vec<f64> = data.values.iter().copied().collect();
                    fit_lambda_tilde(&pooled)?
                }
            };
            let d = build_design(nwp, lambda_tilde).data("NWP forecasts")?;
            design_cfg.set("lambda_tilde", format!("{:?}", d.lambda_tilde));
            design_cfg.set("center", format!("{:?}", d.center));
            Some(d)
        }
        _ => None,
    };
    let p = design.as_ref().map_or(0, |d| d.p());
    let lambda_start: f64 = match (&design, resp) {
        (Some(d), _) => run.get_or("lambda_start", d.lambda_tilde)?,
        (None, Response::Tobit) => run.get_or("lambda_start", 1.0)?,
        (None, Response::Gaussian) => 1.0,
    };

    let config = ChainConfig {
        iterations: run.require("iterations")?,
        burn_in: run.get_or("burn_in", 0)?,
        thin: run.get_or("thin", 1)?,
        seed,
        free: super::free_mask(&run)?,
        adapt: run.flag("adapt", true)?,
        adapt_every: run.get_or("adapt_every", 50)?,
        adapt_start: run.get_or("adapt_start", 200)?,
        target_accept: run.get_or("target_accept", 0.25)?,
        sample_lambda: resp == Response::Tobit && run.flag("sample_lambda", true)?,
        lambda_sd: run.get_or("lambda_sd", 0.02)?,
        delta: model.delta,
        filter_init: model.filter_init,
        keep_alpha: true,
        ..Default::default()
    };
    config.validate()?;
    let chain_data = ChainData {
        obs: data.values.clone(),
        response: resp,
        design,
        grid: model.grid.clone(),
        selection: model.selection.clone(),
        incidence: data.incidence.clone(),
    };
    chain_data.validate().data("chain data")?;

    let clock = Instant::now();
    let mut sampler = match resume {
        Some(path) => {
            let what = path.display().to_string();
            let ck = read_checkpoint(&mut File::open(path).data(&what)?).data(&what)?;
            if ck.state.b.len() != p {
                return Err(CliError::data(format!(
                    "{what} has {} regression coefficients, the data imply {p}",
                    ck.state.b.len()
                )));
            }
            Sampler::resume(chain_data, config, ck.state, ck.sample, ck.loglik_trace).data(&what)?
        }
        None => {
            let link = (resp == Response::Tobit).then_some(lambda_start);
            let theta = start_params(&run, &data, model.n(), link)?;
            Sampler::new(chain_data, config, theta, vec![0.0; p], lambda_start)?
        }
    };
    sampler.run()?;
    let elapsed = clock.elapsed().as_secs_f64();
    let report = sampler.report();
    if report.sample.is_empty() {
        eprintln!("warning: no draws retained after burn-in");
    }

    let table = Table {
        names: report.sample.names.clone(),
        rows: report.sample.draws.clone(),
    };
    run.write_bytes("chain.csv", &table.to_bytes()?)?;
    let alpha = Table {
        names: model.selection.kept.iter().map(|s| format!("slot{s}")).collect(),
        rows: report.sample.final_alpha.clone(),
    };
    run.write_bytes("final_alpha.csv", &alpha.to_bytes()?)?;
    let trace = Table {
        names: vec!["loglik".into()],
        rows: report.loglik_trace.iter().map(|&v| vec![v]).collect(),
    };
    run.write_bytes("loglik_trace.csv", &trace.to_bytes()?)?;
    let mut ck = Vec::new();
    write_checkpoint(&mut ck, &sampler.checkpoint())?;
    run.write_bytes("checkpoint.bin", &ck)?;
    design_cfg.set("response", match resp {
        Response::Gaussian => "gaussian",
        Response::Tobit => "tobit",
    });
    run.write_text("design.txt", &design_cfg.to_text())?;
    run.write_text("mcmc_report.txt", &summary(&report, &model, sampler.state.iteration))?;
    run.write_untracked(
        "timing.txt",
        &format!(
            "wall_seconds = {elapsed:.3}\nseconds_per_iteration = {:.6}\n",
            elapsed / sampler.state.iteration.max(1) as f64
        ),
    )?;
    run.finish()
}

fn summary(report: &ChainReport, model: &Model, iterations: u64) -> String {
    let s = &report.sample;
    let mut out = format!(
        "iterations = {iterations}\ndraws = {}\nacceptance = {:?}\nlambda_acceptance = {:?}\n",
        s.len(),
        report.acceptance,
        report.lambda_acceptance
    );
    for (name, ess) in &report.ess {
        if let (Some(lo), Some(med), Some(hi)) =
            (s.quantile(name, 0.025), s.quantile(name, 0.5), s.quantile(name, 0.975))
        {
            out.push_str(&format!(
                "{name}.median = {med:?}\n{name}.q025 = {lo:?}\n{name}.q975 = {hi:?}\n{name}.ess = {ess:.1}\n"
            ));
        }
    }
    if !s.is_empty() {
        let med = |name: &str| s.quantile(name, 0.5).unwrap_or(f64::NAN);
        let theta = spectral_spde::SpdeParams {
            rho0: med("rho0"),
            sigma2: med("sigma2"),
            zeta: med("zeta"),
            rho1: med("rho1"),
            gamma: med("gamma"),
            psi: med("psi"),
            mu: [med("mu_x"), med("mu_y")],
            tau2: med("tau2"),
        };
        out.push_str(&model.physical_lines("median.", &theta));
    }
    out
}
