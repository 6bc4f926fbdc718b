//! Covariance tables of the truncated solution and the truncation bound.
//!
//! `covariance.csv` lists `C^n(t, s)` over a lattice of time lags
//! (`t_lags`) and spatial lags `s·dir` (`s_lags`, `s_dir`) for each `n` in
//! `n_list` and for the reference `n_ref`. For a separable model
//! (`ρ₁ = 0`, `μ = 0`) it adds the ratio `C(t, s)/C(0, s)` at `n_ref`, which
//! should equal `e^{−ζ|t|}` in every row. `bound.csv` compares the bound for
//! each `n` with the largest difference in the table.

use spectral_spde::spde_model::{approximation_bound, covariance_table};

use crate::error::{CliError, CliResult};
use crate::run::Run;

fn list<T: std::str::FromStr>(run: &Run, key: &str, default: &str) -> CliResult<Vec<T>> {
    let text = run.cfg.get_str(key).unwrap_or(default).to_string();
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| CliError::usage(format!("{key}: cannot parse {s:?}")))
        })
        .collect()
}

pub fn run(mut run: Run) -> CliResult<()> {
    let params = super::model_params(&run)?;
    let ns: Vec<usize> = list(&run, "n_list", "8,16,32")?;
    let n_ref: usize = run.get_or("n_ref", 128)?;
    let t_lags: Vec<f64> = list(&run, "t_lags", "0,1,2,3")?;
    let s_lags: Vec<f64> = list(&run, "s_lags", "0,0.05,0.1,0.2,0.4")?;
    let dir: Vec<f64> = list(&run, "s_dir", "1,0")?;
    let [dx, dy] = dir[..] else {
        return Err(CliError::usage("s_dir needs two components"));
    };
    if ns.is_empty() {
        return Err(CliError::usage("n_list is empty"));
    }

    let lags: Vec<(f64, [f64; 2])> = t_lags
        .iter()
        .flat_map(|&t| s_lags.iter().map(move |&s| (t, [s * dx, s * dy])))
        .collect();
    let reference = covariance_table(&lags, &params, n_ref)?;
    let coarse: Vec<Vec<f64>> = ns
        .iter()
        .map(|&n| covariance_table(&lags, &params, n))
        .collect::<Result<_, _>>()?;
    let separable = params.rho1 == 0.0 && params.mu == [0.0, 0.0];

    let mut header = vec!["t".to_string(), "sx".into(), "sy".into(), format!("c_ref{n_ref}")];
    header.extend(ns.iter().map(|n| format!("c_n{n}")));
    if separable {
        header.push("ratio_to_t0".into());
        header.push("exp_neg_zeta_t".into());
    }
    let mut csv = header.join(",") + "\n";
    for (i, &(t, s)) in lags.iter().enumerate() {
        let mut row = vec![format!("{t:?}"), format!("{:?}", s[0]), format!("{:?}", s[1]), format!("{:?}", reference[i])];
        row.extend(coarse.iter().map(|c| format!("{:?}", c[i])));
        if separable {
            // Row of the same spatial lag at t = 0, if the lattice has one.
            let base = lags.iter().position(|&(t0, s0)| t0 == 0.0 && s0 == s);
            let ratio = base.map_or(f64::NAN, |b| reference[i] / reference[b]);
            row.push(format!("{ratio:?}"));
            row.push(format!("{:?}", (-params.zeta * t.abs()).exp()));
        }
        csv.push_str(&(row.join(",") + "\n"));
    }

    let mut bounds = String::from("n,bound,max_abs_diff,within_bound\n");
    for (n, c) in ns.iter().zip(&coarse) {
        let bound = approximation_bound(&params, *n, n_ref)?;
        let worst = c
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        bounds.push_str(&format!("{n},{bound:?},{worst:?},{}\n", worst <= bound));
    }
    run.write_text("covariance.csv", &csv)?;
    run.write_text("bound.csv", &bounds)?;
    run.finish()
}
