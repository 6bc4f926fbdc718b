//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines are always printed. The
//! process exits nonzero when any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use spectral_spde::inference::{
    backward_sample, fit_mle, spectral_kalman_filter, FilterInit, MleConfig,
};
use spectral_spde::io::Config;
use spectral_spde::mcmc::{run_chain, ChainConfig, ChainData, Response};
use spectral_spde::scoring::crps_sample;
use spectral_spde::spde_model::{
    approximation_bound, covariance_table, whittle_spectrum, PARAM_NAMES,
};
use spectral_spde::state_space::{observe, simulate};
use spectral_spde::testing::{crps_double_sum, dense_basis, dense_conditional, dense_g, dense_loglik};
use spectral_spde::{FrequencySelection, InitialState, SpdeParams, SpectralSystem, WavenumberGrid};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_params(rng: &mut StdRng) -> SpdeParams {
    SpdeParams {
        rho0: rng.random_range(0.1..0.4),
        sigma2: rng.random_range(20.0..200.0),
        zeta: rng.random_range(0.05..1.0),
        rho1: rng.random_range(0.01..0.1),
        gamma: rng.random_range(0.5..4.0),
        psi: rng.random_range(0.0..1.5),
        mu: [rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)],
        tau2: rng.random_range(0.1..1.0),
    }
}

fn stack(w: &Array2<f64>) -> DVector<f64> {
    DVector::from_iterator(w.len(), w.iter().cloned())
}

/// Gridded data at `n`: the system, the physical observations and their
/// spectral coefficients.
fn gridded(n: usize, steps: usize, p: &SpdeParams, seed: u64) -> (WavenumberGrid, SpectralSystem, Array2<f64>, Array2<f64>) {
    let grid = WavenumberGrid::new(n).unwrap();
    let sys = SpectralSystem::new(&grid, p, 1.0).unwrap();
    let traj = simulate(&sys, steps, seed, &InitialState::Innovation).unwrap();
    let obs = observe(&traj, &grid, &sys, p.tau2, None, seed + 1).unwrap();
    let spec = grid.forward_rows(&obs.w).unwrap();
    (grid, sys, obs.w, spec)
}

fn likelihood_oracle() -> Check {
    let clock = Instant::now();
    let mut rng = StdRng::seed_from_u64(101);
    let steps = 5;
    let mut worst = 0.0f64;
    for rep in 0..20 {
        let p = random_params(&mut rng);
        let (grid, sys, w, spec) = gridded(4, steps, &p, 1000 + rep);
        let f = spectral_kalman_filter(&spec, &sys, p.tau2, FilterInit::Innovation).map_err(|e| e.to_string())?;
        let oracle = dense_loglik(&stack(&w), &dense_basis(&grid), &sys, steps, p.tau2, FilterInit::Innovation);
        worst = worst.max((f.loglik - oracle).abs() / oracle.abs());
    }
    let secs = clock.elapsed().as_secs_f64();
    ensure(worst <= 1e-8, || format!("relative error {worst:.2e} exceeds 1e-8"))?;
    ensure(secs < 1.0, || format!("took {secs:.2} s"))?;
    Ok(format!("20 draws, worst relative error {worst:.1e}, {secs:.3} s"))
}

fn matrix_identities() -> Check {
    let grid = WavenumberGrid::new(4).unwrap();
    let mut rng = StdRng::seed_from_u64(102);
    let (mut worst_f, mut worst_q0) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let p = random_params(&mut rng);
        let sys = SpectralSystem::new(&grid, &p, rng.random_range(0.1..3.0)).unwrap();
        let g = dense_g(&sys);
        let ggt = &g * g.transpose();
        let f = DMatrix::from_diagonal(&DVector::from_column_slice(&sys.f));
        worst_f = worst_f.max((&ggt - f).amax());
        // Q̃₀ = (I − GGᵀ)⁻¹ Q̃, solved densely.
        let lhs = DMatrix::identity(16, 16) - &ggt;
        let q = DVector::from_column_slice(&sys.qtilde);
        let q0 = lhs.lu().solve(&q).ok_or("I - GG^T is singular")?;
        for i in 0..16 {
            worst_q0 = worst_q0.max((sys.q0[i] - q0[i]).abs() / q0[i]);
        }
    }
    ensure(worst_f <= 1e-14, || format!("max |GG^T - F| = {worst_f:.2e}"))?;
    ensure(worst_q0 <= 1e-10, || format!("stationary variance relative error {worst_q0:.2e}"))?;
    Ok(format!("100 draws, max |GG^T - F| {worst_f:.1e}, stationary variance rel. error {worst_q0:.1e}"))
}

fn ffbs() -> Check {
    let clock = Instant::now();
    let mut rng = StdRng::seed_from_u64(103);
    let p = random_params(&mut rng);
    let steps = 3;
    let (grid, sys, w, spec) = gridded(4, steps, &p, 7);
    let f = spectral_kalman_filter(&spec, &sys, p.tau2, FilterInit::Innovation).map_err(|e| e.to_string())?;
    let (mean, cov) = dense_conditional(&stack(&w), &dense_basis(&grid), &sys, steps, p.tau2, FilterInit::Innovation);
    let d = 16 * steps;
    let reps = 200_000;
    let mut s1 = vec![0.0; d];
    let mut s2 = vec![0.0; d];
    for r in 0..reps {
        let a = backward_sample(&f, &sys, r as u64).map_err(|e| e.to_string())?;
        for (i, v) in a.iter().enumerate() {
            s1[i] += v;
            let c = v - mean[i];
            s2[i] += c * c;
        }
    }
    let nr = reps as f64;
    let mut worst_z = 0.0f64;
    let mut worst_var = 0.0f64;
    for i in 0..d {
        let se = (cov[(i, i)] / nr).sqrt();
        worst_z = worst_z.max((s1[i] / nr - mean[i]).abs() / se);
        worst_var = worst_var.max((s2[i] / nr / cov[(i, i)] - 1.0).abs());
    }
    let secs = clock.elapsed().as_secs_f64();
    ensure(worst_z <= 3.0, || format!("mean off by {worst_z:.2} standard errors"))?;
    ensure(worst_var <= 0.02, || format!("variance off by {:.2}%", 100.0 * worst_var))?;
    ensure(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "{reps} draws, worst mean {worst_z:.2} SE, worst variance {:.2}%, {secs:.1} s",
        100.0 * worst_var
    ))
}

fn truncation_bound() -> Check {
    let p = SpdeParams::advection_example();
    let lags: Vec<(f64, [f64; 2])> = [0.0, 1.0, 2.0, 5.0, 10.0]
        .iter()
        .flat_map(|&t| [[0.0, 0.0], [0.05, 0.0], [0.1, -0.1], [0.25, 0.15]].map(move |s| (t, s)))
        .collect();
    let reference = covariance_table(&lags, &p, 128).map_err(|e| e.to_string())?;
    let mut bounds = Vec::new();
    let mut report = Vec::new();
    for n in [8, 16, 32] {
        let coarse = covariance_table(&lags, &p, n).map_err(|e| e.to_string())?;
        let bound = approximation_bound(&p, n, 128).map_err(|e| e.to_string())?;
        let worst = coarse.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(worst <= bound, || format!("n={n}: difference {worst:.3e} above bound {bound:.3e}"))?;
        report.push(format!("n={n} {worst:.2e}<={bound:.2e}"));
        bounds.push(bound);
    }
    ensure(bounds.windows(2).all(|w| w[1] < w[0]), || format!("bound not decreasing: {bounds:?}"))?;
    Ok(format!("{} lags, {}", lags.len(), report.join(", ")))
}

fn separability() -> Check {
    let zeta = 0.3;
    let p = SpdeParams::separable(0.1, 2.0, zeta, 0.0);
    let n = 16;
    let grid = WavenumberGrid::new(n).unwrap();
    let spatial = [[0.0, 0.0], [0.03, 0.0], [0.05, 0.05], [0.1, -0.04], [0.15, 0.1]];
    // C(s) = Σ f̃(k) cos(kᵀs) over the truncated wavenumbers, each real pair
    // standing for ±k.
    let c_s = |s: [f64; 2]| -> f64 {
        (0..grid.num_wavenumbers())
            .map(|w| {
                let k = grid.wavenumber(w);
                let weight = if grid.is_cosine_only(w) { 1.0 } else { 2.0 };
                weight * whittle_spectrum(k, p.rho0, p.sigma2) * (k[0] * s[0] + k[1] * s[1]).cos()
            })
            .sum()
    };
    let lags: Vec<(f64, [f64; 2])> = [-2.0, 0.0, 0.5, 1.0, 4.0]
        .iter()
        .flat_map(|&t| spatial.map(move |s| (t, s)))
        .collect();
    let table = covariance_table(&lags, &p, n).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (&(t, s), &c) in lags.iter().zip(&table) {
        let closed = (-zeta * t.abs()).exp() / (2.0 * zeta) * c_s(s);
        worst = worst.max((c - closed).abs() / closed.abs());
    }
    ensure(worst <= 1e-10, || format!("relative error {worst:.2e}"))?;
    Ok(format!("{} lags, worst relative error {worst:.1e}", lags.len()))
}

fn stationarity() -> Check {
    let grid = WavenumberGrid::new(4).unwrap();
    let sys = SpectralSystem::new(&grid, &SpdeParams::advection_example(), 1.0).unwrap();
    let steps = 50_000;
    let traj = simulate(&sys, steps, 106, &InitialState::Stationary).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for i in 0..sys.dim() {
        let var = traj.alphas.column(i).iter().map(|v| v * v).sum::<f64>() / steps as f64;
        // Sample second moment of an AR(1) with squared coefficient F has
        // variance 2 q0² (1 + F)/(1 − F)/T.
        let f = sys.f[i];
        let se = sys.q0[i] * (2.0 * (1.0 + f) / (1.0 - f) / steps as f64).sqrt();
        worst = worst.max((var - sys.q0[i]).abs() / se);
    }
    ensure(worst <= 3.0, || format!("variance off by {worst:.2} standard errors"))?;
    Ok(format!("{steps} steps, {} coefficients, worst {worst:.2} SE", sys.dim()))
}

/// Smallest wall time of `reps` calls.
fn min_time(reps: usize, mut f: impl FnMut()) -> f64 {
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

fn complexity() -> Check {
    let steps = 40;
    let p = SpdeParams { tau2: 0.1, ..SpdeParams::advection_example() };
    let mut filter_time = Vec::new();
    // 182² = 33124 is within 1.1% of twice 128².
    for n in [128, 182] {
        let grid = WavenumberGrid::new(n).unwrap();
        let sys = SpectralSystem::new(&grid, &p, 1.0).unwrap();
        let mut rng = StdRng::seed_from_u64(n as u64);
        let spec = Array2::from_shape_fn((steps, n * n), |_| rng.random_range(-1.0..1.0));
        filter_time.push(min_time(7, || {
            std::hint::black_box(spectral_kalman_filter(&spec, &sys, p.tau2, FilterInit::Innovation).unwrap());
        }));
    }
    let ratio = filter_time[1] / filter_time[0];

    let mut x = Vec::new();
    let mut y = Vec::new();
    for n in [32usize, 64, 128, 256] {
        let grid = WavenumberGrid::new(n).unwrap();
        let mut rng = StdRng::seed_from_u64(n as u64);
        let fields = Array2::from_shape_fn((steps, n * n), |_| rng.random_range(-1.0..1.0));
        let t = min_time(7, || {
            std::hint::black_box(grid.forward_rows(&fields).unwrap());
        });
        let big_n = (n * n) as f64;
        x.push((big_n * big_n.ln()).ln());
        y.push(t.ln());
    }
    let mx = x.iter().sum::<f64>() / 4.0;
    let my = y.iter().sum::<f64>() / 4.0;
    let slope = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
        / x.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
    ensure(ratio <= 2.3, || format!("filter time ratio {ratio:.2} when n² doubles"))?;
    ensure((slope - 1.0).abs() <= 0.2, || format!("FFT log-log slope {slope:.3} against N log N"))?;
    Ok(format!("filter ratio {ratio:.2} for doubled n², FFT slope {slope:.3} against N log N"))
}

fn mcmc_recovery() -> Check {
    let clock = Instant::now();
    let n = 8;
    let grid = WavenumberGrid::new(n).unwrap();
    let mut truth = SpdeParams::advection_example();
    let field_var = SpectralSystem::new(&grid, &truth, 1.0).unwrap().q0.iter().sum::<f64>() / (n * n) as f64;
    truth.tau2 = 0.1 * field_var;
    let sys = SpectralSystem::new(&grid, &truth, 1.0).unwrap();
    let ta = truth.to_array();
    let mut good_reps = 0;
    let mut accept = Vec::new();
    let mut covered_counts = Vec::new();
    for rep in 0..10u64 {
        let traj = simulate(&sys, 500, 100 + rep, &InitialState::Innovation).map_err(|e| e.to_string())?;
        let obs = observe(&traj, &grid, &sys, truth.tau2, None, 200 + rep).map_err(|e| e.to_string())?;
        let selection = FrequencySelection::full(&grid);
        let rough = SpdeParams {
            rho0: 0.1,
            sigma2: 1.0,
            zeta: 0.05,
            rho1: 0.05,
            gamma: 1.5,
            psi: 0.5,
            mu: [0.0, 0.0],
            tau2: 2.0 * truth.tau2,
        };
        let spec = grid.forward_rows(&obs.w).map_err(|e| e.to_string())?;
        let mle = fit_mle(&spec, &grid, &selection, &rough, &MleConfig::default()).map_err(|e| e.to_string())?;
        let data = ChainData {
            obs: obs.w,
            response: Response::Gaussian,
            design: None,
            grid: grid.clone(),
            selection,
            incidence: None,
        };
        let cfg = ChainConfig { iterations: 20_000, burn_in: 10_000, seed: rep + 1, ..Default::default() };
        let report = run_chain(data, cfg, mle.params, vec![], 1.0).map_err(|e| e.to_string())?;
        let covered = PARAM_NAMES
            .iter()
            .enumerate()
            .filter(|(i, name)| {
                let lo = report.sample.quantile(name, 0.025).unwrap();
                let hi = report.sample.quantile(name, 0.975).unwrap();
                lo <= ta[*i] && ta[*i] <= hi
            })
            .count();
        good_reps += (covered >= 7) as usize;
        covered_counts.push(covered);
        accept.push(report.acceptance);
    }
    let (amin, amax) = accept.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let detail = format!(
        "coverage per replicate {covered_counts:?}, acceptance {amin:.3}..{amax:.3}, {:.0} s",
        clock.elapsed().as_secs_f64()
    );
    ensure(good_reps >= 8, || format!("only {good_reps} of 10 replicates cover 7 of 9; {detail}"))?;
    ensure(amin >= 0.2 && amax <= 0.3, || format!("acceptance outside [0.2, 0.3]; {detail}"))?;
    Ok(detail)
}

fn crps_checks() -> Check {
    let mut rng = StdRng::seed_from_u64(110);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let m = rng.random_range(2..200);
        let s: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
        let y = rng.random_range(-5.0..5.0);
        let fast = crps_sample(&s, y).map_err(|e| e.to_string())?;
        worst = worst.max((fast - crps_double_sum(&s, y)).abs());
    }
    ensure(worst <= 1e-12, || format!("fast path differs by {worst:.2e}"))?;
    let hand = crps_sample(&[0.0, 2.0], 1.0).map_err(|e| e.to_string())?;
    ensure((hand - 0.5).abs() < 1e-15, || format!("{{0,2}} vs 1 gave {hand}"))?;
    let point = crps_sample(&[3.25; 17], -0.5).map_err(|e| e.to_string())?;
    ensure((point - 3.75).abs() < 1e-12, || format!("point mass gave {point}, expected 3.75"))?;
    Ok(format!("500 random cases, worst difference {worst:.1e}; hand case 0.5; point mass 3.75"))
}

// ---- end-to-end pipeline ----

fn spde(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_spde"))
        .args(args)
        .output()
        .map_err(|e| format!("cannot start spde: {e}"))?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("spde {} failed: {}", args[0], String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/synthetic.cfg")
}

struct Pipeline {
    root: PathBuf,
    seconds: f64,
}

fn run_pipeline(root: &Path) -> Result<Pipeline, String> {
    let clock = Instant::now();
    let cfg = config_path();
    let cfg = cfg.to_str().unwrap();
    let dir = |name: &str| root.join(name).to_str().unwrap().to_string();
    let data = format!("data={}", dir("sim/stations.csv"));
    spde(&["simulate", "--config", cfg, "--seed", "7", "--out", &dir("sim")])?;
    spde(&["fit-mcmc", "--config", cfg, "--seed", "11", "--set", &data, "--out", &dir("fit")])?;
    let chain = format!("chain={}", dir("fit"));
    spde(&["forecast", "--config", cfg, "--seed", "12", "--set", &chain, "--set", &data, "--out", &dir("forecast")])?;
    let fc = format!("forecast={}", dir("forecast"));
    spde(&["score", "--config", cfg, "--set", &fc, "--set", &data, "--out", &dir("score")])?;
    Ok(Pipeline { root: root.to_path_buf(), seconds: clock.elapsed().as_secs_f64() })
}

/// Every output file except the wall-clock record, keyed by relative path.
fn outputs(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().unwrap() != "timing.txt" {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                files.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn report(path: &Path) -> Result<Config, String> {
    Config::load(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn tobit_recovery(first: &Result<Pipeline, String>) -> Check {
    let run = first.as_ref().map_err(|e| format!("pipeline failed: {e}"))?;
    let truth: f64 = report(&run.root.join("sim/truth.txt"))?.require("lambda").map_err(|e| e.to_string())?;
    let r = report(&run.root.join("fit/mcmc_report.txt"))?;
    let lo: f64 = r.require("lambda.q025").map_err(|e| e.to_string())?;
    let hi: f64 = r.require("lambda.q975").map_err(|e| e.to_string())?;
    let detail = format!("lambda {truth} vs 95% interval [{lo:.4}, {hi:.4}]");
    ensure(lo <= truth && truth <= hi, || format!("not covered: {detail}"))?;
    Ok(detail)
}

fn end_to_end(first: &Result<Pipeline, String>, second: &Result<Pipeline, String>) -> Check {
    let a = first.as_ref().map_err(|e| format!("pipeline failed: {e}"))?;
    let b = second.as_ref().map_err(|e| format!("repeat pipeline failed: {e}"))?;
    let (fa, fb) = (outputs(&a.root), outputs(&b.root));
    let keys_a: Vec<_> = fa.keys().collect();
    ensure(keys_a == fb.keys().collect::<Vec<_>>(), || "runs produced different file sets".into())?;
    if let Some((k, _)) = fa.iter().find(|(k, v)| fb[*k] != **v) {
        return Err(format!("{} differs between identical runs", k.display()));
    }
    let fit = report(&a.root.join("fit/mcmc_report.txt"))?;
    let acceptance: f64 = fit.require("acceptance").map_err(|e| e.to_string())?;
    let score = report(&a.root.join("score/score_report.txt"))?;
    let get = |k: &str| -> Result<f64, String> { score.require(k).map_err(|e| e.to_string()) };
    let (sm, sp) = (get("stationwise.mae")?, get("stationwise.persistence_mae")?);
    let (am, ap) = (get("areal.mae")?, get("areal.persistence_mae")?);
    let detail = format!(
        "{:.0} s, {} identical files, MAE {sm:.3} vs persistence {sp:.3} (areal {am:.3} vs {ap:.3}), acceptance {acceptance:.3}",
        a.seconds,
        fa.len()
    );
    ensure(a.seconds < 600.0, || format!("too slow: {detail}"))?;
    ensure(sm < sp && am < ap, || format!("does not beat persistence: {detail}"))?;
    Ok(detail)
}

fn guarded(f: impl FnOnce() -> Check) -> Check {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into());
        Err(msg)
    })
}

fn main() {
    let work = tempfile::tempdir().expect("temporary directory");
    let mut results: Vec<(usize, &str, Check)> = Vec::new();
    let mut record = |id: usize, name: &'static str, check: Check| {
        let line = match &check {
            Ok(d) => format!("PASS  {id:>2} {name}: {d}"),
            Err(e) => format!("FAIL  {id:>2} {name}: {e}"),
        };
        println!("{line}");
        results.push((id, name, check));
    };
    record(1, "likelihood oracle", guarded(likelihood_oracle));
    record(2, "matrix identities", guarded(matrix_identities));
    record(3, "backward sampling", guarded(ffbs));
    record(4, "truncation bound", guarded(truncation_bound));
    record(5, "separability", guarded(separability));
    record(6, "stationary simulation", guarded(stationarity));
    record(7, "complexity", guarded(complexity));
    record(8, "MCMC recovery", guarded(mcmc_recovery));
    // Both runs use the same directory, since the echoed configuration
    // records the data paths; the first is moved aside afterwards.
    let here = work.path().join("run");
    let first = run_pipeline(&here).and_then(|p| {
        let kept = work.path().join("first");
        fs::rename(&here, &kept).map_err(|e| e.to_string())?;
        Ok(Pipeline { root: kept, seconds: p.seconds })
    });
    let second = first.as_ref().map_err(Clone::clone).and_then(|_| run_pipeline(&here));
    record(9, "Tobit recovery", guarded(|| tobit_recovery(&first)));
    record(10, "CRPS", guarded(crps_checks));
    record(11, "end-to-end pipeline", guarded(|| end_to_end(&first, &second)));
    let failed = results.iter().filter(|r| r.2.is_err()).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
