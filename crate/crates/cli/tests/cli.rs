use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spectral_spde::io::{load_csv_matrix, load_spte, Config};

const SMALL: &str = "\
n = 8
rho0 = 0.1
sigma2 = 50
zeta = 0.3
rho1 = 0.05
gamma = 1.5
psi = 0.5
mu_x = 0.05
mu_y = 0
tau2 = 0.5
steps = 12
fit_steps = 10
iterations = 60
burn_in = 20
horizon = 3
samples = 200
";

fn spde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spde")).args(args).output().expect("run spde")
}

fn ok(args: &[&str]) {
    let out = spde(args);
    assert!(out.status.success(), "spde {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("small.cfg");
    fs::write(&path, format!("{SMALL}{extra}")).unwrap();
    path
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// Simulated gridded data in `dir/sim`.
fn simulated(dir: &Path, cfg: &Path) -> PathBuf {
    let out = dir.join("sim");
    ok(&["simulate", "--config", s(cfg), "--seed", "3", "--out", s(&out)]);
    out.join("observations.spte")
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn repeated_seed_gives_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    for name in ["a", "b"] {
        ok(&["simulate", "--config", s(&cfg), "--seed", "9", "--out", s(&tmp.path().join(name))]);
    }
    let a = read_dir_sorted(&tmp.path().join("a"));
    assert_eq!(a, read_dir_sorted(&tmp.path().join("b")));
    assert!(a.iter().any(|(n, _)| n == "manifest.txt"));
    assert!(a.iter().any(|(n, _)| n == "config.txt"));
    ok(&["simulate", "--config", s(&cfg), "--seed", "10", "--out", s(&tmp.path().join("c"))]);
    assert_ne!(
        fs::read(tmp.path().join("a/fields.spte")).unwrap(),
        fs::read(tmp.path().join("c/fields.spte")).unwrap()
    );
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("nosteps.cfg");
    fs::write(&cfg, SMALL.replace("steps = 12\n", "")).unwrap();
    let out = spde(&["simulate", "--config", s(&cfg), "--seed", "1", "--out", s(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"steps\""));
    assert!(!tmp.path().join("x").exists(), "a failed run leaves no output directory");

    let bad = tmp.path().join("bad.cfg");
    fs::write(&bad, "n = 8\nthis line has no equals sign\n").unwrap();
    let out = spde(&["simulate", "--config", s(&bad), "--seed", "1", "--out", s(&tmp.path().join("y"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let good = small_config(tmp.path(), "");
    let out = spde(&["simulate", "--config", s(&good), "--out", s(&tmp.path().join("z"))]);
    assert_eq!(out.status.code(), Some(2), "a stochastic command without --seed");
    let existing = tmp.path().join("exists");
    fs::create_dir(&existing).unwrap();
    let out = spde(&["simulate", "--config", s(&good), "--seed", "1", "--out", s(&existing)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_data_file_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "data = does_not_exist.spte\n");
    let out = spde(&["filter", "--config", s(&cfg), "--out", s(&tmp.path().join("f"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn forecast_rejects_a_zero_horizon() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let data = simulated(tmp.path(), &cfg);
    let out = spde(&[
        "forecast", "--config", s(&cfg), "--seed", "1", "--set", &format!("data={}", s(&data)),
        "--set", "horizon=0", "--out", s(&tmp.path().join("fc")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fig1_configuration_simulates_four_steps_on_a_100_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fig1");
    ok(&["simulate", "--config", s(&repo_config("fig1.cfg")), "--seed", "1", "--out", s(&out)]);
    let (n, fields) = load_spte(&out.join("fields.spte")).unwrap();
    assert_eq!(n, 100);
    assert_eq!(fields.dim(), (4, 100 * 100));
}

#[test]
fn resumed_chain_matches_an_uninterrupted_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let data = format!("data={}", s(&simulated(tmp.path(), &cfg)));
    let full = tmp.path().join("full");
    ok(&["fit-mcmc", "--config", s(&cfg), "--seed", "5", "--set", &data, "--out", s(&full)]);
    let part = tmp.path().join("part");
    ok(&["fit-mcmc", "--config", s(&cfg), "--seed", "5", "--set", &data, "--set", "iterations=35", "--out", s(&part)]);
    let resumed = tmp.path().join("resumed");
    ok(&[
        "fit-mcmc", "--config", s(&cfg), "--seed", "5", "--set", &data, "--out", s(&resumed),
        "--resume", s(&part.join("checkpoint.bin")),
    ]);
    for file in ["chain.csv", "final_alpha.csv", "loglik_trace.csv", "checkpoint.bin", "mcmc_report.txt"] {
        assert_eq!(
            fs::read(full.join(file)).unwrap(),
            fs::read(resumed.join(file)).unwrap(),
            "{file} differs after resuming"
        );
    }
}

#[test]
fn mle_parameters_feed_a_forecast() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "max_iter = 200\n");
    let data = format!("data={}", s(&simulated(tmp.path(), &cfg)));
    let mle = tmp.path().join("mle");
    ok(&["fit-mle", "--config", s(&cfg), "--set", &data, "--out", s(&mle)]);
    let params = Config::load(&mle.join("params.txt")).unwrap().params().unwrap();
    assert!(params.validate().is_ok());
    let fc = tmp.path().join("fc");
    ok(&[
        "forecast", "--config", s(&cfg), "--seed", "2", "--set", &data,
        "--set", &format!("params={}", s(&mle.join("params.txt"))), "--out", s(&fc),
    ]);
    for h in 1..=3 {
        let m = load_csv_matrix(&fc.join(format!("samples_lead{h}.csv"))).unwrap();
        assert_eq!(m.dim(), (200, 64));
    }
    assert_eq!(load_csv_matrix(&fc.join("median.csv")).unwrap().dim(), (3, 64));
    assert_eq!(load_csv_matrix(&fc.join("q3_minus_median.csv")).unwrap().dim(), (3, 64));
}

#[test]
fn nugget_changes_the_spread_but_not_the_median() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let data = format!("data={}", s(&simulated(tmp.path(), &cfg)));
    let mut medians = Vec::new();
    let mut spreads = Vec::new();
    for flag in ["true", "false"] {
        let out = tmp.path().join(format!("nugget_{flag}"));
        ok(&[
            "forecast", "--config", s(&cfg), "--seed", "4", "--set", &data, "--set", "samples=4000",
            "--set", &format!("nugget={flag}"), "--out", s(&out),
        ]);
        medians.push(load_csv_matrix(&out.join("median.csv")).unwrap());
        spreads.push(load_csv_matrix(&out.join("q3_minus_median.csv")).unwrap());
    }
    // Paired latent paths: the median moves only by the noise's effect on
    // the sample median, about 1.25 τ / √m.
    let tol = 5.0 * 1.25 * 0.5f64.sqrt() / 4000f64.sqrt();
    let worst = (&medians[0] - &medians[1]).iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(worst < tol, "median moved by {worst}, tolerance {tol}");
    assert!(spreads[0].iter().zip(spreads[1].iter()).all(|(a, b)| a > b));
}

#[test]
fn empty_posterior_sample_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let data = format!("data={}", s(&simulated(tmp.path(), &cfg)));
    let fit = tmp.path().join("fit");
    ok(&["fit-mcmc", "--config", s(&cfg), "--seed", "1", "--set", &data, "--set", "burn_in=60", "--out", s(&fit)]);
    let out = spde(&[
        "forecast", "--config", s(&cfg), "--seed", "1", "--set", &data,
        "--set", &format!("chain={}", s(&fit)), "--out", s(&tmp.path().join("fc")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn covariance_tables_check_themselves() {
    let tmp = tempfile::tempdir().unwrap();
    let sep = tmp.path().join("sep.cfg");
    fs::write(&sep, "rho0 = 0.1\nsigma2 = 1\nzeta = 0.2\nrho1 = 0\ngamma = 1\npsi = 0\nmu_x = 0\nmu_y = 0\ntau2 = 0\nn_ref = 64\n").unwrap();
    let out = tmp.path().join("cov");
    ok(&["covariance", "--config", s(&sep), "--out", s(&out)]);
    let mut rd = csv::Reader::from_path(out.join("covariance.csv")).unwrap();
    let header = rd.headers().unwrap().clone();
    let ratio = header.iter().position(|h| h == "ratio_to_t0").unwrap();
    let expect = header.iter().position(|h| h == "exp_neg_zeta_t").unwrap();
    let mut rows = 0;
    for rec in rd.records() {
        let rec = rec.unwrap();
        let (r, e): (f64, f64) = (rec[ratio].parse().unwrap(), rec[expect].parse().unwrap());
        assert!((r - e).abs() < 1e-10 * e, "{r} vs {e}");
        rows += 1;
    }
    assert_eq!(rows, 20);

    let out = tmp.path().join("fig1");
    ok(&["covariance", "--config", s(&repo_config("fig1.cfg")), "--out", s(&out)]);
    let mut rd = csv::Reader::from_path(out.join("bound.csv")).unwrap();
    let mut bounds = Vec::new();
    for rec in rd.records() {
        let rec = rec.unwrap();
        assert_eq!(&rec[3], "true", "difference above the bound for n = {}", &rec[0]);
        bounds.push(rec[1].parse::<f64>().unwrap());
    }
    assert_eq!(bounds.len(), 3);
    assert!(bounds.windows(2).all(|w| w[1] < w[0]), "{bounds:?}");
}

#[test]
fn bundled_synthetic_chain_accepts_at_a_tuned_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = repo_config("synthetic.cfg");
    let sim = tmp.path().join("sim");
    ok(&["simulate", "--config", s(&cfg), "--seed", "7", "--out", s(&sim)]);
    let fit = tmp.path().join("fit");
    ok(&[
        "fit-mcmc", "--config", s(&cfg), "--seed", "11", "--set", &format!("data={}", s(&sim.join("stations.csv"))),
        "--out", s(&fit),
    ]);
    let report = Config::load(&fit.join("mcmc_report.txt")).unwrap();
    let acc: f64 = report.require("acceptance").unwrap();
    assert!((0.15..=0.35).contains(&acc), "acceptance {acc}");
    let manifest = fs::read_to_string(fit.join("manifest.txt")).unwrap();
    assert!(manifest.contains("chain.csv") && !manifest.contains("timing.txt"));
}
