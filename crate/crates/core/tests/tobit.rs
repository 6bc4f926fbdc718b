use ndarray::Array2;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use spectral_spde::spde_model::{SpdeParams, SpectralSystem};
use spectral_spde::spectral_grid::{build_incidence, FieldGrid, WavenumberGrid};
use spectral_spde::state_space::{observe, simulate, InitialState};
use spectral_spde::tobit::*;
use statrs::distribution::{ContinuousCDF, Normal as SNormal};

fn tobit_sample(n: usize, mu: f64, s: f64, lambda: f64, seed: u64) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    let d = Normal::new(mu, s).unwrap();
    (0..n).map(|_| inverse_transform(d.sample(&mut rng), lambda)).collect()
}

#[test]
fn power_transform() {
    assert_eq!(transform_positive(1.0, 2.7).unwrap(), 1.0);
    assert_eq!(transform_positive(3.3, 1.0).unwrap(), 3.3);
    assert!(transform_positive(0.0, 1.5).is_err());
    assert!(transform_positive(2.0, 0.0).is_err());
    let mut rng = StdRng::seed_from_u64(1);
    for _ in 0..1000 {
        let y = rng.random_range(1e-6..100.0);
        let l = rng.random_range(1.0..3.0);
        let back = inverse_transform(transform_positive(y, l).unwrap(), l);
        assert!((back - y).abs() < 1e-12 * y.max(1.0));
    }
    let mut prev = -1.0;
    for i in 0..100 {
        let y = 0.1 + i as f64 * 0.3;
        let w = transform_positive(y, 1.7).unwrap();
        assert!(w > prev);
        prev = w;
    }
}

#[test]
fn censoring_link() {
    assert_eq!(inverse_transform(-3.0, 1.4), 0.0);
    assert_eq!(inverse_transform(0.0, 1.4), 0.0);
    assert_eq!(inverse_transform(1.0, 0.3), 1.0);
    let mut prev = 0.0;
    for i in -50..50 {
        let y = inverse_transform(i as f64 * 0.1, 1.4);
        assert!(y >= prev);
        prev = y;
    }
}

#[test]
fn design_columns() {
    let constant = Array2::from_elem((3, 4), 2.5);
    let d = build_design(&constant, 1.4).unwrap();
    assert_eq!(d.p(), 2);
    assert!(d.columns[0].iter().all(|v| v.abs() < 1e-15));
    assert!(d.columns[1].iter().all(|&v| v == 0.0));

    let zero = Array2::zeros((2, 3));
    let d = build_design(&zero, 1.4).unwrap();
    assert!(d.columns[0].iter().all(|&v| v == 0.0));
    assert!(d.columns[1].iter().all(|&v| v == 1.0));

    // A skewed sample: centering constant by direct arithmetic.
    let mut rng = StdRng::seed_from_u64(2);
    let yf = Array2::from_shape_fn((20, 7), |_| {
        let u: f64 = rng.random();
        if u < 0.3 { 0.0 } else { (-u.ln()).powi(3) * 4.0 }
    });
    let d = build_design(&yf, 1.4).unwrap();
    let direct = yf.iter().map(|v| v.powf(1.0 / 1.4)).sum::<f64>() / yf.len() as f64;
    assert!((d.center - direct).abs() < 1e-12);
    assert!(d.columns[0].sum().abs() < 1e-10);
    assert_eq!(d.columns[1].sum() as usize, yf.iter().filter(|&&v| v == 0.0).count());

    let mean = d.mean(&[0.5, -1.0]);
    assert_eq!(mean[(3, 2)], 0.5 * d.columns[0][(3, 2)] - d.columns[1][(3, 2)]);

    // Frozen centering for a forecast window.
    let later = build_design_centered(&constant, 1.4, d.center).unwrap();
    assert!((later.columns[0][(0, 0)] - (2.5f64.powf(1.0 / 1.4) - d.center)).abs() < 1e-15);

    assert!(build_design(&Array2::from_elem((2, 2), f64::NAN), 1.4).is_err());
    assert!(build_design(&Array2::from_elem((2, 2), -1.0), 1.4).is_err());
    let mut partial = Array2::from_elem((2, 2), 1.0);
    partial[(0, 0)] = f64::NAN;
    let d = build_design(&partial, 1.4).unwrap();
    assert_eq!(d.center, 1.0);
}

#[test]
fn dataset_validation() {
    let y = Array2::from_elem((3, 2), 0.5);
    let yf = Array2::from_elem((3, 2), 1.0);
    assert!(TobitDataset::new(y.clone(), yf.clone(), vec![[0.1, 0.1], [0.2, 0.2]], 1.4).is_ok());
    assert!(TobitDataset::new(y.clone(), yf.clone(), vec![[0.1, 0.1]], 1.4).is_err());
    let mut neg = y;
    neg[(0, 0)] = -0.1;
    assert!(TobitDataset::new(neg, yf, vec![[0.1, 0.1], [0.2, 0.2]], 1.4).is_err());
}

#[test]
fn lambda_recovery() {
    let sample = tobit_sample(100_000, 0.4, 1.0, 1.4, 3);
    let l = fit_lambda_tilde(&sample).unwrap();
    assert!((1.3..=1.5).contains(&l), "lambda = {l}");
    let at = lambda_profile_loglik(&sample, l).unwrap();
    assert!(at >= lambda_profile_loglik(&sample, l + 0.01).unwrap());
    assert!(at >= lambda_profile_loglik(&sample, l - 0.01).unwrap());
    assert_eq!(fit_lambda_tilde(&sample).unwrap(), l);

    let sample = tobit_sample(100_000, 0.3, 1.0, 1.0, 4);
    let l = fit_lambda_tilde(&sample).unwrap();
    assert!((l - 1.0).abs() < 0.05, "lambda = {l}");
}

#[test]
fn lambda_fit_needs_positive_values() {
    assert!(fit_lambda_tilde(&[0.0, 0.0, 0.0]).is_err());
    assert!(fit_lambda_tilde(&[]).is_err());
    // Missing values are ignored.
    let mut s = tobit_sample(5000, 0.4, 1.0, 1.4, 5);
    s.push(f64::NAN);
    assert!(fit_lambda_tilde(&s).unwrap().is_finite());
}

#[test]
fn zero_proportion_matches_the_censoring_probability() {
    let n = 16;
    let grid = WavenumberGrid::new(n).unwrap();
    // sigma2 chosen so the field variance is about one half.
    let p = SpdeParams {
        rho0: 0.1,
        sigma2: 200.0,
        zeta: 0.3,
        tau2: 0.3,
        ..SpdeParams::advection_example()
    };
    let sys = SpectralSystem::new(&grid, &p, 1.0).unwrap();
    let field_var: f64 = sys.q0.iter().sum::<f64>() / (n * n) as f64;
    let steps = 400;
    let traj = simulate(&sys, steps, 21, &InitialState::Stationary).unwrap();
    let stations: Vec<[f64; 2]> = (0..30).map(|i| [(i as f64 * 0.031) % 1.0, (i as f64 * 0.077) % 1.0]).collect();
    let h = build_incidence(&stations, &FieldGrid::new(n)).unwrap();
    let obs = observe(&traj, &grid, &sys, p.tau2, Some(&h), 22).unwrap();
    let mut rng = StdRng::seed_from_u64(23);
    let yf = Array2::from_shape_fn((steps, 30), |_| if rng.random::<f64>() < 0.4 { 0.0 } else { rng.random_range(0.1..10.0) });
    let design = build_design(&yf, 1.4).unwrap();
    let b = [0.4, -0.8];
    let mean = design.mean(&b);
    let w = &obs.w + &mean;
    let rain = w.mapv(|v| inverse_transform(v, 1.6));
    let zeros = rain.iter().filter(|&&v| v == 0.0).count() as f64 / rain.len() as f64;
    let sd = (field_var + p.tau2).sqrt();
    let std_normal = SNormal::new(0.0, 1.0).unwrap();
    let expected = mean.iter().map(|m| std_normal.cdf(-m / sd)).sum::<f64>() / mean.len() as f64;
    // The cells share one correlated field, so allow a generous band.
    assert!((zeros - expected).abs() < 0.03, "zeros {zeros} vs {expected}");
    for (r, v) in rain.iter().zip(w.iter()) {
        assert_eq!(*r == 0.0, *v <= 0.0);
    }
}
