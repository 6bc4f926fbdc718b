use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use spectral_spde::inference::{backward_sample, dense_kalman_filter, observation_matrix, spectral_kalman_filter, FilterInit};
use spectral_spde::state_space::{simulate, InitialState};
use spectral_spde_bench::{gridded_fields, params, station_data};
use std::hint::black_box;

const STEPS: usize = 20;

fn fft(c: &mut Criterion) {
    let mut g = c.benchmark_group("forward_fft");
    for n in [32, 64, 128, 256] {
        let (grid, _, w) = gridded_fields(n, STEPS);
        g.throughput(Throughput::Elements((STEPS * n * n) as u64));
        g.bench_with_input(BenchmarkId::from_parameter(n), &w, |b, w| {
            b.iter(|| black_box(grid.forward_rows(w).unwrap()))
        });
    }
    g.finish();
}

fn spectral_filter(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectral_filter");
    for n in [32, 64, 128] {
        let (grid, sys, w) = gridded_fields(n, STEPS);
        let spec = grid.forward_rows(&w).unwrap();
        g.throughput(Throughput::Elements((STEPS * n * n) as u64));
        g.bench_function(BenchmarkId::new("filter", n), |b| {
            b.iter(|| black_box(spectral_kalman_filter(&spec, &sys, params().tau2, FilterInit::Innovation).unwrap()))
        });
        let f = spectral_kalman_filter(&spec, &sys, params().tau2, FilterInit::Innovation).unwrap();
        g.bench_function(BenchmarkId::new("backward_sample", n), |b| {
            b.iter(|| black_box(backward_sample(&f, &sys, 1).unwrap()))
        });
    }
    g.finish();
}

fn dense_filter(c: &mut Criterion) {
    // The synthetic pipeline's shape: 256 stations, 29 coefficients.
    let (grid, sys, h, w) = station_data(32, 16, 29, 192);
    let a = observation_matrix(&grid, Some(&h), &sys);
    c.bench_function("dense_filter/256_stations_k29_t192", |b| {
        b.iter(|| black_box(dense_kalman_filter(&w, &a, &sys, params().tau2, FilterInit::Innovation).unwrap()))
    });
}

fn simulation(c: &mut Criterion) {
    let (_, sys, _) = gridded_fields(64, 1);
    c.bench_function("simulate/n64_t20", |b| {
        b.iter(|| black_box(simulate(&sys, STEPS, 5, &InitialState::Stationary).unwrap()))
    });
}

criterion_group!(benches, fft, spectral_filter, dense_filter, simulation);
criterion_main!(benches);
