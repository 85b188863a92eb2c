use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use slabwave::coupling::{classical_trajectory, CoupledPair, HybridMember, MatchSearch};
use slabwave::media::{MovingSlab, RestFrameMaterial};
use slabwave::slabmodes::{lab_dispersion_sweep, CoSign, LabBranch, Polarization};
use slabwave::spectral::{spectrum_sweep, Grid, SolveRoute};
use slabwave::ExecMode;
use std::hint::black_box;

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn slab(beta: f64, z0: f64) -> MovingSlab {
    MovingSlab::new(RestFrameMaterial::new(4.0, 1.0).unwrap(), beta, z0, z0 + 1.0).unwrap()
}

fn branch(beta: f64, sign: CoSign) -> LabBranch {
    LabBranch { slab: slab(beta, 0.0), polarization: Polarization::TE, branch: 0, sign, ky: 0.0 }
}

fn dispersion(c: &mut Criterion) {
    let br = branch(0.9, CoSign::Negative);
    let ks: Vec<f64> = (0..256).map(|i| 0.5 + 0.02 * i as f64).collect();
    let mut g = c.benchmark_group("lab_dispersion_sweep_256");
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| lab_dispersion_sweep(black_box(&br), &ks, mode)));
    }
    g.finish();
}

fn trajectory(c: &mut Criterion) {
    let pair = CoupledPair::matched(&branch(0.0, CoSign::Positive), &branch(0.95, CoSign::Negative), 5.0, &MatchSearch::default()).unwrap();
    let t: Vec<f64> = (0..20_000).map(|i| i as f64 * 1e-2).collect();
    let mut g = c.benchmark_group("classical_trajectory_20k");
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| classical_trajectory(black_box(1e-3), &pair, HybridMember::Growing, &t, mode))
        });
    }
    g.finish();
}

fn spectra(c: &mut Criterion) {
    let stack = [slab(0.0, 1.0), slab(0.95, 2.5)];
    let ks: Vec<(f64, f64)> = (0..8).map(|i| (0.5 + 0.25 * i as f64, 0.0)).collect();
    let grid = Grid::new(8.0, 24).unwrap();
    let mut g = c.benchmark_group("spectrum_sweep_8k_nz24");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| spectrum_sweep(black_box(&stack), &ks, grid, SolveRoute::Auto, mode))
        });
    }
    g.finish();
}

criterion_group!(benches, dispersion, trajectory, spectra);
criterion_main!(benches);
