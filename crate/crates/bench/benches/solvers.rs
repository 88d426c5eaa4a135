use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use nvcharge::bandsolver::{solve_selfconsistent, MaterialParams, RadialGrid, SolverOptions, SurfaceMode, SurfaceModel};
use nvcharge::kinetics::integrator::Tolerances;
use nvcharge::kinetics::{fit_power_curve, simulate_sweep, steady_state, FitOptions, KineticParams, ParamBounds};
use nvcharge::occupation::{sweep_surface_density, DensityProfile};
use nvcharge::spectra::{fit_fraction, ReferenceSet, DEFAULT_WINDOW_NM};
use nvcharge_bench::{mixed_spectrum, synthetic_curve, up_down_powers};

fn band_solver(c: &mut Criterion) {
    let params = MaterialParams::default();
    let opts = SolverOptions::default();
    let mut group = c.benchmark_group("selfconsistent");
    for step in [0.5, 0.25] {
        let grid = RadialGrid::new(20.0, step).unwrap();
        for density in [0.0, 1.0] {
            let surface = SurfaceModel::fully_ionized(density);
            group.bench_with_input(
                BenchmarkId::new(format!("step {step}"), density),
                &surface,
                |b, s| b.iter(|| solve_selfconsistent(&params, &grid, black_box(s), &opts).unwrap()),
            );
        }
    }
    group.finish();
}

fn density_sweep(c: &mut Criterion) {
    let params = MaterialParams::default();
    let grid = RadialGrid::standard();
    let densities: Vec<f64> = (0..20).map(|i| 2.0 * i as f64 / 19.0).collect();
    c.bench_function("sweep 20 densities", |b| {
        b.iter(|| {
            sweep_surface_density(
                black_box(&densities),
                &params,
                &grid,
                SurfaceMode::FullyIonized,
                &DensityProfile::UniformVolume,
                &SolverOptions::default(),
                false,
            )
            .unwrap()
        })
    });
}

fn unmixing(c: &mut Criterion) {
    let refs = ReferenceSet::synthetic();
    let measured = mixed_spectrum(&refs);
    c.bench_function("fit_fraction", |b| {
        b.iter(|| fit_fraction(black_box(&measured), &refs, DEFAULT_WINDOW_NM, &[]).unwrap())
    });
}

fn kinetics(c: &mut Criterion) {
    let params = KineticParams::default();
    let powers = up_down_powers(0.05, 50.0, 10);
    let start = steady_state(powers[0], &params).unwrap();
    c.bench_function("simulate_sweep 19 steps", |b| {
        b.iter(|| simulate_sweep(black_box(&powers), 10.0, &params, start, Tolerances::default()).unwrap())
    });

    let curve = synthetic_curve(&params, 10.0);
    let init = KineticParams {
        alpha: params.alpha * 1.2,
        beta: params.beta * 0.8,
        gamma: params.gamma * 1.2,
        delta: params.delta * 0.8,
        trap_capacity: params.trap_capacity * 1.2,
        exponents: params.exponents,
    };
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    group.bench_function("fit_power_curve", |b| {
        b.iter(|| fit_power_curve(black_box(&curve), &init, &ParamBounds::default(), &FitOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, band_solver, density_sweep, unmixing, kinetics);
criterion_main!(benches);
