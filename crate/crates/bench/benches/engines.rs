use criterion::{black_box, criterion_group, criterion_main, Criterion};
use tdc_bench::{c, ensemble, fock, reference_params, small_params, upper_branch};
use tdc_core::mcwf::{build_operators, mcwf_trajectory, McwfInitial};
use tdc_core::positivep::{integrate_trajectory, run_ensemble};
use tdc_core::spectrum::{default_frequency_grid, spectrum_scan};
use tdc_core::{DriveSchedule, InitialDistribution, PhaseSpacePoint};

fn heun(cr: &mut Criterion) {
    let p = reference_params();
    let sched = DriveSchedule::switched_off_at(c(5.0), 1.0);
    let init = InitialDistribution::Delta(PhaseSpacePoint::vacuum());
    let one = ensemble(1, 2.0);
    cr.bench_function("heun trajectory 2000 steps", |b| {
        b.iter(|| integrate_trajectory(&init, &p, &sched, black_box(&one), 0).unwrap())
    });
    let many = ensemble(256, 2.0);
    let mut g = cr.benchmark_group("ensemble");
    g.sample_size(10);
    g.bench_function("256 trajectories 2000 steps", |b| {
        b.iter(|| run_ensemble(&init, &p, &sched, black_box(&many)).unwrap())
    });
    g.finish();
}

fn spectra(cr: &mut Criterion) {
    let p = reference_params();
    let s = upper_branch(&p);
    let grid = default_frequency_grid();
    cr.bench_function("spectrum scan 400 points", |b| {
        b.iter(|| spectrum_scan(black_box(&s), &p, &grid, true).unwrap())
    });
}

fn mcwf(cr: &mut Criterion) {
    let p = small_params();
    let f = fock(1);
    let ops = build_operators(&p, &f).unwrap();
    let psi = McwfInitial::Vacuum.state_vector(&f).unwrap();
    let sched = DriveSchedule::constant(c(2.0));
    let mut g = cr.benchmark_group("mcwf");
    g.sample_size(10);
    g.bench_function("trajectory 60x25 levels 500 steps", |b| {
        b.iter(|| mcwf_trajectory(black_box(&psi), &ops, &sched, 0.5, 0).unwrap())
    });
    g.bench_function("operator construction 60x25", |b| {
        b.iter(|| build_operators(black_box(&p), &f).unwrap())
    });
    g.finish();
}

criterion_group!(benches, heun, spectra, mcwf);
criterion_main!(benches);
