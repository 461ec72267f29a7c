use tdc_core::mcwf::{
    build_operators, compare_methods, mcwf_ensemble, mcwf_trajectory, FockConfig, JumpConvention, McwfInitial,
};
use tdc_core::positivep::run_ensemble;
use tdc_core::{
    Complex64, DriveSchedule, EnsembleConfig, InitialDistribution, Observable, PhaseSpacePoint, SystemParams,
};

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn uncoupled(gamma_a: f64, gamma_b: f64, eps_b: f64) -> SystemParams {
    SystemParams {
        kappa: 0.0,
        gamma_a,
        gamma_b,
        epsilon_b: c(eps_b),
    }
}

fn fock(n_a: usize, n_b: usize, n_traj: u64, stride: usize) -> FockConfig {
    FockConfig {
        n_a,
        n_b,
        n_traj,
        sample_stride: stride,
        master_seed: 17,
        ..FockConfig::default()
    }
}

#[test]
fn lossless_exchange_conserves_excitation() {
    let p = SystemParams {
        kappa: 0.025,
        gamma_a: 0.0,
        gamma_b: 0.0,
        epsilon_b: c(0.0),
    };
    let f = fock(8, 4, 1, 100);
    let ops = build_operators(&p, &f).unwrap();
    let psi = McwfInitial::Number { n_a: 3, n_b: 0 }.state_vector(&f).unwrap();
    let t_final = 90.0;
    let tr = mcwf_trajectory(&psi, &ops, &DriveSchedule::none(), t_final, 0).unwrap();
    assert!(tr.jumps.is_empty());
    let na = tr.series(Observable::Na);
    let nb = tr.series(Observable::Nb);
    for (k, t) in tr.times.iter().enumerate() {
        let drift = (na[k] / 3.0 + nb[k] - 1.0).abs();
        assert!(drift <= 1e-8 * t.max(1.0), "t={t}: {drift}");
    }
    // the pair |3,0>, |0,1> oscillates at frequency kappa sqrt(6) / 3
    let omega = 0.025 * 6f64.sqrt() / 3.0;
    for (k, t) in tr.times.iter().enumerate() {
        let expected = (omega * t).sin().powi(2);
        assert!((nb[k] - expected).abs() < 1e-8, "t={t}");
    }
    assert!(nb.iter().cloned().fold(0.0, f64::max) > 0.9);
}

#[test]
fn trajectories_stay_normalized() {
    let p = SystemParams::real(0.025, 0.6, 1.5, 4.5).unwrap();
    let f = fock(60, 25, 1, 100);
    let ops = build_operators(&p, &f).unwrap();
    let psi = McwfInitial::Vacuum.state_vector(&f).unwrap();
    let sched = DriveSchedule::switched_off_at(c(1.0), 1.0);
    for id in 0..4 {
        let tr = mcwf_trajectory(&psi, &ops, &sched, 2.0, id).unwrap();
        assert!(tr.max_norm_error < 1e-12, "{}", tr.max_norm_error);
        assert!(!tr.jumps.is_empty());
    }
}

fn decay_series(convention: JumpConvention) -> (Vec<f64>, Vec<(f64, f64)>) {
    let p = uncoupled(0.6, 1.5, 0.0);
    let f = FockConfig {
        jump_convention: convention,
        ..fock(2, 6, 4000, 50)
    };
    let s = mcwf_ensemble(
        &p,
        &f,
        &DriveSchedule::none(),
        &McwfInitial::Number { n_a: 0, n_b: 1 },
        1.5,
    )
    .unwrap();
    let nb = s.real_series(Observable::Nb);
    (s.times, nb)
}

fn check_decay(convention: JumpConvention, rate: f64) {
    let (times, nb) = decay_series(convention);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, (m, se)) in times.iter().zip(&nb) {
        let exact = (-rate * t).exp();
        assert!((m - exact).abs() <= 5.0 * se.max(1e-3), "t={t}: {m} vs {exact}");
        if *t > 0.0 && *m > 0.05 {
            sxy += t * m.ln();
            sxx += t * t;
        }
    }
    let fitted = -sxy / sxx;
    assert!((fitted / rate - 1.0).abs() < 0.05, "fitted {fitted}, expected {rate}");
}

#[test]
fn single_photon_decays_at_twice_the_loss_rate() {
    check_decay(JumpConvention::Doubled, 3.0);
}

#[test]
fn literal_jump_convention_halves_the_decay_rate() {
    check_decay(JumpConvention::Literal, 1.5);
}

#[test]
fn larger_cutoffs_do_not_change_populations() {
    let p = SystemParams::real(0.025, 0.6, 1.5, 4.5).unwrap();
    let sched = DriveSchedule::constant(c(2.0));
    let small = mcwf_ensemble(&p, &fock(60, 25, 16, 500), &sched, &McwfInitial::Vacuum, 2.0).unwrap();
    let large = mcwf_ensemble(&p, &fock(72, 30, 16, 500), &sched, &McwfInitial::Vacuum, 2.0).unwrap();
    for obs in [Observable::Na, Observable::Nb] {
        for ((a, _), (b, _)) in small.real_series(obs).iter().zip(large.real_series(obs)).skip(1) {
            assert!((a - b).abs() <= 5e-3 * a.abs(), "{obs:?}: {a} vs {b}");
        }
    }
}

#[test]
fn uncoupled_modes_match_phase_space_exactly() {
    let p = uncoupled(0.6, 1.5, 3.0);
    let sched = DriveSchedule::switched_off_at(c(1.2), 2.0);
    let f = fock(25, 25, 4, 100);
    let mc = mcwf_ensemble(&p, &f, &sched, &McwfInitial::Vacuum, 4.0).unwrap();
    let cfg = EnsembleConfig {
        n_traj: 4,
        t_final: 4.0,
        dt: f.dt,
        sample_stride: 100,
        master_seed: 1,
        divergence_bound: None,
    };
    let pp = run_ensemble(&InitialDistribution::Delta(PhaseSpacePoint::vacuum()), &p, &sched, &cfg).unwrap();
    assert_eq!(pp.times, mc.times);
    let mut worst: f64 = 0.0;
    for obs in [Observable::Na, Observable::Nb] {
        for ((a, _), (b, _)) in pp.real_series(obs).iter().zip(mc.real_series(obs)) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst < 1e-6, "{worst}");
    let (nb, _) = mc.last().unwrap().real(Observable::Nb);
    assert!((nb - 4.0).abs() < 0.02);
}

#[test]
fn mismatched_loss_rate_is_detected() {
    let mc_params = SystemParams::real(0.025, 0.6, 1.5, 4.5).unwrap();
    let pp_params = SystemParams::real(0.025, 0.6, 2.5, 4.5).unwrap();
    let sched = DriveSchedule::constant(c(2.0));
    let mc = mcwf_ensemble(&mc_params, &fock(60, 25, 12, 250), &sched, &McwfInitial::Vacuum, 2.0).unwrap();
    let cfg = EnsembleConfig {
        n_traj: 2000,
        t_final: 2.0,
        dt: 1e-3,
        sample_stride: 250,
        master_seed: 3,
        divergence_bound: None,
    };
    let init = InitialDistribution::Delta(PhaseSpacePoint::vacuum());
    let wrong = run_ensemble(&init, &pp_params, &sched, &cfg).unwrap();
    let report = compare_methods(&wrong, &mc).unwrap();
    assert!(!report.passed);
    assert!(report.mean_abs_z > 3.0, "{}", report.mean_abs_z);
    let right = run_ensemble(&init, &mc_params, &sched, &cfg).unwrap();
    let report = compare_methods(&right, &mc).unwrap();
    assert!(
        report.mean_abs_z < report.max_abs_z.max(1.0) && report.mean_abs_z < 3.0,
        "{report:?}"
    );
}
