use nalgebra::{Matrix4, Schur};
use proptest::prelude::*;
use tdc_core::model::{
    find_fixed_points, integrate_semiclassical, numeric_steady_state, positive_quartic_roots, quartic_residual,
    steady_state_branches, NewtonControl, OdeControl,
};
use tdc_core::spectrum::{drift_matrix, stability_check};
use tdc_core::{
    pump_threshold, semiclassical_drift, Branch, Complex64, DriveSchedule, SemiclassicalState, SystemParams,
};

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Positive real roots of `x^4 - p x + q` from companion-matrix eigenvalues.
fn companion_positive_roots(params: &SystemParams) -> Vec<f64> {
    let p = 3.0 * params.epsilon_b.norm() / params.kappa;
    let q = 3.0 * params.gamma_a * params.gamma_b / (params.kappa * params.kappa);
    // scale x = s y so the coefficients stay O(1)
    let s = q.powf(0.25);
    let (p1, q1) = (p / s.powi(3), q / s.powi(4));
    #[rustfmt::skip]
    let m = Matrix4::new(
        0.0, 0.0, 0.0, -q1,
        1.0, 0.0, 0.0, p1,
        0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 0.0,
    );
    let ev = Schur::new(m).complex_eigenvalues();
    let mut roots: Vec<f64> = ev
        .iter()
        .filter(|z| z.re > 0.0 && z.im.abs() <= 1e-7 * z.re)
        .map(|z| z.re * s)
        .collect();
    roots.sort_by(f64::total_cmp);
    // Newton polish on the unscaled quartic
    for r in &mut roots {
        for _ in 0..5 {
            let f = r.powi(4) - p * *r + q;
            let df = 4.0 * r.powi(3) - p;
            *r -= f / df;
        }
    }
    roots
}

fn onset_by_bisection(kappa: f64, ga: f64, gb: f64) -> f64 {
    let has_roots = |e: f64| positive_quartic_discriminant_sign(kappa, ga, gb, e);
    let (mut lo, mut hi) = (0.0, 1.0);
    while !has_roots(hi) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if has_roots(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `x^4 - p x + q` dips to zero or below iff it has positive real roots;
/// its minimum over x > 0 is at `x = (p / 4)^{1/3}`.
fn positive_quartic_discriminant_sign(kappa: f64, ga: f64, gb: f64, eps_b: f64) -> bool {
    let p = 3.0 * eps_b / kappa;
    let q = 3.0 * ga * gb / (kappa * kappa);
    let x = (p / 4.0).cbrt();
    x.powi(4) - p * x + q <= 0.0
}

#[test]
fn threshold_matches_root_onset_bisection() {
    for (kappa, ga, gb) in [(0.001, 1.0, 2.0), (1.0, 1.0, 1.0), (0.025, 0.6, 1.5), (0.3, 2.0, 0.5)] {
        let p = SystemParams::real(kappa, ga, gb, 1.0).unwrap();
        let th = pump_threshold(&p).unwrap();
        let onset = onset_by_bisection(kappa, ga, gb);
        assert!((th - onset).abs() <= 1e-6 * th, "{kappa} {ga} {gb}: {th} vs {onset}");
    }
}

#[test]
fn quartic_roots_match_companion_oracle() {
    for &(kappa, ga, gb) in &[(0.001, 1.0, 2.0), (0.025, 0.6, 1.5), (0.01, 1.0, 0.5)] {
        let th = pump_threshold(&SystemParams::real(kappa, ga, gb, 1.0).unwrap()).unwrap();
        for factor in [1.001, 1.05, 1.5, 2.82, 5.0, 20.0] {
            let p = SystemParams::real(kappa, ga, gb, th * factor).unwrap();
            let ours = positive_quartic_roots(&p).expect("roots above threshold");
            let oracle = companion_positive_roots(&p);
            assert_eq!(oracle.len(), 2, "{p:?}");
            assert!(
                (ours.lower - oracle[0]).abs() <= 1e-8 * oracle[0],
                "{ours:?} {oracle:?}"
            );
            assert!(
                (ours.upper - oracle[1]).abs() <= 1e-8 * oracle[1],
                "{ours:?} {oracle:?}"
            );
        }
    }
}

#[test]
fn root_existence_iff_above_threshold() {
    for &(kappa, ga, gb) in &[(0.001, 1.0, 2.0), (0.05, 1.0, 3.0)] {
        let th = pump_threshold(&SystemParams::real(kappa, ga, gb, 1.0).unwrap()).unwrap();
        for k in 1..200 {
            let e = th * (0.2 + 0.01 * k as f64);
            if ((e - th) / th).abs() < 1e-6 {
                continue;
            }
            let p = SystemParams::real(kappa, ga, gb, e).unwrap();
            let oracle = !companion_positive_roots(&p).is_empty();
            assert_eq!(positive_quartic_roots(&p).is_some(), e >= th, "eps_b {e}");
            assert_eq!(oracle, e >= th, "oracle disagrees at eps_b {e}");
        }
    }
}

#[test]
fn branch_values_at_200() {
    let p = SystemParams::real(0.001, 1.0, 2.0, 200.0).unwrap();
    let sols = steady_state_branches(&p).unwrap();
    assert_eq!(sols.len(), 7);
    let oracle = companion_positive_roots(&p);
    let up = sols
        .iter()
        .find(|s| s.branch == Branch::Upper && s.phase_index == 0)
        .unwrap();
    let lo = sols
        .iter()
        .find(|s| s.branch == Branch::Lower && s.phase_index == 0)
        .unwrap();
    assert!((up.alpha_s.norm() - oracle[1]).abs() < 1e-8 * oracle[1]);
    assert!((lo.alpha_s.norm() - oracle[0]).abs() < 1e-8 * oracle[0]);
    assert!((up.alpha_s.norm() - 80.71).abs() < 1e-2 && (lo.alpha_s.norm() - 10.02).abs() < 1e-2);
    assert!(up.stable && !lo.stable);
}

/// Routh–Hurwitz test on `det(s I + A)`: all eigenvalues of `A` have positive
/// real part iff this quartic is Hurwitz. Only valid for real `A`.
fn hurwitz_stable(a: &Matrix4<f64>) -> bool {
    // Faddeev–LeVerrier for the characteristic polynomial of -A
    let m = -a;
    let mut coeffs = [1.0; 5];
    let mut mk = Matrix4::<f64>::zeros();
    for k in 1..=4 {
        mk = m * mk + Matrix4::identity() * coeffs[k - 1];
        coeffs[k] = -(m * mk).trace() / k as f64;
    }
    let [_, a1, a2, a3, a4] = coeffs;
    a1 > 0.0 && a2 > 0.0 && a3 > 0.0 && a4 > 0.0 && a1 * a2 > a3 && a1 * a2 * a3 > a3 * a3 + a1 * a1 * a4
}

#[test]
fn stability_agrees_with_routh_hurwitz() {
    for &(kappa, ga, gb) in &[(0.001, 1.0, 2.0), (0.025, 0.6, 1.5), (0.01, 2.0, 1.0)] {
        let th = pump_threshold(&SystemParams::real(kappa, ga, gb, 1.0).unwrap()).unwrap();
        for factor in [0.5, 1.01, 1.3, 2.82, 6.0] {
            let p = SystemParams::real(kappa, ga, gb, th * factor).unwrap();
            for s in steady_state_branches(&p).unwrap().iter().filter(|s| s.phase_index == 0) {
                let a = drift_matrix(s, &p);
                let real = a.map(|z| z.re);
                assert!(a.iter().all(|z| z.im.abs() < 1e-12));
                let oracle = hurwitz_stable(&real);
                assert_eq!(stability_check(&a).unwrap(), oracle, "{s:?}");
                assert_eq!(s.stable, oracle, "{s:?}");
            }
        }
    }
}

#[test]
fn stable_upper_branch_requires_slow_low_mode() {
    // gamma_a < gamma_b gives a stable upper branch at these pumps
    let p = SystemParams::real(0.001, 1.0, 2.0, 200.0).unwrap();
    let upper: Vec<_> = steady_state_branches(&p)
        .unwrap()
        .into_iter()
        .filter(|s| s.branch == Branch::Upper)
        .collect();
    assert_eq!(upper.len(), 3);
    assert!(upper.iter().all(|s| s.stable));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fixed_points_have_small_residual_and_phase_symmetry(
        kappa in 1e-4f64..0.1,
        ga in 0.2f64..3.0,
        gb in 0.2f64..3.0,
        factor in 1.01f64..10.0,
        phase in 0.0f64..std::f64::consts::TAU,
    ) {
        let th = pump_threshold(&SystemParams::real(kappa, ga, gb, 1.0).unwrap()).unwrap();
        let p = SystemParams::new(kappa, ga, gb, Complex64::from_polar(th * factor, phase)).unwrap();
        let sols = steady_state_branches(&p).unwrap();
        prop_assert_eq!(sols.len(), 7);
        let rot = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        for s in &sols {
            let scale = 1f64.max(s.alpha_s.norm()).max(s.beta_s.norm());
            let d = semiclassical_drift(&s.state(), &p, c(0.0));
            prop_assert!(d.norm() < 1e-9 * scale, "residual {}", d.norm());
            let rotated = SemiclassicalState::new(s.alpha_s * rot, s.beta_s);
            prop_assert!(semiclassical_drift(&rotated, &p, c(0.0)).norm() < 1e-9 * scale);
            if s.branch != Branch::Trivial {
                prop_assert!(quartic_residual(&p, s.alpha_s.norm()) < 1e-9);
                let e3 = (Complex64::i() * 3.0 * s.alpha_s.arg()).exp();
                prop_assert!((e3 - p.epsilon_b / p.epsilon_b.norm()).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn hamiltonian_flow_conserves_excitation(
        kappa in 0.01f64..0.5,
        ar in -3.0f64..3.0, ai in -3.0f64..3.0, br in -3.0f64..3.0, bi in -3.0f64..3.0,
    ) {
        let p = SystemParams { kappa, gamma_a: 0.0, gamma_b: 0.0, epsilon_b: c(0.0) };
        let y0 = SemiclassicalState::new(Complex64::new(ar, ai), Complex64::new(br, bi));
        let ctl = OdeControl { rtol: 1e-12, atol: 1e-14, sample_dt: 0.25, stop_when_steady: false, ..OdeControl::default() };
        let tr = integrate_semiclassical(&p, &DriveSchedule::none(), y0, 5.0, &ctl).unwrap();
        let inv = |s: &SemiclassicalState| s.alpha.norm_sqr() / 3.0 + s.beta.norm_sqr();
        let i0 = inv(&y0);
        for (t, s) in tr.times.iter().zip(&tr.states) {
            prop_assert!((inv(s) - i0).abs() <= 1e-9 * i0.max(1.0) * t.max(1.0), "t={} {} vs {}", t, inv(s), i0);
        }
    }
}

#[test]
fn injected_signal_run_reaches_upper_branch() {
    let p = SystemParams::real(0.001, 1.0, 2.0, 200.0).unwrap();
    let sched = DriveSchedule::switched_off_at(c(5.0), 15.0);
    let tr = integrate_semiclassical(&p, &sched, SemiclassicalState::default(), 40.0, &OdeControl::default()).unwrap();
    let last = tr.last().unwrap();
    let up = steady_state_branches(&p)
        .unwrap()
        .into_iter()
        .find(|s| s.branch == Branch::Upper && s.phase_index == 0)
        .unwrap();
    assert!((last.alpha.norm_sqr() / up.alpha_s.norm_sqr() - 1.0).abs() < 1e-2);
    assert!((last.beta.norm_sqr() / up.beta_s.norm_sqr() - 1.0).abs() < 1e-2);
    // with the drive left on, the run settles where Newton lands from the same neighbourhood
    let on = integrate_semiclassical(
        &p,
        &DriveSchedule::constant(c(5.0)),
        SemiclassicalState::default(),
        40.0,
        &OdeControl::default(),
    )
    .unwrap();
    let end = *on.last().unwrap();
    let newton = numeric_steady_state(&p, c(5.0), end, &NewtonControl::default()).unwrap();
    assert!((end.alpha.norm_sqr() / newton.alpha_s.norm_sqr() - 1.0).abs() < 1e-2);
    assert!(newton.stable);
}

#[test]
fn strong_injected_signal_leaves_one_stable_state() {
    let count = |eb: f64, ea: f64| {
        let p = SystemParams::real(0.001, 1.0, 2.0, eb).unwrap();
        let sols = find_fixed_points(&p, c(ea)).unwrap();
        for s in &sols {
            let d = semiclassical_drift(&s.state(), &p, c(ea));
            assert!(d.norm() < 1e-10 * s.state().norm().max(1.0));
        }
        sols.iter().filter(|s| s.stable).count()
    };
    for eb in [50.0, 60.0, 70.0, 75.0, 80.0, 90.0] {
        assert_eq!(count(eb, 40.0), 1, "eps_b {eb}");
    }
    // a weak seed above threshold keeps the near-vacuum state alongside the upper branch
    for eb in [75.0, 80.0, 90.0] {
        assert!(count(eb, 0.1) > 1, "eps_b {eb}");
    }
}
