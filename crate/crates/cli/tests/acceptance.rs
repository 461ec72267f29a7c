//! Desk-scale acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero when the set of failures differs from `EXPECTED_FAILURES`.

use std::fs;
use std::time::Instant;

use num_complex::Complex64;
use tdc_cli::commands::{cmd_mcwf_compare, cmd_simulate, cmd_steady_scan};
use tdc_cli::config::RunConfig;
use tdc_core::kappa::{estimate_kappa, MaterialGeometry};
use tdc_core::mcwf::{build_operators, mcwf_trajectory, FockConfig, McwfInitial};
use tdc_core::model::{positive_quartic_roots, steady_state_branches};
use tdc_core::spectrum::{
    default_frequency_grid, diffusion_matrix, drift_matrix, frequency_integrated_covariance, spectrum_matrix,
    spectrum_scan, stationary_covariance, CMatrix4,
};
use tdc_core::{pump_threshold, Branch, DriveSchedule, Observable, SpectrumRow, SteadyStateSolution, SystemParams};

/// Criteria known to fail; see the README for the analysis.
const EXPECTED_FAILURES: &[u32] = &[6];

type Criterion = (u32, &'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn params(eps_b: f64) -> SystemParams {
    SystemParams::real(0.001, 1.0, 2.0, eps_b).unwrap()
}

fn upper(p: &SystemParams) -> SteadyStateSolution {
    steady_state_branches(p)
        .unwrap()
        .into_iter()
        .find(|s| s.branch == Branch::Upper && s.phase_index == 0)
        .unwrap()
}

fn quartic(p: &SystemParams, x: f64) -> f64 {
    let (pp, q) = (
        3.0 * p.epsilon_b.norm() / p.kappa,
        3.0 * p.gamma_a * p.gamma_b / p.kappa.powi(2),
    );
    x.powi(4) - pp * x + q
}

/// Positive roots by sign changes on a dense grid, refined by bisection.
fn dense_roots(p: &SystemParams) -> Vec<f64> {
    let hi = (3.0 * p.epsilon_b.norm() / p.kappa).cbrt() * 1.01;
    let n = 1_000_000;
    let x = |k: usize| hi * k as f64 / n as f64;
    let mut roots = Vec::new();
    for k in 0..n {
        let (mut a, mut b) = (x(k), x(k + 1));
        if quartic(p, a).signum() == quartic(p, b).signum() {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if quartic(p, m).signum() == quartic(p, a).signum() {
                a = m;
            } else {
                b = m;
            }
        }
        roots.push(0.5 * (a + b));
    }
    roots
}

fn threshold_criterion() -> Verdict {
    let t0 = Instant::now();
    let th = pump_threshold(&params(1.0)).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    // smallest pump at which the quartic reaches zero for some x > 0
    let has_roots = |e: f64| {
        let p = params(e);
        let x = (3.0 * e / p.kappa / 4.0).cbrt();
        quartic(&p, x) <= 0.0
    };
    let (mut lo, mut hi) = (1.0, 1000.0);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if has_roots(m) {
            hi = m;
        } else {
            lo = m;
        }
    }
    let onset = 0.5 * (lo + hi);
    let rel = (th - onset).abs() / onset;
    verdict(
        rel <= 1e-6 && (th - 70.92).abs() < 0.02 && secs < 1.0,
        format!("threshold {th:.6}, bisection {onset:.6}, rel {rel:.1e}, {secs:.3} s"),
    )
}

fn branches_criterion() -> Verdict {
    let t0 = Instant::now();
    let p = params(200.0);
    let roots = positive_quartic_roots(&p).unwrap();
    let sols = steady_state_branches(&p).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let oracle = dense_roots(&p);
    let find = |b: Branch| sols.iter().find(|s| s.branch == b && s.phase_index == 0).unwrap();
    let (up, lo) = (find(Branch::Upper), find(Branch::Lower));
    let rel_lo = (roots.lower - oracle[0]).abs() / oracle[0];
    let rel_up = (roots.upper - oracle[1]).abs() / oracle[1];
    let pass = oracle.len() == 2
        && rel_lo <= 1e-8
        && rel_up <= 1e-8
        && (up.alpha_s.norm() - 80.71).abs() < 0.01
        && (lo.alpha_s.norm() - 10.02).abs() < 0.01
        && up.stable
        && !lo.stable
        && secs < 1.0;
    verdict(
        pass,
        format!(
            "|alpha_s| {:.4} / {:.4} vs dense {:.4} / {:.4} (rel {rel_up:.1e}, {rel_lo:.1e}); upper stable {}, lower stable {}; {secs:.3} s",
            roots.upper, roots.lower, oracle[1], oracle[0], up.stable, lo.stable
        ),
    )
}

const TIME_EVOLUTION: &str = include_str!("../../../configs/time_evolution.toml");

fn sde_semiclassical_criterion() -> Verdict {
    let mut cfg = RunConfig::from_toml(TIME_EVOLUTION).unwrap();
    cfg.ensemble.n_traj = 10_000;
    cfg.ensemble.seed = Some(7);
    cfg.ensemble.sample_stride = 1000;
    cfg.semiclassical.trace = false;
    let dir = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    let run = cmd_simulate(&cfg, dir.path()).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let s = upper(&cfg.params().unwrap());
    let last = run.series.last().unwrap();
    let (na, na_se) = last.real(Observable::Na);
    let (nb, nb_se) = last.real(Observable::Nb);
    let (ta, tb) = (s.alpha_s.norm_sqr(), s.beta_s.norm_sqr());
    let ok = |m: f64, se: f64, t: f64| (m - t).abs() <= 3.0 * se && (m - t).abs() <= 0.02 * t;
    verdict(
        run.series.valid && ok(na, na_se, ta) && ok(nb, nb_se, tb),
        format!(
            "<n_a> {na:.2} +- {na_se:.2} vs {ta:.2}; <n_b> {nb:.3} +- {nb_se:.3} vs {tb:.3}; {} diverged; {secs:.0} s",
            run.series.n_diverged
        ),
    )
}

fn transition_criterion() -> Verdict {
    let text = r#"
[initial]
alpha = 30.0
beta = 0.0

[ensemble]
n_traj = 1000
t_final = 30.0
dt = 0.001
sample_stride = 30000
seed = 5

[scan]
parameter = "epsilon_b"
start = 100.0
stop = 105.0
steps = 2
"#;
    let mut cfg = RunConfig::from_toml(text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let scan = cmd_steady_scan(&cfg, dir.path()).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for p in &scan.points {
        let (m, se) = p.abs_alpha;
        let up = p.upper_abs_alpha().unwrap();
        let inside = m - 3.0 * se > 0.0 && m + 3.0 * se < up;
        pass &= inside && p.flagged && p.valid;
        parts.push(format!(
            "eps_b {}: <|alpha|> {m:.2} +- {se:.2} in (0, {up:.2}) {inside}, flagged {}",
            p.setting.value, p.flagged
        ));
    }
    // far above threshold the ensemble sits on the upper branch and is not flagged
    cfg.scan.as_mut().unwrap().start = 200.0;
    cfg.scan.as_mut().unwrap().steps = 1;
    let control = cmd_steady_scan(&cfg, dir.path()).unwrap().points.remove(0);
    let (m, se) = control.abs_alpha;
    let up = control.upper_abs_alpha().unwrap();
    let on_branch = (m - up).abs() <= 3.0 * se + 1e-3 * up;
    pass &= on_branch && !control.flagged;
    parts.push(format!(
        "control eps_b 200: {m:.3} vs {up:.3}, flagged {}",
        control.flagged
    ));
    verdict(pass, parts.join("; "))
}

fn max_entry(m: &CMatrix4) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn spectrum_identity_criterion() -> Verdict {
    let t0 = Instant::now();
    let p = params(200.0);
    let s = upper(&p);
    let (a, d) = (drift_matrix(&s, &p), diffusion_matrix(&s, &p));
    let grid = default_frequency_grid();
    let i = Complex64::new(0.0, 1.0);
    let mut resolvent: f64 = 0.0;
    for &w in &grid {
        let sm = spectrum_matrix(&a, &d, w).unwrap();
        let shift = CMatrix4::identity() * (i * w);
        let back = (a + shift) * sm * (a.adjoint() - shift);
        resolvent = resolvent.max(max_entry(&(back - d)) / max_entry(&d));
    }
    let g = stationary_covariance(&a, &d).unwrap();
    let integrated = frequency_integrated_covariance(&a, &d, 100.0, 20_000).unwrap();
    let lyapunov = max_entry(&(integrated - g)) / max_entry(&g);
    let below = params(50.0);
    let trivial = steady_state_branches(&below).unwrap().remove(0);
    let vacuum = spectrum_scan(&trivial, &below, &grid, true)
        .unwrap()
        .rows
        .iter()
        .zip(&grid)
        .all(|(r, &w)| *r == SpectrumRow::vacuum(w));
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        grid.len() == 400 && resolvent <= 1e-10 && lyapunov <= 1e-3 && vacuum && secs < 5.0,
        format!(
            "resolvent residual {resolvent:.1e} on {} points; Lyapunov rel {lyapunov:.1e}; vacuum exact {vacuum}; {secs:.2} s",
            grid.len()
        ),
    )
}

fn squeezing_criterion() -> Verdict {
    let grid = default_frequency_grid();
    let scan = |eb: f64| {
        let p = params(eb);
        spectrum_scan(&upper(&p), &p, &grid, true).unwrap()
    };
    let at200 = scan(200.0);
    let min_ya = at200.argmin_by(|r| r.v_ya).unwrap().v_ya;
    let min_yb = at200.argmin_by(|r| r.v_yb).unwrap().v_yb;
    let ds_minus_0 = at200.rows[0].ds_minus;
    let ds_plus_min = at200.argmin_by(|r| r.ds_plus).unwrap().ds_plus;
    let ds_minus_min = at200.argmin_by(|r| r.ds_minus).unwrap().ds_minus;

    let mut trend = true;
    let mut prev = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for eb in [100.0, 150.0, 200.0, 300.0, 400.0] {
        let r = *scan(eb).argmin_by(|r| r.v_ya).unwrap();
        trend &= r.omega >= prev.0 && r.v_ya >= prev.1;
        prev = (r.omega, r.v_ya);
    }

    let clauses = [
        ("min V_Ya < 1", min_ya < 1.0),
        ("min V_Yb < 1", min_yb < 1.0),
        ("DS_-(0) < 4", ds_minus_0 < 4.0),
        ("DS_+ >= 4 on grid", ds_plus_min >= 4.0),
        ("trend", trend),
    ];
    let failed: Vec<&str> = clauses.iter().filter(|c| !c.1).map(|c| c.0).collect();
    verdict(
        failed.is_empty(),
        format!(
            "min V_Ya {min_ya:.4}, min V_Yb {min_yb:.4}, DS_-(0) {ds_minus_0:.3}, min DS_+ {ds_plus_min:.3} (DS_+(0) {:.3}), min DS_- {ds_minus_min:.3}; failed clauses: {failed:?}",
            at200.rows[0].ds_plus
        ),
    )
}

const MCWF_COMPARE: &str = include_str!("../../../configs/mcwf_compare.toml");

fn mcwf_criterion() -> Verdict {
    let t0 = Instant::now();
    let mut cfg = RunConfig::from_toml(MCWF_COMPARE).unwrap();
    cfg.ensemble.seed = Some(3);
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_mcwf_compare(&cfg, dir.path()).unwrap();
    let r = &out.report;

    // exchange of one pump photon for three signal photons, no losses
    let lossless = SystemParams {
        kappa: 0.025,
        gamma_a: 0.0,
        gamma_b: 0.0,
        epsilon_b: c(0.0),
    };
    let small = FockConfig {
        n_a: 8,
        n_b: 4,
        ..FockConfig::default()
    };
    let ops = build_operators(&lossless, &small).unwrap();
    let psi = McwfInitial::Number { n_a: 3, n_b: 0 }.state_vector(&small).unwrap();
    let tr = mcwf_trajectory(&psi, &ops, &DriveSchedule::none(), 60.0, 0).unwrap();
    let (na, nb) = (tr.series(Observable::Na), tr.series(Observable::Nb));
    let drift = na
        .iter()
        .zip(&nb)
        .map(|(a, b)| (a / 3.0 + b - 1.0).abs())
        .fold(0.0, f64::max);

    let fock = cfg.mcwf.unwrap().fock;
    let ops = build_operators(&cfg.params().unwrap(), &fock).unwrap();
    let vac = McwfInitial::Vacuum.state_vector(&fock).unwrap();
    let norm = (0..4)
        .map(|id| {
            mcwf_trajectory(&vac, &ops, &cfg.schedule(), 2.0, id)
                .unwrap()
                .max_norm_error
        })
        .fold(0.0, f64::max);
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        r.mean_abs_z < 3.0 && drift < 1e-8 && norm < 1e-12,
        format!(
            "mean |z| {:.3} (max {:.2}, {} points above 5) over {} rows; excitation drift {drift:.1e}; norm error {norm:.1e}; {secs:.0} s",
            r.mean_abs_z,
            r.max_abs_z,
            r.failures.len(),
            r.rows.len()
        ),
    )
}

fn kappa_criterion() -> Verdict {
    let pi = std::f64::consts::PI;
    let k = estimate_kappa(&MaterialGeometry {
        chi3: 1.5e-20,
        omega_a: 2.0 * pi * 194e12,
        eps_a_rel: 4.0,
        eps_b_rel: 4.0,
        length: 2.0 * pi * 20e-6,
        sigma: 0.43e12,
        m_a: 100,
        m_b: 300,
    });
    let ratio = k / 1.5e9;
    verdict(
        k > 100.0 / 3.0 && k < 300.0 && ratio > 1e-7 / 3.0 && ratio < 3e-7,
        format!("kappa {k:.2} s^-1, kappa / gamma_a {ratio:.2e}"),
    )
}

fn determinism_criterion() -> Verdict {
    let mut cfg = RunConfig::from_toml(TIME_EVOLUTION).unwrap();
    cfg.ensemble.n_traj = 500;
    cfg.ensemble.t_final = 4.0;
    cfg.drive.t_off = Some(2.0);
    cfg.ensemble.seed = Some(99);
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let out = cmd_simulate(&cfg, dir.path()).unwrap();
        out.outputs
            .data
            .iter()
            .map(|p| fs::read(p).unwrap())
            .collect::<Vec<_>>()
    };
    let (a, b) = (run(), run());
    verdict(
        a == b,
        format!(
            "{} files, {} bytes of CSV",
            a.len(),
            a.iter().map(Vec::len).sum::<usize>()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "pump threshold", threshold_criterion),
        (2, "steady-state branches", branches_criterion),
        (3, "SDE vs semiclassical populations", sde_semiclassical_criterion),
        (4, "transition region", transition_criterion),
        (5, "spectrum identities", spectrum_identity_criterion),
        (6, "squeezing and entanglement", squeezing_criterion),
        (7, "MCWF cross-validation", mcwf_criterion),
        (8, "kappa estimate", kappa_criterion),
        (9, "determinism", determinism_criterion),
    ];
    let mut failed = Vec::new();
    for (n, name, check) in criteria {
        let v = check();
        println!(
            "criterion {n} {} {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        if !v.pass {
            failed.push(n);
        }
    }
    if failed != EXPECTED_FAILURES {
        eprintln!("failed criteria {failed:?}, expected {EXPECTED_FAILURES:?}");
        std::process::exit(1);
    }
    println!("acceptance: failures {failed:?} match the expected set");
}
