//! Experiment drivers behind the subcommands. Each writes its CSV files and
//! a manifest into the given directory and returns the computed data.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use num_complex::Complex64;
use tdc_core::kappa::{estimate_kappa, modal_overlap, parse_mode_profile, MaterialGeometry};
use tdc_core::mcwf::{compare_methods, mcwf_ensemble, ComparisonReport, McwfInitial};
use tdc_core::model::{find_fixed_points, integrate_semiclassical, positive_quartic_roots, pump_threshold, OdeControl};
use tdc_core::positivep::{quadrature_statistics, run_ensemble, transition_region_flag};
use tdc_core::spectrum::{hybrid_frequency_grid, spectrum_scan};
use tdc_core::{
    Branch, DriveSchedule, InitialDistribution, MomentSeries, Observable, PhaseSpacePoint, QuadratureStats,
    SemiclassicalState, SpectrumResult, SteadyStateSolution, SystemParams,
};

use crate::config::{RunConfig, ScanParameter};
use crate::output::{Cell, RunManifest, RunOutputs, RunWriter, Table};

pub const SIMULATE_COLUMNS: [&str; 14] = [
    "t",
    "na_mean",
    "na_stderr",
    "nb_mean",
    "nb_stderr",
    "Xa_mean",
    "Ya_mean",
    "dXa",
    "dYa",
    "Xb_mean",
    "Yb_mean",
    "dXb",
    "dYb",
    "n_diverged",
];

pub const SEMICLASSICAL_COLUMNS: [&str; 7] = ["t", "alpha_re", "alpha_im", "beta_re", "beta_im", "na", "nb"];

pub const SPECTRUM_COLUMNS: [&str; 10] = [
    "omega", "V_Xa", "V_Ya", "V_Xb", "V_Yb", "C_XaXb", "C_YaYb", "DS_plus", "DS_minus", "valid",
];

pub const SCAN_COLUMNS: [&str; 15] = [
    "scan_value",
    "epsilon_b",
    "epsilon_a",
    "initial_alpha",
    "abs_alpha_mean",
    "abs_alpha_stderr",
    "na_mean",
    "na_stderr",
    "nb_mean",
    "nb_stderr",
    "upper_abs_alpha",
    "ratio_Xa",
    "transition_flag",
    "n_diverged",
    "valid",
];

pub const BRANCH_COLUMNS: [&str; 9] = [
    "scan_value",
    "branch",
    "phase_index",
    "abs_alpha",
    "alpha_re",
    "alpha_im",
    "beta_re",
    "beta_im",
    "stable",
];

pub const FLUCTUATION_COLUMNS: [&str; 11] = [
    "scan_value",
    "Xa_mean",
    "dXa",
    "ratio_Xa",
    "dYa",
    "Xb_mean",
    "dXb",
    "ratio_Xb",
    "dYb",
    "transition_flag",
    "n_diverged",
];

pub const COMPARE_COLUMNS: [&str; 11] = [
    "t",
    "pp_na_mean",
    "pp_na_stderr",
    "mc_na_mean",
    "mc_na_stderr",
    "z_na",
    "pp_nb_mean",
    "pp_nb_stderr",
    "mc_nb_mean",
    "mc_nb_stderr",
    "z_nb",
];

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn elapsed(t0: Instant) -> f64 {
    t0.elapsed().as_secs_f64()
}

/// Injected amplitude still present once the schedule has settled.
pub fn steady_drive(schedule: &DriveSchedule) -> Complex64 {
    match schedule.t_off {
        Some(_) => c(0.0),
        None => schedule.epsilon_a,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdReport {
    pub threshold: f64,
    pub epsilon_b_abs: f64,
    pub above: bool,
}

pub fn cmd_threshold(cfg: &RunConfig) -> Result<ThresholdReport> {
    let p = cfg.params()?;
    let threshold = pump_threshold(&p)?;
    Ok(ThresholdReport {
        threshold,
        epsilon_b_abs: p.epsilon_b.norm(),
        above: p.above_threshold(),
    })
}

pub struct SimulateOutcome {
    pub series: MomentSeries,
    pub outputs: RunOutputs,
}

fn quadrature_cells(stats: &QuadratureStats) -> Vec<Cell> {
    vec![
        stats.a.mean_x.into(),
        stats.a.mean_y.into(),
        stats.a.delta_x.into(),
        stats.a.delta_y.into(),
        stats.b.mean_x.into(),
        stats.b.mean_y.into(),
        stats.b.delta_x.into(),
        stats.b.delta_y.into(),
    ]
}

pub fn cmd_simulate(cfg: &RunConfig, out_dir: &Path) -> Result<SimulateOutcome> {
    let t0 = Instant::now();
    let params = cfg.params()?;
    let schedule = cfg.schedule();
    let seed = cfg.master_seed()?;
    let ens = cfg.ensemble_config(seed);
    let series = run_ensemble(&cfg.initial_distribution(), &params, &schedule, &ens)?;

    let mut table = Table::new(&SIMULATE_COLUMNS);
    for (t, snap) in series.times.iter().zip(&series.snapshots) {
        let (na, na_se) = snap.real(Observable::Na);
        let (nb, nb_se) = snap.real(Observable::Nb);
        let stats = quadrature_statistics(snap).with_context(|| format!("quadrature statistics at t = {t}"))?;
        let mut row: Vec<Cell> = vec![(*t).into(), na.into(), na_se.into(), nb.into(), nb_se.into()];
        row.extend(quadrature_cells(&stats));
        row.push(series.n_diverged.into());
        table.push(row);
    }

    let mut manifest = RunManifest::new("simulate", cfg, seed);
    manifest.n_diverged = series.n_diverged;
    manifest.valid = series.valid;
    let mut w = RunWriter::new(out_dir, "simulate", manifest);
    w.table("", &table)?;

    if cfg.semiclassical.trace {
        let ctl = OdeControl {
            rtol: cfg.semiclassical.rtol,
            atol: cfg.semiclassical.atol,
            sample_dt: ens.dt * ens.sample_stride as f64,
            ..OdeControl::default()
        };
        let start = SemiclassicalState::new(cfg.initial.alpha, cfg.initial.beta);
        let traj = integrate_semiclassical(&params, &schedule, start, ens.t_final, &ctl)?;
        let mut sc = Table::new(&SEMICLASSICAL_COLUMNS);
        for (t, s) in traj.times.iter().zip(&traj.states) {
            sc.push(vec![
                (*t).into(),
                s.alpha.re.into(),
                s.alpha.im.into(),
                s.beta.re.into(),
                s.beta.im.into(),
                s.alpha.norm_sqr().into(),
                s.beta.norm_sqr().into(),
            ]);
        }
        w.table("_semiclassical", &sc)?;
    }
    let outputs = w.finish(elapsed(t0))?;
    Ok(SimulateOutcome { series, outputs })
}

/// One point of a parameter scan with its configuration applied.
#[derive(Clone, Copy, Debug)]
pub struct ScanSetting {
    pub value: f64,
    pub params: SystemParams,
    pub schedule: DriveSchedule,
    pub initial: PhaseSpacePoint,
}

pub fn scan_settings(cfg: &RunConfig) -> Result<Vec<ScanSetting>> {
    let scan = cfg.scan.context("this command needs a [scan] table")?;
    let base = cfg.params()?;
    scan.values()
        .into_iter()
        .map(|v| {
            let mut params = base;
            let mut schedule = cfg.schedule();
            let mut alpha = cfg.initial.alpha;
            match scan.parameter {
                ScanParameter::EpsilonB => params = base.with_epsilon_b(c(v)),
                ScanParameter::EpsilonA => schedule.epsilon_a = c(v),
                ScanParameter::InitialAmplitude => alpha = c(v),
            }
            Ok(ScanSetting {
                value: v,
                params,
                schedule,
                initial: PhaseSpacePoint::coherent(alpha, cfg.initial.beta),
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ScanPoint {
    pub setting: ScanSetting,
    pub branches: Vec<SteadyStateSolution>,
    pub abs_alpha: (f64, f64),
    pub na: (f64, f64),
    pub nb: (f64, f64),
    pub stats: QuadratureStats,
    pub flagged: bool,
    pub n_diverged: u64,
    pub valid: bool,
}

impl ScanPoint {
    pub fn upper_abs_alpha(&self) -> Option<f64> {
        positive_quartic_roots(&self.setting.params).map(|r| r.upper)
    }
}

fn run_scan_point(cfg: &RunConfig, setting: ScanSetting, seed: u64) -> Result<ScanPoint> {
    let ens = cfg.ensemble_config(seed);
    let series = run_ensemble(
        &InitialDistribution::Delta(setting.initial),
        &setting.params,
        &setting.schedule,
        &ens,
    )?;
    let last = series.last().context("empty ensemble output")?;
    let stats = quadrature_statistics(last)?;
    Ok(ScanPoint {
        setting,
        branches: find_fixed_points(&setting.params, steady_drive(&setting.schedule))?,
        abs_alpha: last.real(Observable::AbsAlpha),
        na: last.real(Observable::Na),
        nb: last.real(Observable::Nb),
        flagged: transition_region_flag(&stats, cfg.spectrum.ratio_threshold),
        stats,
        n_diverged: series.n_diverged,
        valid: series.valid,
    })
}

pub struct ScanOutcome {
    pub points: Vec<ScanPoint>,
    pub outputs: RunOutputs,
}

pub fn cmd_steady_scan(cfg: &RunConfig, out_dir: &Path) -> Result<ScanOutcome> {
    let t0 = Instant::now();
    let seed = cfg.master_seed()?;
    let points = scan_settings(cfg)?
        .into_iter()
        .map(|s| run_scan_point(cfg, s, seed).with_context(|| format!("scan value {}", s.value)))
        .collect::<Result<Vec<_>>>()?;

    let mut main = Table::new(&SCAN_COLUMNS);
    let mut branches = Table::new(&BRANCH_COLUMNS);
    for p in &points {
        let s = &p.setting;
        main.push(vec![
            s.value.into(),
            s.params.epsilon_b.re.into(),
            s.schedule.epsilon_a.re.into(),
            s.initial.alpha.re.into(),
            p.abs_alpha.0.into(),
            p.abs_alpha.1.into(),
            p.na.0.into(),
            p.na.1.into(),
            p.nb.0.into(),
            p.nb.1.into(),
            p.upper_abs_alpha().unwrap_or(f64::NAN).into(),
            p.stats.a.ratio_x.into(),
            p.flagged.into(),
            p.n_diverged.into(),
            p.valid.into(),
        ]);
        for b in &p.branches {
            branches.push(vec![
                s.value.into(),
                b.branch.to_string().as_str().into(),
                u64::from(b.phase_index).into(),
                b.alpha_s.norm().into(),
                b.alpha_s.re.into(),
                b.alpha_s.im.into(),
                b.beta_s.re.into(),
                b.beta_s.im.into(),
                b.stable.into(),
            ]);
        }
    }
    let mut manifest = RunManifest::new("steady-scan", cfg, seed);
    manifest.n_diverged = points.iter().map(|p| p.n_diverged).sum();
    manifest.valid = points.iter().all(|p| p.valid);
    let mut w = RunWriter::new(out_dir, "steady_scan", manifest);
    w.table("", &main)?;
    w.table("_branches", &branches)?;
    let outputs = w.finish(elapsed(t0))?;
    Ok(ScanOutcome { points, outputs })
}

pub struct FluctuationOutcome {
    pub points: Vec<ScanPoint>,
    pub outputs: RunOutputs,
}

pub fn cmd_fluctuation_check(cfg: &RunConfig, out_dir: &Path) -> Result<FluctuationOutcome> {
    let t0 = Instant::now();
    let seed = cfg.master_seed()?;
    let points = scan_settings(cfg)?
        .into_iter()
        .map(|s| run_scan_point(cfg, s, seed).with_context(|| format!("scan value {}", s.value)))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(&FLUCTUATION_COLUMNS);
    for p in &points {
        let (a, b) = (&p.stats.a, &p.stats.b);
        table.push(vec![
            p.setting.value.into(),
            a.mean_x.into(),
            a.delta_x.into(),
            a.ratio_x.into(),
            a.delta_y.into(),
            b.mean_x.into(),
            b.delta_x.into(),
            b.ratio_x.into(),
            b.delta_y.into(),
            p.flagged.into(),
            p.n_diverged.into(),
        ]);
    }
    let mut manifest = RunManifest::new("fluctuation-check", cfg, seed);
    manifest.n_diverged = points.iter().map(|p| p.n_diverged).sum();
    manifest.valid = points.iter().all(|p| p.valid);
    manifest.note("flagged", points.iter().filter(|p| p.flagged).count() as i64);
    let mut w = RunWriter::new(out_dir, "fluctuation_check", manifest);
    w.table("", &table)?;
    let outputs = w.finish(elapsed(t0))?;
    Ok(FluctuationOutcome { points, outputs })
}

/// The stable fixed point reached under a steady injected signal: the
/// largest-amplitude stable state, preferring the principal phase.
pub fn select_fixed_point(params: &SystemParams, epsilon_a: Complex64) -> Result<SteadyStateSolution> {
    let stable: Vec<SteadyStateSolution> = find_fixed_points(params, epsilon_a)?
        .into_iter()
        .filter(|s| s.stable)
        .collect();
    let by_size = |v: &mut dyn Iterator<Item = &SteadyStateSolution>| {
        v.max_by(|a, b| a.alpha_s.norm().total_cmp(&b.alpha_s.norm())).copied()
    };
    by_size(
        &mut stable
            .iter()
            .filter(|s| s.phase_index == 0 && s.branch != Branch::Trivial),
    )
    .or_else(|| by_size(&mut stable.iter()))
    .context("no linearly stable fixed point")
}

/// Whether the linearized spectrum of `sol` may be trusted: always for the
/// trivial state, otherwise decided from a short ensemble started on it.
pub fn spectrum_validity(
    cfg: &RunConfig,
    params: &SystemParams,
    sol: &SteadyStateSolution,
    eps_a: Complex64,
    seed: u64,
) -> Result<bool> {
    if sol.branch == Branch::Trivial || cfg.spectrum.validity_trajectories == 0 {
        return Ok(true);
    }
    let mut ens = cfg.ensemble_config(seed);
    ens.n_traj = cfg.spectrum.validity_trajectories;
    ens.t_final = cfg.spectrum.validity_time;
    ens.sample_stride = ens.n_steps();
    let init = InitialDistribution::Delta(PhaseSpacePoint::coherent(sol.alpha_s, sol.beta_s));
    let series = run_ensemble(&init, params, &DriveSchedule::constant(eps_a), &ens)?;
    let stats = quadrature_statistics(series.last().context("empty ensemble output")?)?;
    Ok(series.valid && !transition_region_flag(&stats, cfg.spectrum.ratio_threshold))
}

pub struct SpectrumPoint {
    pub value: Option<f64>,
    pub solution: SteadyStateSolution,
    pub spectrum: SpectrumResult,
}

pub struct SpectrumOutcome {
    pub points: Vec<SpectrumPoint>,
    pub outputs: RunOutputs,
}

fn spectrum_rows(table: &mut Table, lead: Option<f64>, result: &SpectrumResult) {
    for r in &result.rows {
        let mut row: Vec<Cell> = lead.map(|v| vec![v.into()]).unwrap_or_default();
        row.extend([
            r.omega.into(),
            r.v_xa.into(),
            r.v_ya.into(),
            r.v_xb.into(),
            r.v_yb.into(),
            r.c_xaxb.into(),
            r.c_yayb.into(),
            r.ds_plus.into(),
            r.ds_minus.into(),
            r.valid.into(),
        ]);
        table.push(row);
    }
}

pub fn cmd_spectrum(cfg: &RunConfig, out_dir: &Path) -> Result<SpectrumOutcome> {
    let t0 = Instant::now();
    let seed = cfg.master_seed()?;
    let grid = hybrid_frequency_grid(cfg.spectrum.omega_max, cfg.spectrum.points);
    let one = |params: &SystemParams, eps_a: Complex64, value: Option<f64>| -> Result<SpectrumPoint> {
        let solution = select_fixed_point(params, eps_a)?;
        let valid = spectrum_validity(cfg, params, &solution, eps_a, seed)?;
        let spectrum = spectrum_scan(&solution, params, &grid, valid)?;
        Ok(SpectrumPoint {
            value,
            solution,
            spectrum,
        })
    };

    let mut manifest = RunManifest::new("spectrum", cfg, seed);
    let points = match cfg.scan {
        None => vec![one(&cfg.params()?, steady_drive(&cfg.schedule()), None)?],
        Some(scan) => {
            ensure!(
                scan.parameter != ScanParameter::InitialAmplitude,
                "spectra do not depend on the initial amplitude"
            );
            scan_settings(cfg)?
                .into_iter()
                .map(|s| one(&s.params, steady_drive(&s.schedule), Some(s.value)))
                .collect::<Result<Vec<_>>>()?
        }
    };

    let (stem, header): (&str, Vec<&'static str>) = match cfg.scan {
        None => ("spectrum", SPECTRUM_COLUMNS.to_vec()),
        Some(scan) => {
            let lead = match scan.parameter {
                ScanParameter::EpsilonB => "epsilon_b",
                _ => "epsilon_a",
            };
            (
                "spectrum_surface",
                std::iter::once(lead).chain(SPECTRUM_COLUMNS).collect(),
            )
        }
    };
    let mut table = Table::new(&header);
    for p in &points {
        spectrum_rows(&mut table, p.value, &p.spectrum);
    }
    manifest.valid = points.iter().all(|p| p.spectrum.valid);
    if let [p] = points.as_slice() {
        manifest.note("branch", p.solution.branch.to_string());
        manifest.note("alpha_s", vec![p.solution.alpha_s.re, p.solution.alpha_s.im]);
        manifest.note("beta_s", vec![p.solution.beta_s.re, p.solution.beta_s.im]);
    }
    let mut w = RunWriter::new(out_dir, stem, manifest);
    w.table("", &table)?;
    let outputs = w.finish(elapsed(t0))?;
    Ok(SpectrumOutcome { points, outputs })
}

pub struct CompareOutcome {
    pub report: ComparisonReport,
    pub phase_space: MomentSeries,
    pub wave_function: MomentSeries,
    pub outputs: RunOutputs,
}

pub fn cmd_mcwf_compare(cfg: &RunConfig, out_dir: &Path) -> Result<CompareOutcome> {
    let t0 = Instant::now();
    let m = cfg.mcwf.context("mcwf-compare needs an [mcwf] table")?;
    let seed = cfg.master_seed()?;
    let params = cfg.params()?;
    let schedule = cfg.schedule();

    let start = match m.initial {
        McwfInitial::Vacuum => PhaseSpacePoint::vacuum(),
        McwfInitial::Coherent { alpha, beta } => PhaseSpacePoint::coherent(alpha, beta),
        McwfInitial::Number { .. } => bail!("number-state starts have no single phase-space point"),
    };
    let mut ens = cfg.ensemble_config(seed);
    ens.t_final = m.t_final;
    let pp = run_ensemble(&InitialDistribution::Delta(start), &params, &schedule, &ens)?;

    let mut mc_params = params;
    if let Some(g) = m.gamma_b_override {
        mc_params.gamma_b = g;
    }
    let mut fock = m.fock;
    fock.master_seed = seed;
    let mc = mcwf_ensemble(&mc_params, &fock, &schedule, &m.initial, m.t_final)?;
    let report = compare_methods(&pp, &mc)?;

    let n = report.rows.len() / 2;
    let mut table = Table::new(&COMPARE_COLUMNS);
    for (a, b) in report.rows[..n].iter().zip(&report.rows[n..]) {
        debug_assert!(a.t == b.t && a.observable == Observable::Na && b.observable == Observable::Nb);
        table.push(vec![
            a.t.into(),
            a.pp_mean.into(),
            a.pp_stderr.into(),
            a.mc_mean.into(),
            a.mc_stderr.into(),
            a.z.into(),
            b.pp_mean.into(),
            b.pp_stderr.into(),
            b.mc_mean.into(),
            b.mc_stderr.into(),
            b.z.into(),
        ]);
    }
    let mut manifest = RunManifest::new("mcwf-compare", cfg, seed);
    manifest.n_diverged = pp.n_diverged;
    manifest.valid = pp.valid;
    manifest.note("passed", report.passed);
    manifest.note("mean_abs_z", report.mean_abs_z);
    manifest.note("max_abs_z", report.max_abs_z);
    manifest.note("points_above_failure_z", report.failures.len() as i64);
    let mut w = RunWriter::new(out_dir, "mcwf_compare", manifest);
    w.table("", &table)?;
    let outputs = w.finish(elapsed(t0))?;
    Ok(CompareOutcome {
        report,
        phase_space: pp,
        wave_function: mc,
        outputs,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KappaReport {
    pub kappa: f64,
    pub sigma: f64,
    pub phase_matched: bool,
    /// `kappa / gamma_a` when a physical loss rate is given.
    pub ratio: Option<f64>,
}

pub fn cmd_kappa(cfg: &RunConfig) -> Result<KappaReport> {
    let k = cfg.kappa.as_ref().context("kappa needs a [kappa] table")?;
    let sigma = match (&k.profile, k.sigma) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            modal_overlap(&parse_mode_profile(&text)?)?
        }
        (None, Some(s)) => s,
        (None, None) => bail!("kappa needs either sigma or a mode profile"),
    };
    let mg = MaterialGeometry {
        chi3: k.chi3,
        omega_a: k.omega_a,
        eps_a_rel: k.eps_a_rel,
        eps_b_rel: k.eps_b_rel,
        length: k.length,
        sigma,
        m_a: k.m_a,
        m_b: k.m_b,
    };
    let kappa = estimate_kappa(&mg);
    Ok(KappaReport {
        kappa,
        sigma,
        phase_matched: mg.phase_matched(),
        ratio: k.gamma_a_si.map(|g| kappa / g),
    })
}
