//! Quantum-trajectory (Monte Carlo wave-function) reference simulation of the
//! damped, driven two-mode system in a truncated number basis, and
//! cross-checks against phase-space ensembles.
//!
//! Basis index of `|n_a, n_b>` is `n_a * N_b + n_b`.

pub mod sparse;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::model::{positive_quartic_roots, DriveSchedule, SystemParams};
use crate::moments::{
    accumulate_ensemble, sample_step_indices, MomentSeries, Observable, ObservableRecord, N_OBSERVABLES,
};
use crate::positivep::trajectory_rng;
use sparse::{inner, norm_sqr};

/// Largest per-step jump probability accepted by the fixed-step scheme.
pub const MAX_JUMP_PROBABILITY: f64 = 0.1;

/// Scaling of the jump operators `c_i = sqrt(f * gamma_i) * mode_i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpConvention {
    /// `f = 2`: photon number decays at `2 gamma`, matching amplitude damping `gamma` in the SDEs.
    #[default]
    Doubled,
    /// `f = 1`: photon number decays at `gamma`.
    Literal,
}

impl JumpConvention {
    pub fn rate_factor(self) -> f64 {
        match self {
            Self::Doubled => 2.0,
            Self::Literal => 1.0,
        }
    }
}

/// Basis truncation and trajectory settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FockConfig {
    /// Number of levels kept for mode `a` (photon numbers `0..n_a`).
    pub n_a: usize,
    pub n_b: usize,
    pub dt: f64,
    pub n_traj: u64,
    pub master_seed: u64,
    pub sample_stride: usize,
    pub jump_convention: JumpConvention,
}

impl Default for FockConfig {
    fn default() -> Self {
        Self {
            n_a: 60,
            n_b: 25,
            dt: 1e-3,
            n_traj: 200,
            master_seed: 0,
            sample_stride: 100,
            jump_convention: JumpConvention::Doubled,
        }
    }
}

impl FockConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_a < 1 || self.n_b < 1 {
            return Err(Error::InvalidParameter(format!(
                "cutoffs must be at least 1, got ({}, {})",
                self.n_a, self.n_b
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_traj == 0 {
            return Err(Error::InvalidParameter("n_traj must be at least 1".into()));
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidParameter("sample_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n_a * self.n_b
    }

    pub fn index(&self, na: usize, nb: usize) -> usize {
        na * self.n_b + nb
    }

    pub fn n_steps(&self, t_final: f64) -> usize {
        (t_final / self.dt).round().max(1.0) as usize
    }

    pub fn sample_times(&self, t_final: f64) -> Vec<f64> {
        sample_step_indices(self.n_steps(t_final), self.sample_stride)
            .iter()
            .map(|&k| k as f64 * self.dt)
            .collect()
    }
}

/// Operators on the truncated product space.
#[derive(Clone, Debug)]
pub struct OperatorSet {
    pub fock: FockConfig,
    pub a: CsrMatrix,
    pub a_dag: CsrMatrix,
    pub b: CsrMatrix,
    pub b_dag: CsrMatrix,
    pub num_a: CsrMatrix,
    pub num_b: CsrMatrix,
    /// Interaction plus high-mode pump.
    pub h_sys: CsrMatrix,
    /// `c_a`, `c_b`.
    pub jumps: [CsrMatrix; 2],
    /// Diagonals of `a^† a` and `b^† b`.
    pub populations: [Vec<f64>; 2],
    /// Diagonals of `c_a^† c_a` and `c_b^† c_b`.
    pub jump_rates: [Vec<f64>; 2],
    /// `-i H_eff` with `H_eff = H_sys - (i/2) sum c^† c`.
    pub generator: CsrMatrix,
}

impl OperatorSet {
    /// `-i (H_eff + i (eps_a a^† - eps_a^* a))`.
    pub fn generator_with_drive(&self, epsilon_a: Complex64) -> CsrMatrix {
        if epsilon_a == Complex64::new(0.0, 0.0) {
            return self.generator.clone();
        }
        CsrMatrix::linear_combination(&[
            (Complex64::new(1.0, 0.0), &self.generator),
            (epsilon_a, &self.a_dag),
            (-epsilon_a.conj(), &self.a),
        ])
    }
}

fn lowering(n: usize) -> CsrMatrix {
    CsrMatrix::from_triplets(n, n, (1..n).map(|k| (k - 1, k, Complex64::new((k as f64).sqrt(), 0.0))))
}

fn validate_mcwf_params(params: &SystemParams) -> Result<()> {
    let ok = |x: f64| x >= 0.0 && x.is_finite();
    if !(ok(params.kappa) && ok(params.gamma_a) && ok(params.gamma_b)) {
        return Err(Error::InvalidParameter(
            "kappa and damping rates must be finite and non-negative".into(),
        ));
    }
    if !(params.epsilon_b.re.is_finite() && params.epsilon_b.im.is_finite()) {
        return Err(Error::InvalidParameter("epsilon_b must be finite".into()));
    }
    Ok(())
}

fn fits(mean: f64, levels: usize) -> bool {
    mean + 4.0 * mean.sqrt() <= (levels - 1) as f64
}

fn cutoff_error(mode: &str, mean: f64, levels: usize) -> Error {
    Error::Configuration(format!(
        "cutoff {levels} for mode {mode} too small for estimated population {mean:.3} (needs mean + 4 sd below the top level)"
    ))
}

/// Population estimates from the pumps alone: the coherent response of mode
/// `b`, and the upper mean-field branch of mode `a` above threshold.
fn pump_population_estimates(params: &SystemParams) -> (f64, f64) {
    let nb = if params.gamma_b > 0.0 {
        (params.epsilon_b.norm() / params.gamma_b).powi(2)
    } else {
        0.0
    };
    let na = if params.kappa > 0.0 && params.gamma_a > 0.0 && params.gamma_b > 0.0 {
        positive_quartic_roots(params).map_or(0.0, |r| r.upper * r.upper)
    } else {
        0.0
    };
    (na, nb)
}

/// Checks that estimated populations `(n_a, n_b)` stay four standard
/// deviations below each cutoff.
pub fn check_cutoffs(fock: &FockConfig, n_a: f64, n_b: f64) -> Result<()> {
    if !fits(n_a, fock.n_a) {
        return Err(cutoff_error("a", n_a, fock.n_a));
    }
    if !fits(n_b, fock.n_b) {
        return Err(cutoff_error("b", n_b, fock.n_b));
    }
    Ok(())
}

/// Builds ladder operators, the system Hamiltonian, jump operators and the
/// effective generator on the `N_a * N_b` product space.
pub fn build_operators(params: &SystemParams, fock: &FockConfig) -> Result<OperatorSet> {
    validate_mcwf_params(params)?;
    fock.validate()?;
    let (na_est, nb_est) = pump_population_estimates(params);
    check_cutoffs(fock, na_est, nb_est)?;

    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::i();
    let a = lowering(fock.n_a).kron(&CsrMatrix::identity(fock.n_b));
    let b = CsrMatrix::identity(fock.n_a).kron(&lowering(fock.n_b));
    let a_dag = a.adjoint();
    let b_dag = b.adjoint();
    let num_a = a_dag.matmul(&a);
    let num_b = b_dag.matmul(&b);

    let a_cubed = a.matmul(&a).matmul(&a);
    let up = a_cubed.adjoint().matmul(&b);
    let down = up.adjoint();
    let k3 = params.kappa / 3.0;
    let eb = params.epsilon_b;
    let h_sys =
        CsrMatrix::linear_combination(&[(i * k3, &up), (-i * k3, &down), (i * eb, &b_dag), (-i * eb.conj(), &b)]);

    let f = fock.jump_convention.rate_factor();
    let (ga, gb) = (f * params.gamma_a, f * params.gamma_b);
    let jumps = [a.scale(one * ga.sqrt()), b.scale(one * gb.sqrt())];
    let diag = |m: &CsrMatrix| (0..fock.dim()).map(|k| m.get(k, k).re).collect::<Vec<f64>>();
    let populations = [diag(&num_a), diag(&num_b)];
    let jump_rates = [
        populations[0].iter().map(|n| ga * n).collect::<Vec<_>>(),
        populations[1].iter().map(|n| gb * n).collect::<Vec<_>>(),
    ];

    // -i H_eff = -i H_sys - (1/2) sum c^† c
    let loss = CsrMatrix::from_diagonal(
        &(0..fock.dim())
            .map(|k| Complex64::new(-0.5 * (jump_rates[0][k] + jump_rates[1][k]), 0.0))
            .collect::<Vec<_>>(),
    );
    let generator = CsrMatrix::linear_combination(&[(-i, &h_sys), (one, &loss)]);

    Ok(OperatorSet {
        fock: *fock,
        a,
        a_dag,
        b,
        b_dag,
        num_a,
        num_b,
        h_sys,
        jumps,
        populations,
        jump_rates,
        generator,
    })
}

/// Initial pure state of a trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McwfInitial {
    #[default]
    Vacuum,
    Number {
        n_a: usize,
        n_b: usize,
    },
    /// Product of coherent states, truncated and renormalized.
    Coherent {
        alpha: Complex64,
        beta: Complex64,
    },
}

fn coherent_coefficients(z: Complex64, levels: usize) -> Vec<Complex64> {
    let mut c = Vec::with_capacity(levels);
    let mut cur = Complex64::new((-0.5 * z.norm_sqr()).exp(), 0.0);
    for n in 0..levels {
        c.push(cur);
        cur = cur * z / ((n + 1) as f64).sqrt();
    }
    c
}

impl McwfInitial {
    /// Mean populations `(n_a, n_b)`.
    pub fn populations(&self) -> (f64, f64) {
        match *self {
            Self::Vacuum => (0.0, 0.0),
            Self::Number { n_a, n_b } => (n_a as f64, n_b as f64),
            Self::Coherent { alpha, beta } => (alpha.norm_sqr(), beta.norm_sqr()),
        }
    }

    pub fn state_vector(&self, fock: &FockConfig) -> Result<Vec<Complex64>> {
        let mut psi = vec![Complex64::new(0.0, 0.0); fock.dim()];
        match *self {
            Self::Vacuum => psi[0] = Complex64::new(1.0, 0.0),
            Self::Number { n_a, n_b } => {
                if n_a >= fock.n_a || n_b >= fock.n_b {
                    return Err(Error::Configuration(format!(
                        "number state |{n_a}, {n_b}> outside cutoffs ({}, {})",
                        fock.n_a, fock.n_b
                    )));
                }
                psi[fock.index(n_a, n_b)] = Complex64::new(1.0, 0.0);
            }
            Self::Coherent { alpha, beta } => {
                let ca = coherent_coefficients(alpha, fock.n_a);
                let cb = coherent_coefficients(beta, fock.n_b);
                for (j, x) in ca.iter().enumerate() {
                    for (k, y) in cb.iter().enumerate() {
                        psi[fock.index(j, k)] = x * y;
                    }
                }
                let n = norm_sqr(&psi).sqrt();
                if n == 0.0 {
                    return Err(Error::ZeroNorm);
                }
                psi.iter_mut().for_each(|z| *z /= n);
            }
        }
        Ok(psi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpChannel {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    /// Start of the step in which the jump occurred.
    pub t: f64,
    pub channel: JumpChannel,
}

/// Sampled expectation values and jump record of one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct McwfTrajectory {
    pub times: Vec<f64>,
    pub records: Vec<ObservableRecord>,
    pub jumps: Vec<JumpEvent>,
    /// Largest `| ||psi|| - 1 |` after renormalization.
    pub max_norm_error: f64,
}

impl McwfTrajectory {
    pub fn series(&self, obs: Observable) -> Vec<f64> {
        self.records.iter().map(|r| r[obs as usize].re).collect()
    }
}

/// Observable record of a pure state, laid out like the phase-space
/// records. `AbsAlpha` holds `|<a>|`.
pub fn state_observables(ops: &OperatorSet, psi: &[Complex64], scratch: &mut [Complex64]) -> ObservableRecord {
    let one = Complex64::new(1.0, 0.0);
    let n_a = Complex64::new(diagonal_expectation(psi, &ops.populations[0]), 0.0);
    let n_b = Complex64::new(diagonal_expectation(psi, &ops.populations[1]), 0.0);

    ops.a.mul_vec_into(psi, scratch);
    let ma = inner(psi, scratch);
    let ma2 = inner(&ops.a_dag.mul_vec(psi), scratch);
    ops.b.mul_vec_into(psi, scratch);
    let mb = inner(psi, scratch);
    let mb2 = inner(&ops.b_dag.mul_vec(psi), scratch);

    let mut r = [Complex64::new(0.0, 0.0); N_OBSERVABLES];
    r[Observable::Na as usize] = n_a;
    r[Observable::Nb as usize] = n_b;
    r[Observable::Alpha as usize] = ma;
    r[Observable::AlphaPlus as usize] = ma.conj();
    r[Observable::Beta as usize] = mb;
    r[Observable::BetaPlus as usize] = mb.conj();
    r[Observable::Xa as usize] = Complex64::new(2.0 * ma.re, 0.0);
    r[Observable::Ya as usize] = Complex64::new(2.0 * ma.im, 0.0);
    r[Observable::Xa2 as usize] = one + 2.0 * n_a + 2.0 * ma2.re;
    r[Observable::Ya2 as usize] = one + 2.0 * n_a - 2.0 * ma2.re;
    r[Observable::Xb as usize] = Complex64::new(2.0 * mb.re, 0.0);
    r[Observable::Yb as usize] = Complex64::new(2.0 * mb.im, 0.0);
    r[Observable::Xb2 as usize] = one + 2.0 * n_b + 2.0 * mb2.re;
    r[Observable::Yb2 as usize] = one + 2.0 * n_b - 2.0 * mb2.re;
    r[Observable::AbsAlpha as usize] = Complex64::new(ma.norm(), 0.0);
    r
}

fn diagonal_expectation(psi: &[Complex64], diag: &[f64]) -> f64 {
    psi.iter().zip(diag).map(|(z, d)| z.norm_sqr() * d).sum()
}

/// Classical RK4 step of `dpsi/dt = G psi`.
struct Rk4 {
    k: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
}

impl Rk4 {
    fn new(dim: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); dim];
        Self {
            k: [z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z,
        }
    }

    fn step(&mut self, g: &CsrMatrix, psi: &mut [Complex64], dt: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        g.mul_vec_into(psi, k1);
        for ((t, p), k) in self.tmp.iter_mut().zip(psi.iter()).zip(k1.iter()) {
            *t = p + k * (0.5 * dt);
        }
        g.mul_vec_into(&self.tmp, k2);
        for ((t, p), k) in self.tmp.iter_mut().zip(psi.iter()).zip(k2.iter()) {
            *t = p + k * (0.5 * dt);
        }
        g.mul_vec_into(&self.tmp, k3);
        for ((t, p), k) in self.tmp.iter_mut().zip(psi.iter()).zip(k3.iter()) {
            *t = p + k * dt;
        }
        g.mul_vec_into(&self.tmp, k4);
        let w = dt / 6.0;
        for (idx, p) in psi.iter_mut().enumerate() {
            *p += (k1[idx] + 2.0 * k2[idx] + 2.0 * k3[idx] + k4[idx]) * w;
        }
    }
}

const NORM_FLOOR: f64 = 1e-200;

fn renormalize(psi: &mut [Complex64], t: f64) -> Result<f64> {
    let n2 = norm_sqr(psi);
    if !(n2.is_finite() && n2 > NORM_FLOOR) {
        return Err(Error::NormUnderflow { t });
    }
    let n = n2.sqrt();
    psi.iter_mut().for_each(|z| *z /= n);
    Ok((norm_sqr(psi).sqrt() - 1.0).abs())
}

/// Runs one first-order quantum trajectory with the random stream
/// `(fock.master_seed, stream_id)`.
pub fn mcwf_trajectory(
    initial: &[Complex64],
    ops: &OperatorSet,
    schedule: &DriveSchedule,
    t_final: f64,
    stream_id: u64,
) -> Result<McwfTrajectory> {
    let fock = &ops.fock;
    fock.validate()?;
    schedule.validate()?;
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "t_final must be positive, got {t_final}"
        )));
    }
    if initial.len() != fock.dim() {
        return Err(Error::InvalidParameter(format!(
            "initial state has dimension {}, basis has {}",
            initial.len(),
            fock.dim()
        )));
    }
    if (norm_sqr(initial) - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter("initial state must be normalized".into()));
    }

    let dt = fock.dt;
    let n = fock.n_steps(t_final);
    let steps = sample_step_indices(n, fock.sample_stride);
    let driven = ops.generator_with_drive(schedule.epsilon_a);
    let mut rng = trajectory_rng(fock.master_seed, stream_id);
    let mut rk = Rk4::new(fock.dim());
    let mut scratch = vec![Complex64::new(0.0, 0.0); fock.dim()];
    let mut psi = initial.to_vec();

    let mut out = McwfTrajectory {
        times: steps.iter().map(|&k| k as f64 * dt).collect(),
        records: Vec::with_capacity(steps.len()),
        jumps: Vec::new(),
        max_norm_error: 0.0,
    };
    let mut next_sample = 0;
    if steps[0] == 0 {
        out.records.push(state_observables(ops, &psi, &mut scratch));
        next_sample = 1;
    }

    for k in 0..n {
        let t = k as f64 * dt;
        let dp_a = dt * diagonal_expectation(&psi, &ops.jump_rates[0]);
        let dp_b = dt * diagonal_expectation(&psi, &ops.jump_rates[1]);
        let dp = dp_a + dp_b;
        if dp >= MAX_JUMP_PROBABILITY {
            return Err(Error::StepSize { probability: dp, t });
        }
        if rng.random::<f64>() < dp {
            let channel = if rng.random::<f64>() * dp < dp_a {
                JumpChannel::A
            } else {
                JumpChannel::B
            };
            let op = match channel {
                JumpChannel::A => &ops.jumps[0],
                JumpChannel::B => &ops.jumps[1],
            };
            op.mul_vec_into(&psi, &mut scratch);
            std::mem::swap(&mut psi, &mut scratch);
            renormalize(&mut psi, t)?;
            out.jumps.push(JumpEvent { t, channel });
        }
        // The jump sits at the start of the step; the rest of the step is
        // no-jump evolution.
        let g = if schedule.epsilon_a_at(t) == Complex64::new(0.0, 0.0) {
            &ops.generator
        } else {
            &driven
        };
        rk.step(g, &mut psi, dt);
        let err = renormalize(&mut psi, t + dt)?;
        out.max_norm_error = out.max_norm_error.max(err);

        if next_sample < steps.len() && steps[next_sample] == k + 1 {
            out.records.push(state_observables(ops, &psi, &mut scratch));
            next_sample += 1;
        }
    }
    Ok(out)
}

/// Averages `fock.n_traj` trajectories into the same moment layout as the
/// phase-space engine.
pub fn mcwf_ensemble(
    params: &SystemParams,
    fock: &FockConfig,
    schedule: &DriveSchedule,
    initial: &McwfInitial,
    t_final: f64,
) -> Result<MomentSeries> {
    let ops = build_operators(params, fock)?;
    let (na0, nb0) = initial.populations();
    let na_drive = if params.gamma_a > 0.0 {
        (schedule.epsilon_a.norm() / params.gamma_a).powi(2)
    } else {
        0.0
    };
    check_cutoffs(fock, na0.max(na_drive), nb0)?;
    let psi0 = initial.state_vector(fock)?;
    let times = fock.sample_times(t_final);
    let acc = accumulate_ensemble::<Error, _>(fock.n_traj, times.len(), |id| {
        mcwf_trajectory(&psi0, &ops, schedule, t_final, id).map(|tr| Some(tr.records))
    })?;
    Ok(acc.finish(times))
}

/// `|z|` above which a single time point is reported as a failure.
pub const FAILURE_Z: f64 = 5.0;
/// Largest mean `|z|` for which two methods are judged to agree.
pub const PASS_MEAN_Z: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub t: f64,
    pub observable: Observable,
    pub pp_mean: f64,
    pub pp_stderr: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub max_abs_z: f64,
    pub mean_abs_z: f64,
    /// `(t, observable)` pairs with `|z| > FAILURE_Z`.
    pub failures: Vec<(f64, Observable)>,
    pub passed: bool,
}

fn interpolate(times: &[f64], values: &[(f64, f64)], t: f64) -> (f64, f64) {
    let k = times.partition_point(|&x| x <= t);
    if k == 0 {
        return values[0];
    }
    if k == times.len() {
        return values[k - 1];
    }
    let (t0, t1) = (times[k - 1], times[k]);
    let w = (t - t0) / (t1 - t0);
    let (a, b) = (values[k - 1], values[k]);
    (a.0 + w * (b.0 - a.0), a.1 + w * (b.1 - a.1))
}

fn z_score(d: f64, se: f64, scale: f64) -> f64 {
    if se > 0.0 {
        d / se
    } else if d.abs() <= 1e-12 * (1.0 + scale) {
        0.0
    } else {
        f64::INFINITY.copysign(d)
    }
}

/// Compares populations on the trajectory grid of `mc`, interpolating `pp`
/// linearly where the grids differ.
pub fn compare_methods(pp: &MomentSeries, mc: &MomentSeries) -> Result<ComparisonReport> {
    compare_observables(pp, mc, &[Observable::Na, Observable::Nb])
}

pub fn compare_observables(pp: &MomentSeries, mc: &MomentSeries, which: &[Observable]) -> Result<ComparisonReport> {
    let (Some(&p0), Some(&p1)) = (pp.times.first(), pp.times.last()) else {
        return Err(Error::DisjointTimeRanges);
    };
    let slack = 1e-9 * p1.abs().max(1.0);
    let common: Vec<usize> = (0..mc.times.len())
        .filter(|&k| mc.times[k] >= p0 - slack && mc.times[k] <= p1 + slack)
        .collect();
    if common.is_empty() {
        return Err(Error::DisjointTimeRanges);
    }
    let mut rows = Vec::with_capacity(common.len() * which.len());
    for &obs in which {
        let series = pp.real_series(obs);
        for &k in &common {
            let t = mc.times[k];
            let (pm, pe) = interpolate(&pp.times, &series, t);
            let (mm, me) = mc.snapshots[k].real(obs);
            let z = z_score(pm - mm, pe.hypot(me), pm.abs().max(mm.abs()));
            rows.push(ComparisonRow {
                t,
                observable: obs,
                pp_mean: pm,
                pp_stderr: pe,
                mc_mean: mm,
                mc_stderr: me,
                z,
            });
        }
    }
    let max_abs_z = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    let mean_abs_z = rows.iter().map(|r| r.z.abs()).sum::<f64>() / rows.len() as f64;
    let failures = rows
        .iter()
        .filter(|r| r.z.abs() > FAILURE_Z)
        .map(|r| (r.t, r.observable))
        .collect();
    Ok(ComparisonReport {
        rows,
        max_abs_z,
        mean_abs_z,
        failures,
        passed: mean_abs_z < PASS_MEAN_Z,
    })
}
