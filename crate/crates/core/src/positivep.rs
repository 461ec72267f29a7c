//! Truncated positive-P stochastic simulation.
//!
//! Each trajectory integrates the Itô equations
//!
//! ```text
//! d alpha  = (eps_a  - g_a alpha  + k alpha+^2 beta ) dt + sqrt(2 k alpha+ beta) dW1
//! d alpha+ = (eps_a* - g_a alpha+ + k alpha^2 beta+ ) dt + sqrt(2 k alpha beta+) dW2
//! d beta   = (eps_b  - g_b beta   - k/3 alpha^3  ) dt
//! d beta+  = (eps_b* - g_b beta+  - k/3 alpha+^3 ) dt
//! ```
//!
//! with independent real Wiener increments, using a fixed-step stochastic
//! Heun scheme. The noise on each amplitude does not depend on that
//! amplitude, so the Itô and Stratonovich forms coincide and Heun converges
//! to the Itô solution.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{positive_quartic_roots, DriveSchedule, SystemParams};
use crate::moments::{
    accumulate_ensemble, sample_step_indices, MomentSeries, MomentSnapshot, Observable, ObservableRecord, N_OBSERVABLES,
};

/// The four independent positive-P amplitudes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpacePoint {
    pub alpha: Complex64,
    pub alpha_plus: Complex64,
    pub beta: Complex64,
    pub beta_plus: Complex64,
}

impl PhaseSpacePoint {
    pub fn new(alpha: Complex64, alpha_plus: Complex64, beta: Complex64, beta_plus: Complex64) -> Self {
        Self {
            alpha,
            alpha_plus,
            beta,
            beta_plus,
        }
    }

    /// Point of a coherent state `|alpha> |beta>` (conjugate-symmetric slice).
    pub fn coherent(alpha: Complex64, beta: Complex64) -> Self {
        Self::new(alpha, alpha.conj(), beta, beta.conj())
    }

    pub fn vacuum() -> Self {
        Self::default()
    }

    #[inline]
    pub fn components(&self) -> [Complex64; 4] {
        [self.alpha, self.alpha_plus, self.beta, self.beta_plus]
    }

    #[inline]
    fn max_norm_sqr(&self) -> f64 {
        self.components().iter().map(|c| c.norm_sqr()).fold(0.0, f64::max)
    }

    #[inline]
    fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.is_finite())
    }

    #[inline]
    fn axpy(&self, h: f64, d: &PhaseSpacePoint) -> PhaseSpacePoint {
        PhaseSpacePoint {
            alpha: self.alpha + d.alpha * h,
            alpha_plus: self.alpha_plus + d.alpha_plus * h,
            beta: self.beta + d.beta * h,
            beta_plus: self.beta_plus + d.beta_plus * h,
        }
    }
}

/// Deterministic part of the positive-P equations (per unit time).
#[inline]
pub fn pp_drift(p: &PhaseSpacePoint, params: &SystemParams, epsilon_a: Complex64) -> PhaseSpacePoint {
    let k = params.kappa;
    let (a, ap, b, bp) = (p.alpha, p.alpha_plus, p.beta, p.beta_plus);
    PhaseSpacePoint {
        alpha: epsilon_a - params.gamma_a * a + k * ap * ap * b,
        alpha_plus: epsilon_a.conj() - params.gamma_a * ap + k * a * a * bp,
        beta: params.epsilon_b - params.gamma_b * b - k / 3.0 * a * a * a,
        beta_plus: params.epsilon_b.conj() - params.gamma_b * bp - k / 3.0 * ap * ap * ap,
    }
}

/// Noise amplitudes `(sqrt(2 k alpha+ beta), sqrt(2 k alpha beta+))`, principal branch.
#[inline]
pub fn pp_noise_amplitudes(p: &PhaseSpacePoint, params: &SystemParams) -> (Complex64, Complex64) {
    let two_k = 2.0 * params.kappa;
    (
        principal_sqrt(two_k * p.alpha_plus * p.beta),
        principal_sqrt(two_k * p.alpha * p.beta_plus),
    )
}

/// Principal square root without the polar round trip; the sign of a zero
/// imaginary part selects the side of the branch cut, as in `Complex::sqrt`.
#[inline]
pub fn principal_sqrt(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    if x == 0.0 && y == 0.0 {
        return Complex64::new(0.0, y);
    }
    let r = x.hypot(y);
    let t = (0.5 * (r + x.abs())).sqrt();
    if x >= 0.0 {
        Complex64::new(t, y / (2.0 * t))
    } else {
        Complex64::new(y.abs() / (2.0 * t), t.copysign(y))
    }
}

/// Starting distribution of an ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialDistribution {
    /// Every trajectory starts at the same point.
    Delta(PhaseSpacePoint),
}

impl InitialDistribution {
    pub fn sample<R: Rng>(&self, _rng: &mut R) -> PhaseSpacePoint {
        match self {
            InitialDistribution::Delta(p) => *p,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_traj: u64,
    pub t_final: f64,
    pub dt: f64,
    /// Steps between recorded samples.
    pub sample_stride: usize,
    pub master_seed: u64,
    /// Magnitude beyond which a trajectory counts as diverged; `None` picks
    /// [`default_divergence_bound`].
    pub divergence_bound: Option<f64>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_traj: 100_000,
            t_final: 30.0,
            dt: 1e-3,
            sample_stride: 100,
            master_seed: 0,
            divergence_bound: None,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_traj < 1 {
            return Err(Error::InvalidParameter("n_traj must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidParameter("sample_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round().max(1.0) as usize
    }

    /// Step indices at which samples are recorded: every `sample_stride`
    /// steps, always including the first and last.
    pub fn sample_steps(&self) -> Vec<usize> {
        sample_step_indices(self.n_steps(), self.sample_stride)
    }

    pub fn sample_times(&self) -> Vec<f64> {
        self.sample_steps().iter().map(|&k| k as f64 * self.dt).collect()
    }
}

/// `10^3` times the upper-branch magnitude above threshold, `10^6` otherwise.
pub fn default_divergence_bound(params: &SystemParams) -> f64 {
    match positive_quartic_roots(params) {
        Some(r) => 1e3 * r.upper.max(1.0),
        None => 1e6,
    }
}

/// Random stream for one trajectory, fixed by `(master_seed, stream_id)`.
pub fn trajectory_rng(master_seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}

/// Sampled path of a single trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPath {
    pub times: Vec<f64>,
    pub points: Vec<PhaseSpacePoint>,
    /// Time at which the divergence bound was crossed; the path is
    /// truncated there.
    pub diverged_at: Option<f64>,
}

fn gaussian_increments(rng: &mut ChaCha8Rng, dt: f64) -> impl FnMut() -> (f64, f64) + '_ {
    let s = dt.sqrt();
    move || {
        let dw1: f64 = rng.sample::<f64, _>(StandardNormal);
        let dw2: f64 = rng.sample::<f64, _>(StandardNormal);
        (dw1 * s, dw2 * s)
    }
}

/// Runs one trajectory, calling `on_sample(sample_index, point)` at each
/// recorded step. Returns the divergence time, if any.
fn evolve(
    initial: PhaseSpacePoint,
    params: &SystemParams,
    schedule: &DriveSchedule,
    config: &EnsembleConfig,
    mut noise: impl FnMut() -> (f64, f64),
    bound: f64,
    mut on_sample: impl FnMut(usize, &PhaseSpacePoint),
) -> Option<f64> {
    let dt = config.dt;
    let steps = config.sample_steps();
    let n = config.n_steps();
    let mut y = initial;
    let mut next_sample = 0;
    if steps[0] == 0 {
        on_sample(0, &y);
        next_sample = 1;
    }
    for k in 0..n {
        let t = k as f64 * dt;
        let eps_a = schedule.epsilon_a_at(t);
        let (dw1, dw2) = noise();

        let d0 = pp_drift(&y, params, eps_a);
        let (g1, g2) = pp_noise_amplitudes(&y, params);
        let mut pred = y.axpy(dt, &d0);
        pred.alpha += g1 * dw1;
        pred.alpha_plus += g2 * dw2;

        let d1 = pp_drift(&pred, params, eps_a);
        let (mut h1, mut h2) = pp_noise_amplitudes(&pred, params);
        // Keep the corrector on the same square-root branch as the predictor.
        if (h1 * g1.conj()).re < 0.0 {
            h1 = -h1;
        }
        if (h2 * g2.conj()).re < 0.0 {
            h2 = -h2;
        }
        let half = 0.5 * dt;
        y = PhaseSpacePoint {
            alpha: y.alpha + (d0.alpha + d1.alpha) * half + (g1 + h1) * (0.5 * dw1),
            alpha_plus: y.alpha_plus + (d0.alpha_plus + d1.alpha_plus) * half + (g2 + h2) * (0.5 * dw2),
            beta: y.beta + (d0.beta + d1.beta) * half,
            beta_plus: y.beta_plus + (d0.beta_plus + d1.beta_plus) * half,
        };

        if !y.is_finite() || y.max_norm_sqr() > bound * bound {
            return Some((k + 1) as f64 * dt);
        }
        if next_sample < steps.len() && steps[next_sample] == k + 1 {
            on_sample(next_sample, &y);
            next_sample += 1;
        }
    }
    None
}

/// Integrates one trajectory with the random stream `(master_seed, stream_id)`.
pub fn integrate_trajectory(
    initial: &InitialDistribution,
    params: &SystemParams,
    schedule: &DriveSchedule,
    config: &EnsembleConfig,
    stream_id: u64,
) -> Result<TrajectoryPath> {
    config.validate()?;
    if stream_id >= config.n_traj {
        return Err(Error::InvalidParameter(format!(
            "stream_id {stream_id} out of range for {} trajectories",
            config.n_traj
        )));
    }
    let mut rng = trajectory_rng(config.master_seed, stream_id);
    let start = initial.sample(&mut rng);
    let bound = config
        .divergence_bound
        .unwrap_or_else(|| default_divergence_bound(params));
    let all_times = config.sample_times();
    let mut points = Vec::with_capacity(all_times.len());
    let noise = gaussian_increments(&mut rng, config.dt);
    let diverged_at = evolve(start, params, schedule, config, noise, bound, |_, p| points.push(*p));
    let times = all_times[..points.len()].to_vec();
    Ok(TrajectoryPath {
        times,
        points,
        diverged_at,
    })
}

/// Observables of one phase-space sample.
pub fn observables(p: &PhaseSpacePoint) -> ObservableRecord {
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::i();
    let (a, ap, b, bp) = (p.alpha, p.alpha_plus, p.beta, p.beta_plus);
    let mut r = [Complex64::new(0.0, 0.0); N_OBSERVABLES];
    r[Observable::Na as usize] = ap * a;
    r[Observable::Nb as usize] = bp * b;
    r[Observable::Alpha as usize] = a;
    r[Observable::AlphaPlus as usize] = ap;
    r[Observable::Beta as usize] = b;
    r[Observable::BetaPlus as usize] = bp;
    r[Observable::Xa as usize] = a + ap;
    r[Observable::Ya as usize] = i * (ap - a);
    r[Observable::Xa2 as usize] = one + 2.0 * a * ap + a * a + ap * ap;
    r[Observable::Ya2 as usize] = one + 2.0 * a * ap - a * a - ap * ap;
    r[Observable::Xb as usize] = b + bp;
    r[Observable::Yb as usize] = i * (bp - b);
    r[Observable::Xb2 as usize] = one + 2.0 * b * bp + b * b + bp * bp;
    r[Observable::Yb2 as usize] = one + 2.0 * b * bp - b * b - bp * bp;
    r[Observable::AbsAlpha as usize] = Complex64::new((a * ap).norm().sqrt(), 0.0);
    r
}

/// Runs `config.n_traj` trajectories and returns ensemble moments with
/// standard errors on the sample grid. Runs with more than 1% diverged
/// trajectories are returned with `valid = false`.
pub fn run_ensemble(
    initial: &InitialDistribution,
    params: &SystemParams,
    schedule: &DriveSchedule,
    config: &EnsembleConfig,
) -> Result<MomentSeries> {
    config.validate()?;
    schedule.validate()?;
    let bound = config
        .divergence_bound
        .unwrap_or_else(|| default_divergence_bound(params));
    let times = config.sample_times();
    let n_samples = times.len();
    let acc = accumulate_ensemble::<Error, _>(config.n_traj, n_samples, |id| {
        let mut rng = trajectory_rng(config.master_seed, id);
        let start = initial.sample(&mut rng);
        let mut records = vec![[Complex64::new(0.0, 0.0); N_OBSERVABLES]; n_samples];
        let noise = gaussian_increments(&mut rng, config.dt);
        let diverged = evolve(start, params, schedule, config, noise, bound, |i, p| {
            records[i] = observables(p)
        });
        Ok(diverged.is_none().then_some(records))
    })?;
    Ok(acc.finish(times))
}

/// Pathwise comparison of populations integrated at `dt` and `dt / 2`
/// along the same Brownian paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepHalvingAudit {
    pub times: Vec<f64>,
    /// Mean and standard error of `n_a(dt) - n_a(dt/2)` at each sample time.
    pub na_difference: Vec<(f64, f64)>,
    pub nb_difference: Vec<(f64, f64)>,
    /// Largest `|mean difference| / max(1, |population|)` over both modes and all times.
    pub max_relative_difference: f64,
    /// Trajectories for which neither resolution diverged.
    pub n_used: u64,
}

/// Runs every trajectory twice, at `config.dt` and at half that step, with
/// the coarse increments formed by summing pairs of fine ones.
pub fn step_halving_audit(
    initial: &InitialDistribution,
    params: &SystemParams,
    schedule: &DriveSchedule,
    config: &EnsembleConfig,
) -> Result<StepHalvingAudit> {
    config.validate()?;
    schedule.validate()?;
    let fine = EnsembleConfig {
        dt: 0.5 * config.dt,
        sample_stride: 2 * config.sample_stride,
        ..*config
    };
    let bound = config
        .divergence_bound
        .unwrap_or_else(|| default_divergence_bound(params));
    let times = config.sample_times();
    let n = times.len();
    let zero = [Complex64::new(0.0, 0.0); N_OBSERVABLES];

    // Records 0..n hold coarse-minus-fine observables, n..2n the fine ones.
    let acc = accumulate_ensemble::<Error, _>(config.n_traj, 2 * n, |id| {
        let mut rng = trajectory_rng(config.master_seed, id);
        let start = initial.sample(&mut rng);
        let mut increments = Vec::with_capacity(fine.n_steps());
        let mut draw = gaussian_increments(&mut rng, fine.dt);
        for _ in 0..fine.n_steps() {
            increments.push(draw());
        }
        let mut fine_rec = vec![zero; n];
        let mut it = increments.iter().copied();
        let fine_div = evolve(
            start,
            params,
            schedule,
            &fine,
            || it.next().unwrap(),
            bound,
            |i, p| fine_rec[i] = observables(p),
        );
        let mut coarse_rec = vec![zero; n];
        let mut pairs = increments.chunks(2).map(|c| {
            let (a, b) = (c[0], c.get(1).copied().unwrap_or((0.0, 0.0)));
            (a.0 + b.0, a.1 + b.1)
        });
        let coarse_div = evolve(
            start,
            params,
            schedule,
            config,
            || pairs.next().unwrap(),
            bound,
            |i, p| coarse_rec[i] = observables(p),
        );
        if fine_div.is_some() || coarse_div.is_some() {
            return Ok(None);
        }
        let mut out: Vec<ObservableRecord> = coarse_rec
            .iter()
            .zip(&fine_rec)
            .map(|(c, f)| std::array::from_fn(|k| c[k] - f[k]))
            .collect();
        out.extend(fine_rec);
        Ok(Some(out))
    })?;
    let series = acc.finish(vec![0.0; 2 * n]);
    let pick = |obs: Observable| -> Vec<(f64, f64)> { series.snapshots[..n].iter().map(|s| s.real(obs)).collect() };
    let (na_difference, nb_difference) = (pick(Observable::Na), pick(Observable::Nb));
    let mut max_rel: f64 = 0.0;
    for k in 0..n {
        let reference = &series.snapshots[n + k];
        for (diff, obs) in [(&na_difference, Observable::Na), (&nb_difference, Observable::Nb)] {
            let scale = reference.real(obs).0.abs().max(1.0);
            max_rel = max_rel.max(diff[k].0.abs() / scale);
        }
    }
    Ok(StepHalvingAudit {
        times,
        na_difference,
        nb_difference,
        max_relative_difference: max_rel,
        n_used: series.n_traj - series.n_diverged,
    })
}

/// Quadrature mean and spreads of one mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeQuadratures {
    pub mean_x: f64,
    pub mean_y: f64,
    pub delta_x: f64,
    pub delta_y: f64,
    /// `delta_x / |mean_x|`; infinite when the mean vanishes and the spread does not.
    pub ratio_x: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureStats {
    pub a: ModeQuadratures,
    pub b: ModeQuadratures,
}

/// Number of standard errors a variance estimate may fall below zero before
/// it is treated as a failure rather than sampling noise.
const VARIANCE_SIGMA: f64 = 5.0;

fn mode_quadratures(
    s: &MomentSnapshot,
    x: Observable,
    y: Observable,
    x2: Observable,
    y2: Observable,
) -> Result<ModeQuadratures> {
    let spread = |m: Observable, m2: Observable, name: &str| -> Result<(f64, f64)> {
        let (mean, se) = s.real(m);
        let (second, se2) = s.real(m2);
        let var = second - mean * mean;
        let tol = VARIANCE_SIGMA * (se2 + 2.0 * mean.abs() * se) + 1e-9 * second.abs().max(1.0);
        if var < -tol {
            return Err(Error::Statistics(format!(
                "negative variance {var:e} for {name} beyond sampling tolerance {tol:e}"
            )));
        }
        Ok((mean, var.max(0.0).sqrt()))
    };
    let (mean_x, delta_x) = spread(x, x2, "X")?;
    let (mean_y, delta_y) = spread(y, y2, "Y")?;
    let ratio_x = if mean_x != 0.0 {
        delta_x / mean_x.abs()
    } else if delta_x > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(ModeQuadratures {
        mean_x,
        mean_y,
        delta_x,
        delta_y,
        ratio_x,
    })
}

/// Quadrature means and standard deviations of both modes from one
/// ensemble snapshot, using normally ordered moments.
pub fn quadrature_statistics(snapshot: &MomentSnapshot) -> Result<QuadratureStats> {
    use Observable::*;
    Ok(QuadratureStats {
        a: mode_quadratures(snapshot, Xa, Ya, Xa2, Ya2)?,
        b: mode_quadratures(snapshot, Xb, Yb, Xb2, Yb2)?,
    })
}

/// Default cut on `delta_x / |<X>|` marking the transition region.
pub const DEFAULT_RATIO_THRESHOLD: f64 = 0.5;

/// Whether fluctuations are large enough in either mode that linearized
/// fluctuation analysis does not apply.
pub fn transition_region_flag(stats: &QuadratureStats, ratio_threshold: f64) -> bool {
    stats.a.ratio_x > ratio_threshold || stats.b.ratio_x > ratio_threshold
}
