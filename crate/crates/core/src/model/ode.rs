//! Adaptive Dormand–Prince 5(4) integration of the mean-field equations.

use num_complex::Complex64;

use super::{semiclassical_drift, DriveSchedule, SemiclassicalState, SystemParams};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct OdeControl {
    pub rtol: f64,
    pub atol: f64,
    /// Spacing of the recorded time grid.
    pub sample_dt: f64,
    /// Step size below which integration is abandoned.
    pub h_min: f64,
    pub max_steps: usize,
    /// Stop once the state has been steady for one time unit.
    pub stop_when_steady: bool,
}

impl Default for OdeControl {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            sample_dt: 0.1,
            h_min: 1e-12,
            max_steps: 50_000_000,
            stop_when_steady: false,
        }
    }
}

/// Relative drift norm below which the state counts as steady.
const STEADY_RTOL: f64 = 1e-8;
/// How long the steady condition must persist.
const STEADY_HOLD: f64 = 1.0;

#[derive(Clone, Debug, Default)]
pub struct SemiclassicalTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<SemiclassicalState>,
    /// Time from which the drift stayed below the steady threshold for at
    /// least one time unit.
    pub steady_at: Option<f64>,
}

impl SemiclassicalTrajectory {
    pub fn last(&self) -> Option<&SemiclassicalState> {
        self.states.last()
    }
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

type Vec4 = [f64; 4];

fn rhs(y: &Vec4, params: &SystemParams, eps_a: Complex64) -> Vec4 {
    semiclassical_drift(&SemiclassicalState::from_real(y), params, eps_a).to_real()
}

fn norm4(v: &Vec4) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct Stepper<'a> {
    params: &'a SystemParams,
    ctl: &'a OdeControl,
    h: f64,
    steps: usize,
}

impl Stepper<'_> {
    /// Attempts one step of size at most `h_max`; returns the accepted step
    /// length and new state.
    fn step(&mut self, t: f64, y: &Vec4, h_max: f64, eps_a: Complex64) -> Result<(f64, Vec4)> {
        let fail = |reason: String| Error::IntegrationFailure {
            t,
            last: SemiclassicalState::from_real(y),
            reason,
        };
        loop {
            self.steps += 1;
            if self.steps > self.ctl.max_steps {
                return Err(fail("maximum step count exceeded".into()));
            }
            let h = self.h.min(h_max);
            let mut k = [[0.0; 4]; 7];
            k[0] = rhs(y, self.params, eps_a);
            for s in 1..7 {
                let mut ys = *y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        for i in 0..4 {
                            ys[i] += h * a * kj[i];
                        }
                    }
                }
                k[s] = rhs(&ys, self.params, eps_a);
            }
            // FSAL: the seventh stage is evaluated at the fifth-order solution.
            let mut y_new = *y;
            for (s, ks) in k.iter().enumerate().take(6) {
                for i in 0..4 {
                    y_new[i] += h * A[6][s] * ks[i];
                }
            }
            let mut err = 0.0;
            for i in 0..4 {
                let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * h;
                let sc = self.ctl.atol + self.ctl.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / sc).powi(2);
            }
            let err = (err / 4.0).sqrt();
            if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                self.h = h * 0.2;
                if self.h < self.ctl.h_min {
                    return Err(fail("non-finite state".into()));
                }
                continue;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                // Do not let a short landing step shrink the running step size.
                if h == self.h || factor > 1.0 {
                    self.h = h * factor;
                }
                return Ok((h, y_new));
            }
            self.h = h * factor;
            if self.h < self.ctl.h_min {
                return Err(fail(format!("step size underflow (h = {:e})", self.h)));
            }
        }
    }
}

/// Integrates the mean-field equations from `initial` at `t = 0` to `t_final`,
/// recording the state every `ctl.sample_dt`. The injected signal is switched
/// off exactly at `schedule.t_off`, which is always a step boundary.
pub fn integrate_semiclassical(
    params: &SystemParams,
    schedule: &DriveSchedule,
    initial: SemiclassicalState,
    t_final: f64,
    ctl: &OdeControl,
) -> Result<SemiclassicalTrajectory> {
    if !(t_final > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "t_final must be positive, got {t_final}"
        )));
    }
    if !(ctl.sample_dt > 0.0) {
        return Err(Error::InvalidParameter("sample_dt must be positive".into()));
    }
    schedule.validate()?;

    let n_samples = (t_final / ctl.sample_dt).round().max(1.0) as usize;
    let sample_time = |k: usize| {
        if k == n_samples {
            t_final
        } else {
            k as f64 * ctl.sample_dt
        }
    };

    let mut out = SemiclassicalTrajectory {
        times: vec![0.0],
        states: vec![initial],
        steady_at: None,
    };
    let mut stepper = Stepper {
        params,
        ctl,
        h: (ctl.sample_dt * 0.1).max(ctl.h_min * 10.0),
        steps: 0,
    };
    let mut y = initial.to_real();
    let mut t = 0.0;
    let mut steady_since: Option<f64> = None;

    for k in 1..=n_samples {
        let t_sample = sample_time(k);
        while t < t_sample {
            let eps_a = schedule.epsilon_a_at(t);
            let mut target = t_sample;
            if let Some(off) = schedule.t_off {
                if t < off && off < target {
                    target = off;
                }
            }
            let (h, y_new) = stepper.step(t, &y, target - t, eps_a)?;
            y = y_new;
            t = if (target - (t + h)).abs() <= 1e-12 * target.abs().max(1.0) {
                target
            } else {
                t + h
            };

            let drift = rhs(&y, params, schedule.epsilon_a_at(t));
            if norm4(&drift) <= STEADY_RTOL * norm4(&y) {
                let since = *steady_since.get_or_insert(t);
                if t - since >= STEADY_HOLD && out.steady_at.is_none() {
                    out.steady_at = Some(since);
                    if ctl.stop_when_steady {
                        out.times.push(t);
                        out.states.push(SemiclassicalState::from_real(&y));
                        return Ok(out);
                    }
                }
            } else {
                steady_since = None;
            }
        }
        out.times.push(t_sample);
        out.states.push(SemiclassicalState::from_real(&y));
    }
    Ok(out)
}
