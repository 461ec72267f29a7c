//! Mean-field model of the driven, damped two-mode cavity.
//!
//! All rates and amplitudes are expressed in units of the low-mode loss rate
//! `gamma_a`, and times in units of `1 / gamma_a`.

mod newton;
mod ode;
mod quartic;
mod steady;

pub use newton::{find_fixed_points, numeric_steady_state, NewtonControl};
pub use ode::{integrate_semiclassical, OdeControl, SemiclassicalTrajectory};
pub use quartic::{positive_quartic_roots, quartic_residual, QuarticRoots};
pub use steady::{classify_stability, stability_margin, steady_state_branches, Branch, SteadyStateSolution};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rates and pump amplitude of the cavity model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Effective nonlinearity.
    pub kappa: f64,
    /// Low-mode amplitude loss rate.
    pub gamma_a: f64,
    /// High-mode amplitude loss rate.
    pub gamma_b: f64,
    /// Pump amplitude on the high-energy mode.
    pub epsilon_b: Complex64,
}

impl SystemParams {
    pub fn new(kappa: f64, gamma_a: f64, gamma_b: f64, epsilon_b: Complex64) -> Result<Self> {
        let params = Self {
            kappa,
            gamma_a,
            gamma_b,
            epsilon_b,
        };
        params.validate()?;
        Ok(params)
    }

    /// Real pump amplitude convenience constructor.
    pub fn real(kappa: f64, gamma_a: f64, gamma_b: f64, epsilon_b: f64) -> Result<Self> {
        Self::new(kappa, gamma_a, gamma_b, Complex64::new(epsilon_b, 0.0))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        if !(self.gamma_a > 0.0 && self.gamma_a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma_a must be positive, got {}",
                self.gamma_a
            )));
        }
        if !(self.gamma_b > 0.0 && self.gamma_b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma_b must be positive, got {}",
                self.gamma_b
            )));
        }
        if !(self.epsilon_b.re.is_finite() && self.epsilon_b.im.is_finite()) {
            return Err(Error::InvalidParameter("epsilon_b must be finite".into()));
        }
        Ok(())
    }

    pub fn with_epsilon_b(self, epsilon_b: Complex64) -> Self {
        Self { epsilon_b, ..self }
    }

    /// Whether the pump exceeds the mean-field oscillation threshold.
    pub fn above_threshold(&self) -> bool {
        pump_threshold(self).is_ok_and(|th| self.epsilon_b.norm() >= th)
    }
}

/// Injected signal on the low-energy mode, optionally switched off at `t_off`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DriveSchedule {
    pub epsilon_a: Complex64,
    /// Switch-off time; `None` keeps the signal on forever.
    pub t_off: Option<f64>,
}

impl DriveSchedule {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn constant(epsilon_a: Complex64) -> Self {
        Self { epsilon_a, t_off: None }
    }

    pub fn switched_off_at(epsilon_a: Complex64, t_off: f64) -> Self {
        Self {
            epsilon_a,
            t_off: Some(t_off),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.t_off {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter(format!("t_off must be positive, got {t}")));
            }
        }
        Ok(())
    }

    /// Injected amplitude in effect at time `t`.
    #[inline]
    pub fn epsilon_a_at(&self, t: f64) -> Complex64 {
        match self.t_off {
            Some(off) if t >= off => Complex64::new(0.0, 0.0),
            _ => self.epsilon_a,
        }
    }
}

/// Mean-field amplitudes of both modes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalState {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl SemiclassicalState {
    pub fn new(alpha: Complex64, beta: Complex64) -> Self {
        Self { alpha, beta }
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.is_finite() && self.beta.is_finite()
    }

    pub fn norm(&self) -> f64 {
        (self.alpha.norm_sqr() + self.beta.norm_sqr()).sqrt()
    }

    pub(crate) fn to_real(self) -> [f64; 4] {
        [self.alpha.re, self.alpha.im, self.beta.re, self.beta.im]
    }

    pub(crate) fn from_real(v: &[f64; 4]) -> Self {
        Self {
            alpha: Complex64::new(v[0], v[1]),
            beta: Complex64::new(v[2], v[3]),
        }
    }
}

/// Time derivative `(d alpha/dt, d beta/dt)` of the mean-field equations
/// with an injected signal `epsilon_a` on the low-energy mode.
#[inline]
pub fn semiclassical_drift(
    state: &SemiclassicalState,
    params: &SystemParams,
    epsilon_a: Complex64,
) -> SemiclassicalState {
    let a = state.alpha;
    let b = state.beta;
    let ac = a.conj();
    SemiclassicalState {
        alpha: epsilon_a + params.kappa * ac * ac * b - params.gamma_a * a,
        beta: params.epsilon_b - params.gamma_b * b - params.kappa / 3.0 * a * a * a,
    }
}

/// Mean-field oscillation threshold `4 (gamma_a gamma_b)^{3/4} / (3 sqrt(kappa))`.
pub fn pump_threshold(params: &SystemParams) -> Result<f64> {
    if !(params.kappa > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold requires kappa > 0, got {}",
            params.kappa
        )));
    }
    Ok(4.0 * (params.gamma_a * params.gamma_b).powf(0.75) / (3.0 * params.kappa.sqrt()))
}
