use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{positive_quartic_roots, SemiclassicalState, SystemParams};
use crate::error::Result;
use crate::spectrum::{drift_matrix, eigenvalues};

/// Real-part threshold below which an eigenvalue of the linearization counts
/// as non-decaying.
pub const STABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Trivial,
    Lower,
    Upper,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::Trivial => "trivial",
            Branch::Lower => "lower",
            Branch::Upper => "upper",
        })
    }
}

/// A mean-field fixed point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateSolution {
    pub alpha_s: Complex64,
    pub beta_s: Complex64,
    pub branch: Branch,
    pub stable: bool,
    /// Set when the least-damped eigenvalue sits within the stability
    /// tolerance of zero; such states are reported unstable.
    pub marginal: bool,
    /// Which of the three cube-root phases `alpha_s` carries.
    pub phase_index: u8,
}

impl SteadyStateSolution {
    pub fn state(&self) -> SemiclassicalState {
        SemiclassicalState::new(self.alpha_s, self.beta_s)
    }

    pub(crate) fn unclassified(alpha_s: Complex64, beta_s: Complex64, branch: Branch, phase_index: u8) -> Self {
        Self {
            alpha_s,
            beta_s,
            branch,
            stable: false,
            marginal: false,
            phase_index,
        }
    }

    pub(crate) fn with_stability(mut self, params: &SystemParams) -> Result<Self> {
        let margin = stability_margin(&self, params)?;
        self.stable = margin > STABILITY_TOLERANCE;
        self.marginal = margin.abs() <= STABILITY_TOLERANCE;
        Ok(self)
    }
}

/// Smallest real part among the eigenvalues of the linearized drift matrix.
pub fn stability_margin(solution: &SteadyStateSolution, params: &SystemParams) -> Result<f64> {
    let a = drift_matrix(solution, params);
    Ok(eigenvalues(&a)?.iter().map(|l| l.re).fold(f64::INFINITY, f64::min))
}

/// `true` iff every eigenvalue of the linearized drift matrix has real part
/// above [`STABILITY_TOLERANCE`].
pub fn classify_stability(solution: &SteadyStateSolution, params: &SystemParams) -> Result<bool> {
    Ok(stability_margin(solution, params)? > STABILITY_TOLERANCE)
}

/// `beta_s = (eps_b - kappa alpha_s^3 / 3) / gamma_b`.
pub(crate) fn beta_for(alpha: Complex64, params: &SystemParams) -> Complex64 {
    (params.epsilon_b - params.kappa / 3.0 * alpha * alpha * alpha) / params.gamma_b
}

/// Cube-root phase `theta_k = (arg eps_b + 2 pi k) / 3`.
pub(crate) fn phase(params: &SystemParams, k: u8) -> f64 {
    (params.epsilon_b.arg() + 2.0 * PI * f64::from(k)) / 3.0
}

/// Closed-form fixed points without an injected signal: the trivial state
/// and, above threshold, the upper and lower magnitudes at each of the three
/// phases (in that order), each labelled with its stability.
pub fn steady_state_branches(params: &SystemParams) -> Result<Vec<SteadyStateSolution>> {
    params.validate()?;
    let mut out = Vec::with_capacity(7);
    let trivial = SteadyStateSolution::unclassified(
        Complex64::new(0.0, 0.0),
        params.epsilon_b / params.gamma_b,
        Branch::Trivial,
        0,
    );
    out.push(trivial.with_stability(params)?);

    if let Some(roots) = positive_quartic_roots(params) {
        for (magnitude, branch) in [(roots.upper, Branch::Upper), (roots.lower, Branch::Lower)] {
            for k in 0..3u8 {
                let alpha = Complex64::from_polar(magnitude, phase(params, k));
                let sol = SteadyStateSolution::unclassified(alpha, beta_for(alpha, params), branch, k);
                out.push(sol.with_stability(params)?);
            }
        }
    }
    Ok(out)
}
