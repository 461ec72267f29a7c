//! Damped Newton iteration on the mean-field right-hand side, for fixed
//! points with a constant injected signal where no closed form exists.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

use super::steady::{beta_for, Branch, SteadyStateSolution};
use super::{positive_quartic_roots, semiclassical_drift, steady_state_branches, SemiclassicalState, SystemParams};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct NewtonControl {
    /// Absolute residual norm accepted as converged.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NewtonControl {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 200,
        }
    }
}

fn residual(y: &Vector4<f64>, params: &SystemParams, eps_a: Complex64) -> Vector4<f64> {
    let s = SemiclassicalState::from_real(&[y[0], y[1], y[2], y[3]]);
    Vector4::from(semiclassical_drift(&s, params, eps_a).to_real())
}

/// Real 4x4 Jacobian from the Wirtinger derivatives of the drift.
fn jacobian(y: &Vector4<f64>, params: &SystemParams) -> Matrix4<f64> {
    let a = Complex64::new(y[0], y[1]);
    let b = Complex64::new(y[2], y[3]);
    let ac = a.conj();
    let k = params.kappa;
    let zero = Complex64::new(0.0, 0.0);
    // rows: output (dalpha, dbeta); entries: (d/dz, d/dz*) for z in (alpha, beta)
    let d = [
        [
            (Complex64::new(-params.gamma_a, 0.0), 2.0 * k * ac * b),
            (k * ac * ac, zero),
        ],
        [(-k * a * a, zero), (Complex64::new(-params.gamma_b, 0.0), zero)],
    ];
    let mut j = Matrix4::zeros();
    for (out, row) in d.iter().enumerate() {
        for (inp, (dz, dzc)) in row.iter().enumerate() {
            let dx = dz + dzc;
            let dy = Complex64::i() * (dz - dzc);
            j[(2 * out, 2 * inp)] = dx.re;
            j[(2 * out + 1, 2 * inp)] = dx.im;
            j[(2 * out, 2 * inp + 1)] = dy.re;
            j[(2 * out + 1, 2 * inp + 1)] = dy.im;
        }
    }
    j
}

fn newton(
    params: &SystemParams,
    eps_a: Complex64,
    guess: SemiclassicalState,
    ctl: &NewtonControl,
) -> Result<SemiclassicalState> {
    if !guess.is_finite() {
        return Err(Error::InvalidParameter("steady-state guess must be finite".into()));
    }
    let mut y = Vector4::from(guess.to_real());
    let mut f = residual(&y, params, eps_a);
    let mut fnorm = f.norm();
    for _ in 0..ctl.max_iterations {
        if fnorm < ctl.tolerance {
            return Ok(SemiclassicalState::from_real(&[y[0], y[1], y[2], y[3]]));
        }
        let Some(step) = jacobian(&y, params).lu().solve(&(-f)) else {
            break;
        };
        let mut lambda = 1.0;
        loop {
            let trial = y + step * lambda;
            let ft = residual(&trial, params, eps_a);
            let tn = ft.norm();
            if tn.is_finite() && tn < (1.0 - 1e-4 * lambda) * fnorm {
                y = trial;
                f = ft;
                fnorm = tn;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-10 {
                return Err(non_convergence(&y, fnorm, ctl.max_iterations));
            }
        }
    }
    if fnorm < ctl.tolerance {
        return Ok(SemiclassicalState::from_real(&[y[0], y[1], y[2], y[3]]));
    }
    Err(non_convergence(&y, fnorm, ctl.max_iterations))
}

fn non_convergence(y: &Vector4<f64>, residual: f64, iterations: usize) -> Error {
    Error::NonConvergence {
        best: SemiclassicalState::from_real(&[y[0], y[1], y[2], y[3]]),
        residual,
        iterations,
    }
}

/// Labels a numerically located fixed point. Unstable points are `Lower`;
/// stable points are `Upper` when their magnitude reaches the lower root of
/// the signal-free magnitude equation, otherwise `Trivial`.
fn label(alpha: Complex64, stable: bool, params: &SystemParams) -> Branch {
    if !stable {
        return Branch::Lower;
    }
    match positive_quartic_roots(params) {
        Some(r) if alpha.norm() >= r.lower => Branch::Upper,
        _ => Branch::Trivial,
    }
}

fn nearest_phase_index(alpha: Complex64, params: &SystemParams) -> u8 {
    if alpha.norm() == 0.0 {
        return 0;
    }
    let rel = (alpha.arg() - params.epsilon_b.arg() / 3.0).rem_euclid(2.0 * PI);
    ((rel / (2.0 * PI / 3.0)).round() as u8) % 3
}

/// Fixed point of the mean-field equations with a constant injected signal,
/// reached from `guess` by damped Newton iteration.
pub fn numeric_steady_state(
    params: &SystemParams,
    epsilon_a: Complex64,
    guess: SemiclassicalState,
    ctl: &NewtonControl,
) -> Result<SteadyStateSolution> {
    params.validate()?;
    let s = newton(params, epsilon_a, guess, ctl)?;
    let mut sol = SteadyStateSolution::unclassified(s.alpha, s.beta, Branch::Trivial, 0).with_stability(params)?;
    sol.branch = label(sol.alpha_s, sol.stable, params);
    sol.phase_index = nearest_phase_index(sol.alpha_s, params);
    if sol.alpha_s.norm() <= 1e-12 {
        sol.branch = Branch::Trivial;
    }
    Ok(sol)
}

/// All fixed points reachable from a polar grid of starting guesses (plus
/// the closed-form branches), deduplicated. With `epsilon_a = 0` this is the
/// closed-form set.
pub fn find_fixed_points(params: &SystemParams, epsilon_a: Complex64) -> Result<Vec<SteadyStateSolution>> {
    if epsilon_a == Complex64::new(0.0, 0.0) {
        return steady_state_branches(params);
    }
    params.validate()?;
    let mut guesses: Vec<SemiclassicalState> = Vec::new();
    let r_max = positive_quartic_roots(params)
        .map(|r| r.upper)
        .unwrap_or(0.0)
        .max((3.0 * params.epsilon_b.norm() / params.kappa).cbrt())
        .max(2.0 * epsilon_a.norm() / params.gamma_a);
    for i in 0..=24 {
        let r = r_max * 1.2 * f64::from(i) / 24.0;
        for k in 0..12 {
            let alpha = Complex64::from_polar(r, 2.0 * PI * f64::from(k) / 12.0);
            guesses.push(SemiclassicalState::new(alpha, beta_for(alpha, params)));
        }
    }
    for sol in steady_state_branches(params)? {
        guesses.push(sol.state());
    }

    let ctl = NewtonControl::default();
    let mut found: Vec<SteadyStateSolution> = Vec::new();
    for g in guesses {
        let Ok(sol) = numeric_steady_state(params, epsilon_a, g, &ctl) else {
            continue;
        };
        let scale = 1f64.max(sol.state().norm());
        let dup = found
            .iter()
            .any(|f| (f.alpha_s - sol.alpha_s).norm() + (f.beta_s - sol.beta_s).norm() < 1e-6 * scale);
        if !dup {
            found.push(sol);
        }
    }
    found.sort_by(|a, b| b.alpha_s.norm().total_cmp(&a.alpha_s.norm()));
    Ok(found)
}
