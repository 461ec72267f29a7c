//! Linearized fluctuation analysis about a stable fixed point: drift and
//! diffusion matrices of the Ornstein–Uhlenbeck process, the spectrum matrix,
//! output quadrature spectra, and the Duan–Simon combinations.
//!
//! Basis order is `(d alpha, d alpha+, d beta, d beta+)`; quadrature order is
//! `(X_a, Y_a, X_b, Y_b)` with `X = a + a^dagger`, `Y = i (a^dagger - a)`.

use nalgebra::{Matrix4, SMatrix, SVector, Schur};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SteadyStateSolution, SystemParams};

pub type CMatrix4 = Matrix4<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance on the imaginary part of reported variances and covariances.
pub const REALITY_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearizationMatrices {
    pub drift: CMatrix4,
    pub diffusion: CMatrix4,
}

impl LinearizationMatrices {
    pub fn new(solution: &SteadyStateSolution, params: &SystemParams) -> Self {
        Self {
            drift: drift_matrix(solution, params),
            diffusion: diffusion_matrix(solution, params),
        }
    }
}

/// Drift matrix `A` of the linearized fluctuation equation `d x = -A x dt + B dW`.
pub fn drift_matrix(solution: &SteadyStateSolution, params: &SystemParams) -> CMatrix4 {
    let a = solution.alpha_s;
    let b = solution.beta_s;
    let k = params.kappa;
    let ga = Complex64::new(params.gamma_a, 0.0);
    let gb = Complex64::new(params.gamma_b, 0.0);
    let ac = a.conj();
    #[rustfmt::skip]
    let m = CMatrix4::new(
        ga,                       -2.0 * k * ac * b, -k * ac * ac, ZERO,
        -2.0 * k * a * b.conj(),  ga,                ZERO,         -k * a * a,
        k * a * a,                ZERO,              gb,           ZERO,
        ZERO,                     k * ac * ac,       ZERO,         gb,
    );
    m
}

/// Diffusion matrix `D = B B^T`; only the two low-mode diagonal entries are non-zero.
pub fn diffusion_matrix(solution: &SteadyStateSolution, params: &SystemParams) -> CMatrix4 {
    let a = solution.alpha_s;
    let b = solution.beta_s;
    let mut d = CMatrix4::zeros();
    d[(0, 0)] = 2.0 * params.kappa * a.conj() * b;
    d[(1, 1)] = 2.0 * params.kappa * a * b.conj();
    d
}

pub fn eigenvalues(a: &CMatrix4) -> Result<[Complex64; 4]> {
    let schur = Schur::try_new(*a, 1e-15, 10_000).ok_or(Error::EigenSolver)?;
    let ev = schur.eigenvalues().ok_or(Error::EigenSolver)?;
    Ok([ev[0], ev[1], ev[2], ev[3]])
}

/// `true` iff every eigenvalue of `a` has strictly positive real part, i.e.
/// fluctuations about the fixed point decay.
pub fn stability_check(a: &CMatrix4) -> Result<bool> {
    Ok(eigenvalues(a)?.iter().all(|l| l.re > 0.0))
}

/// `S(w) = (A + i w I)^{-1} D (A^dagger - i w I)^{-1}`.
pub fn spectrum_matrix(a: &CMatrix4, d: &CMatrix4, omega: f64) -> Result<CMatrix4> {
    let shift = CMatrix4::identity() * (I * omega);
    let left = (a + shift).lu();
    let right = (a.adjoint() - shift).try_inverse().ok_or(Error::Singular { omega })?;
    let x = left.solve(d).ok_or(Error::Singular { omega })?;
    Ok(x * right)
}

/// Fixed map from phase-space fluctuations to quadrature fluctuations.
pub fn quadrature_map() -> CMatrix4 {
    let one = Complex64::new(1.0, 0.0);
    #[rustfmt::skip]
    let q = CMatrix4::new(
        one, one, ZERO, ZERO,
        -I,  I,   ZERO, ZERO,
        ZERO, ZERO, one, one,
        ZERO, ZERO, -I,  I,
    );
    q
}

/// `S^q = Q S Q^T`.
pub fn quadrature_spectrum(s: &CMatrix4) -> CMatrix4 {
    let q = quadrature_map();
    q * s * q.transpose()
}

/// Output-field spectral variances and covariances at one frequency.
/// Vacuum noise is 1 for every variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub omega: f64,
    pub v_xa: f64,
    pub v_ya: f64,
    pub v_xb: f64,
    pub v_yb: f64,
    pub c_xaxb: f64,
    pub c_yayb: f64,
    pub ds_plus: f64,
    pub ds_minus: f64,
    pub valid: bool,
}

impl SpectrumRow {
    pub fn vacuum(omega: f64) -> Self {
        let mut row = Self {
            omega,
            v_xa: 1.0,
            v_ya: 1.0,
            v_xb: 1.0,
            v_yb: 1.0,
            c_xaxb: 0.0,
            c_yayb: 0.0,
            ds_plus: 0.0,
            ds_minus: 0.0,
            valid: true,
        };
        (row.ds_plus, row.ds_minus) = duan_simon(&row);
        row
    }
}

fn real_checked(z: Complex64, what: &'static str) -> Result<f64> {
    if z.im.abs() > REALITY_TOLERANCE * z.re.abs().max(1.0) {
        return Err(Error::Consistency { what, residue: z.im });
    }
    Ok(z.re)
}

/// Output covariance `delta_ij + sqrt(g_i g_j) (S^q[i,j] + S^q[j,i])` over
/// quadrature indices `i`, `j` (0..4, see module docs), before the reality check.
pub fn output_covariance_entry(sq: &CMatrix4, params: &SystemParams, i: usize, j: usize) -> Complex64 {
    let rate = |idx: usize| if idx < 2 { params.gamma_a } else { params.gamma_b };
    let delta = if i == j { 1.0 } else { 0.0 };
    delta + (rate(i) * rate(j)).sqrt() * (sq[(i, j)] + sq[(j, i)])
}

/// Output variances and X–X / Y–Y cross covariances at frequency `omega`,
/// with the Duan–Simon combinations filled in.
pub fn output_covariances(sq: &CMatrix4, params: &SystemParams, omega: f64) -> Result<SpectrumRow> {
    let c = |i, j, what| real_checked(output_covariance_entry(sq, params, i, j), what);
    let mut row = SpectrumRow {
        omega,
        v_xa: c(0, 0, "V(X_a)")?,
        v_ya: c(1, 1, "V(Y_a)")?,
        v_xb: c(2, 2, "V(X_b)")?,
        v_yb: c(3, 3, "V(Y_b)")?,
        c_xaxb: c(0, 2, "C(X_a,X_b)")?,
        c_yayb: c(1, 3, "C(Y_a,Y_b)")?,
        ds_plus: 0.0,
        ds_minus: 0.0,
        valid: true,
    };
    (row.ds_plus, row.ds_minus) = duan_simon(&row);
    Ok(row)
}

/// `DS_+- = V(X_a +- X_b) + V(Y_a -+ Y_b)`; a value below 4 witnesses
/// entanglement between the output modes.
pub fn duan_simon(row: &SpectrumRow) -> (f64, f64) {
    let base = row.v_xa + row.v_xb + row.v_ya + row.v_yb;
    let plus = base + 2.0 * row.c_xaxb - 2.0 * row.c_yayb;
    let minus = base - 2.0 * row.c_xaxb + 2.0 * row.c_yayb;
    (plus, minus)
}

/// Spectra over a frequency grid for one fixed point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub rows: Vec<SpectrumRow>,
    /// False when the fixed point lies in the region where fluctuations are
    /// comparable to the mean and linearization does not apply.
    pub valid: bool,
}

impl SpectrumResult {
    pub fn omegas(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.omega)
    }

    /// Row with the smallest value of `f`.
    pub fn argmin_by(&self, f: impl Fn(&SpectrumRow) -> f64) -> Option<&SpectrumRow> {
        self.rows.iter().min_by(|a, b| f(a).total_cmp(&f(b)))
    }
}

/// Output spectra over `omegas`; every row inherits `valid`.
pub fn spectrum_scan(
    solution: &SteadyStateSolution,
    params: &SystemParams,
    omegas: &[f64],
    valid: bool,
) -> Result<SpectrumResult> {
    let lin = LinearizationMatrices::new(solution, params);
    let ev = eigenvalues(&lin.drift)?;
    let margin = ev.iter().map(|l| l.re).fold(f64::INFINITY, f64::min);
    if !(margin > 0.0) {
        return Err(Error::UnstableState { margin });
    }
    let rows = omegas
        .par_iter()
        .map(|&w| {
            let s = spectrum_matrix(&lin.drift, &lin.diffusion, w)?;
            let mut row = output_covariances(&quadrature_spectrum(&s), params, w)?;
            row.valid = valid;
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumResult { rows, valid })
}

/// Default frequency grid on `[0, 20]`: zero, 150 logarithmic points on
/// `[1e-3, 1)` and 249 linear points on `[1, 20]` (400 in total).
pub fn default_frequency_grid() -> Vec<f64> {
    hybrid_frequency_grid(20.0, 400)
}

/// Zero, then log-spaced points up to 1, then linear points up to `omega_max`.
pub fn hybrid_frequency_grid(omega_max: f64, n: usize) -> Vec<f64> {
    assert!(n >= 4 && omega_max > 1.0);
    let n_log = (n - 1) * 150 / 399;
    let n_lin = n - 1 - n_log;
    let mut grid = Vec::with_capacity(n);
    grid.push(0.0);
    let (lo, hi) = (1e-3f64.ln(), 0.0);
    for k in 0..n_log {
        grid.push((lo + (hi - lo) * k as f64 / n_log as f64).exp());
    }
    for k in 0..n_lin {
        grid.push(1.0 + (omega_max - 1.0) * k as f64 / (n_lin - 1) as f64);
    }
    grid
}

/// Stationary covariance `G` solving `A G + G A^dagger = D`, by a direct
/// 16x16 solve of the vectorized equation.
pub fn stationary_covariance(a: &CMatrix4, d: &CMatrix4) -> Result<CMatrix4> {
    let ad = a.adjoint();
    let mut k = SMatrix::<Complex64, 16, 16>::zeros();
    // vec(A G) = (I kron A) vec G ; vec(G A^dagger) = ((A^dagger)^T kron I) vec G,
    // with column-major vec: index(i, j) = i + 4 j.
    for i in 0..4 {
        for j in 0..4 {
            let row = i + 4 * j;
            for m in 0..4 {
                k[(row, m + 4 * j)] += a[(i, m)];
                k[(row, i + 4 * m)] += ad[(m, j)];
            }
        }
    }
    let rhs = SVector::<Complex64, 16>::from_iterator(d.iter().copied());
    let g = k.lu().solve(&rhs).ok_or(Error::Singular { omega: 0.0 })?;
    Ok(CMatrix4::from_iterator(g.iter().copied()))
}

/// `(1/2pi) int S(w) dw` by the trapezoidal rule with `n` intervals on
/// `[-half_width, half_width]`, plus the leading `D / w^2` tail beyond it.
/// Approximates the stationary covariance for large `half_width`.
pub fn frequency_integrated_covariance(a: &CMatrix4, d: &CMatrix4, half_width: f64, n: usize) -> Result<CMatrix4> {
    if !(half_width > 0.0) || n < 2 {
        return Err(Error::InvalidParameter(
            "need positive half-width and at least 2 intervals".into(),
        ));
    }
    let h = 2.0 * half_width / n as f64;
    let terms = (0..=n)
        .into_par_iter()
        .map(|k| {
            let w = -half_width + k as f64 * h;
            let weight = if k == 0 || k == n { 0.5 } else { 1.0 };
            spectrum_matrix(a, d, w).map(|s| s * Complex64::new(weight * h, 0.0))
        })
        .collect::<Result<Vec<_>>>()?;
    let body = terms.iter().fold(CMatrix4::zeros(), |acc, s| acc + s);
    let tail = d * Complex64::new(2.0 / half_width, 0.0);
    Ok((body + tail) / Complex64::new(2.0 * std::f64::consts::PI, 0.0))
}
