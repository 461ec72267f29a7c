//! Physical estimate of the effective nonlinearity from material and
//! cavity-geometry parameters, and the transverse modal overlap.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum permittivity (F/m).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

/// SI material and geometry inputs. Permittivities are relative to `EPSILON_0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialGeometry {
    /// Third-order susceptibility (m^2/V^2).
    pub chi3: f64,
    /// Low-mode angular frequency (rad/s); the high mode sits at exactly three times this.
    pub omega_a: f64,
    pub eps_a_rel: f64,
    pub eps_b_rel: f64,
    /// Cavity length (m).
    pub length: f64,
    /// Transverse modal overlap (1/m^2).
    pub sigma: f64,
    /// Field oscillations per round trip of each mode.
    pub m_a: u64,
    pub m_b: u64,
}

impl MaterialGeometry {
    pub fn phase_matched(&self) -> bool {
        self.m_b == 3 * self.m_a
    }
}

/// Effective nonlinearity `kappa` in 1/s; zero unless the modes are phase
/// matched (`m_b = 3 m_a`).
pub fn estimate_kappa(mg: &MaterialGeometry) -> f64 {
    if !mg.phase_matched() {
        return 0.0;
    }
    let omega_b = 3.0 * mg.omega_a;
    let eps_a = mg.eps_a_rel * EPSILON_0;
    let eps_b = mg.eps_b_rel * EPSILON_0;
    3.0 * HBAR * EPSILON_0 * mg.chi3 * (mg.omega_a.powi(3) * omega_b).sqrt() / (4.0 * (eps_a.powi(3) * eps_b).sqrt())
        * mg.sigma
        / mg.length
}

/// Transverse mode profiles sampled on a shared uniform grid, row-major with
/// `x` varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeProfileGrid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub u_a: Vec<Complex64>,
    pub u_b: Vec<Complex64>,
}

impl ModeProfileGrid {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, u_a: Vec<Complex64>, u_b: Vec<Complex64>) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidParameter("profile grid needs at least 2x2 points".into()));
        }
        if !(dx > 0.0 && dy > 0.0) {
            return Err(Error::InvalidParameter("grid spacings must be positive".into()));
        }
        if u_a.len() != nx * ny || u_b.len() != nx * ny {
            return Err(Error::InvalidParameter(format!(
                "expected {} samples per profile, got {} and {}",
                nx * ny,
                u_a.len(),
                u_b.len()
            )));
        }
        Ok(Self {
            nx,
            ny,
            dx,
            dy,
            u_a,
            u_b,
        })
    }

    /// Samples two profile functions over `[x0, x0 + (nx-1) dx] x [y0, y0 + (ny-1) dy]`.
    pub fn sample(
        nx: usize,
        ny: usize,
        (x0, dx): (f64, f64),
        (y0, dy): (f64, f64),
        u_a: impl Fn(f64, f64) -> Complex64,
        u_b: impl Fn(f64, f64) -> Complex64,
    ) -> Result<Self> {
        let mut a = Vec::with_capacity(nx * ny);
        let mut b = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (x, y) = (x0 + i as f64 * dx, y0 + j as f64 * dy);
                a.push(u_a(x, y));
                b.push(u_b(x, y));
            }
        }
        Self::new(nx, ny, dx, dy, a, b)
    }

    fn weight(&self, i: usize, j: usize) -> f64 {
        let wx = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 };
        let wy = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 };
        wx * wy * self.dx * self.dy
    }

    fn is_real(&self) -> bool {
        self.u_a.iter().chain(&self.u_b).all(|z| z.im == 0.0)
    }
}

/// `sigma = int u_a^3 u_b^* / ((int |u_a|^2)^{3/2} (int |u_b|^2)^{1/2})` by
/// 2D trapezoidal quadrature.
///
/// Real profiles return the real part after checking the imaginary residue;
/// complex profiles return the modulus, the overall phase being absorbable
/// into the mode operators.
pub fn modal_overlap(grid: &ModeProfileGrid) -> Result<f64> {
    let mut num = Complex64::new(0.0, 0.0);
    let mut norm_a = 0.0;
    let mut norm_b = 0.0;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let w = grid.weight(i, j);
            let k = j * grid.nx + i;
            let (ua, ub) = (grid.u_a[k], grid.u_b[k]);
            num += ua * ua * ua * ub.conj() * w;
            norm_a += ua.norm_sqr() * w;
            norm_b += ub.norm_sqr() * w;
        }
    }
    if norm_a <= 0.0 || norm_b <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    let sigma = num / (norm_a.powf(1.5) * norm_b.sqrt());
    if grid.is_real() {
        if sigma.im.abs() > 1e-8 * sigma.re.abs() {
            return Err(Error::Consistency {
                what: "modal overlap",
                residue: sigma.im,
            });
        }
        Ok(sigma.re)
    } else {
        Ok(sigma.norm())
    }
}

/// Parses a mode-profile file: a header line `nx ny dx dy`, then `nx * ny`
/// rows (x fastest) of either `u_a u_b` (real) or `re(u_a) im(u_a) re(u_b) im(u_b)`.
/// Blank lines and lines starting with `#` are ignored.
pub fn parse_mode_profile(text: &str) -> Result<ModeProfileGrid> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let bad = |n: usize, msg: &str| Error::Configuration(format!("mode profile line {n}: {msg}"));

    let (hn, header) = lines
        .next()
        .ok_or_else(|| Error::Configuration("mode profile is empty".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(bad(hn, "header must be `nx ny dx dy`"));
    }
    let nx: usize = fields[0].parse().map_err(|_| bad(hn, "nx is not an integer"))?;
    let ny: usize = fields[1].parse().map_err(|_| bad(hn, "ny is not an integer"))?;
    let dx: f64 = fields[2].parse().map_err(|_| bad(hn, "dx is not a number"))?;
    let dy: f64 = fields[3].parse().map_err(|_| bad(hn, "dy is not a number"))?;

    let mut u_a = Vec::with_capacity(nx * ny);
    let mut u_b = Vec::with_capacity(nx * ny);
    for (n, line) in lines {
        let vals = line
            .split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|_| bad(n, "value is not a number")))
            .collect::<Result<Vec<_>>>()?;
        match vals.as_slice() {
            [a, b] => {
                u_a.push(Complex64::new(*a, 0.0));
                u_b.push(Complex64::new(*b, 0.0));
            }
            [ar, ai, br, bi] => {
                u_a.push(Complex64::new(*ar, *ai));
                u_b.push(Complex64::new(*br, *bi));
            }
            _ => return Err(bad(n, "expected 2 or 4 columns")),
        }
    }
    ModeProfileGrid::new(nx, ny, dx, dy, u_a, u_b).map_err(|e| Error::Configuration(e.to_string()))
}
