//! Positive real roots of the steady-state magnitude equation
//! `x^4 - p x + q = 0` with `p = 3|eps_b|/kappa` and `q = 3 gamma_a gamma_b / kappa^2`.

use super::SystemParams;

/// The two positive roots (lower, upper) of the magnitude quartic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuarticRoots {
    pub lower: f64,
    pub upper: f64,
}

fn coefficients(params: &SystemParams) -> (f64, f64) {
    let p = 3.0 * params.epsilon_b.norm() / params.kappa;
    let q = 3.0 * params.gamma_a * params.gamma_b / (params.kappa * params.kappa);
    (p, q)
}

/// Relative residual `|f(x)| / max(x^4, p x, q)` of the magnitude quartic.
pub fn quartic_residual(params: &SystemParams, x: f64) -> f64 {
    let (p, q) = coefficients(params);
    let x4 = x.powi(4);
    (x4 - p * x + q).abs() / x4.max(p * x).max(q)
}

/// Positive real roots of the magnitude quartic, or `None` below threshold.
///
/// `f(x) = x^4 - p x + q` is convex with `f(0) = q > 0`, so it has either no
/// positive roots or two, separated by the minimum at `(p/4)^{1/3}`. Each is
/// bracketed, bisected, then polished with Newton steps.
pub fn positive_quartic_roots(params: &SystemParams) -> Option<QuarticRoots> {
    let (p, q) = coefficients(params);
    let f = |x: f64| x * x * x * x - p * x + q;
    let df = |x: f64| 4.0 * x * x * x - p;

    let x_min = (p / 4.0).cbrt();
    let f_min = f(x_min);
    if !(f_min <= 0.0) {
        return None;
    }
    if f_min == 0.0 {
        return Some(QuarticRoots {
            lower: x_min,
            upper: x_min,
        });
    }
    // f decreasing on (0, x_min), increasing beyond; f(p^{1/3}) = q > 0.
    let lower = bisect_polish(&f, &df, 0.0, x_min, false);
    let upper = bisect_polish(&f, &df, x_min, p.cbrt().max(x_min), true);
    Some(QuarticRoots { lower, upper })
}

fn bisect_polish(f: &impl Fn(f64) -> f64, df: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, increasing: bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let below = f(mid) < 0.0;
        // On the decreasing side the root lies where f changes from + to -.
        if below == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let d = df(x);
        if d == 0.0 {
            break;
        }
        let next = x - f(x) / d;
        if !next.is_finite() || (next - x).abs() > (hi - lo).max(f64::EPSILON * x.abs()) * 4.0 {
            break;
        }
        x = next;
    }
    x
}
