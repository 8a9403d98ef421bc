//! Root solvers for the polynomials that fix the translation-invariant
//! boundary laws, plus the generic bracketed bisection used elsewhere.
//!
//! The cubic `θy³ − y² + (θ²+1)y − 2θ = 0` governs the symmetric laws
//! (`x = 1`); the quadratic `θ³ξ² + θ(3θ²−1)ξ + 2θ³ − 2θ + 1 = 0` in
//! `ξ = x + 1/x` governs the asymmetric ones.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Smallest coupling accepted at the API boundary.
pub const THETA_MIN: f64 = 1e-4;
/// Largest coupling accepted at the API boundary.
pub const THETA_MAX: f64 = 1e4;

/// Distance in θ under which a coupling is treated as sitting exactly on a
/// critical point.
pub const CRITICAL_TOL: f64 = 1e-9;

/// Relative separation under which two real roots are reported as one double root.
pub const DOUBLE_ROOT_REL: f64 = 1e-8;

/// Cardano roots with a (scaled) imaginary part below this are taken as real.
pub const IMAG_TOL: f64 = 1e-10;

/// Relative residual every reported root must satisfy.
pub const ROOT_RESIDUAL_REL: f64 = 1e-10;

const NEWTON_POLISH_STEPS: usize = 3;
const BISECT_MAX_ITER: usize = 200;

/// The coupling `θ = exp(Jβ)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Coupling(f64);

impl Coupling {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() || theta <= 0.0 {
            return Err(Error::domain(format!("coupling must be finite and positive, got {theta}")));
        }
        if !(THETA_MIN..=THETA_MAX).contains(&theta) {
            return Err(Error::domain(format!(
                "coupling {theta} outside supported range [{THETA_MIN:e}, {THETA_MAX:e}]"
            )));
        }
        Ok(Coupling(theta))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for Coupling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Real roots in ascending order, with a flag per root marking double roots.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RootSet {
    roots: Vec<f64>,
    double: Vec<bool>,
}

impl RootSet {
    fn from_sorted(roots: Vec<f64>, double: Vec<bool>) -> Self {
        debug_assert_eq!(roots.len(), double.len());
        debug_assert!(roots.windows(2).all(|w| w[0] <= w[1]));
        RootSet { roots, double }
    }

    pub fn roots(&self) -> &[f64] {
        &self.roots
    }

    pub fn is_double(&self, index: usize) -> bool {
        self.double[index]
    }

    pub fn multiplicity_flags(&self) -> &[bool] {
        &self.double
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }
}

/// `θy³ − y² + (θ²+1)y − 2θ`.
#[inline]
pub fn cubic_y(theta: f64, y: f64) -> f64 {
    ((theta * y - 1.0) * y + (theta * theta + 1.0)) * y - 2.0 * theta
}

#[inline]
fn cubic_y_derivative(theta: f64, y: f64) -> f64 {
    (3.0 * theta * y - 2.0) * y + theta * theta + 1.0
}

fn cubic_y_coefficients(theta: f64) -> [f64; 4] {
    [theta, -1.0, theta * theta + 1.0, -2.0 * theta]
}

/// Discriminant `18abcd − 4b³d + b²c² − 4ac³ − 27a²d²` of the cubic in `y`.
/// Positive: three distinct real roots; negative: one real root.
pub fn cubic_discriminant(theta: f64) -> f64 {
    let [a, b, c, d] = cubic_y_coefficients(theta);
    18.0 * a * b * c * d - 4.0 * b.powi(3) * d + b * b * c * c - 4.0 * a * c.powi(3) - 27.0 * a * a * d * d
}

/// Real roots of `a y³ + b y² + c y + d` from Cardano's formula in complex
/// arithmetic. Roots whose imaginary part is below [`IMAG_TOL`] (relative
/// to `max(1, |root|)`) are kept.
pub fn cardano_real_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let (bn, cn, dn) = (b / a, c / a, d / a);
    let shift = bn / 3.0;
    let p = cn - bn * bn / 3.0;
    let q = 2.0 * bn.powi(3) / 27.0 - bn * cn / 3.0 + dn;

    let sqrt_disc = Complex64::new(q * q / 4.0 + p.powi(3) / 27.0, 0.0).sqrt();
    let half_q = Complex64::new(-q / 2.0, 0.0);
    // Pick the sign that avoids cancellation in u³.
    let w = if (half_q + sqrt_disc).norm() >= (half_q - sqrt_disc).norm() {
        half_q + sqrt_disc
    } else {
        half_q - sqrt_disc
    };
    let u = w.cbrt();
    let omega = Complex64::new(-0.5, 3f64.sqrt() / 2.0);

    let mut out = Vec::with_capacity(3);
    let mut uk = u;
    for _ in 0..3 {
        let t = if uk.norm() == 0.0 { Complex64::new(0.0, 0.0) } else { uk - p / (3.0 * uk) };
        let root = t - shift;
        if root.im.abs() <= IMAG_TOL * root.re.abs().max(1.0) {
            out.push(root.re);
        }
        uk *= omega;
    }
    out
}

fn polish(theta: f64, mut y: f64) -> f64 {
    for _ in 0..NEWTON_POLISH_STEPS {
        let f = cubic_y(theta, y);
        let df = cubic_y_derivative(theta, y);
        if f == 0.0 || df == 0.0 {
            break;
        }
        let next = y - f / df;
        // Near a double root Newton can overshoot; keep only improving steps.
        if !next.is_finite() || cubic_y(theta, next).abs() > f.abs() {
            break;
        }
        y = next;
    }
    y
}

fn cubic_residual_ok(theta: f64, y: f64) -> bool {
    cubic_y(theta, y).abs() <= ROOT_RESIDUAL_REL * y.abs().powi(3).max(1.0)
}

/// The unique θ_c in (0, 1) where the cubic in `y` acquires a double root.
pub fn cubic_critical_theta() -> Coupling {
    static THETA_C: OnceLock<f64> = OnceLock::new();
    let value = *THETA_C.get_or_init(|| {
        bisect(cubic_discriminant, 0.1, 0.2, 1e-15).expect("cubic discriminant changes sign on [0.1, 0.2]")
    });
    Coupling(value)
}

/// The double root and the simple root of the cubic at θ = θ_c.
///
/// The double root sits at the local maximum of the cubic (the smaller
/// critical point); the simple root follows from the sum of roots `1/θ`.
pub fn cubic_double_root(theta: f64) -> (f64, f64) {
    let disc = (4.0 - 12.0 * theta * (theta * theta + 1.0)).max(0.0);
    let double = (2.0 - disc.sqrt()) / (6.0 * theta);
    (double, 1.0 / theta - 2.0 * double)
}

/// All positive real roots of `θy³ − y² + (θ²+1)y − 2θ = 0`, ascending.
///
/// Three roots below θ_c, one above, and at θ_c (within [`CRITICAL_TOL`])
/// a double root followed by the simple one.
pub fn solve_cubic_y(theta: Coupling) -> Result<RootSet> {
    let t = theta.value();
    if (t - cubic_critical_theta().value()).abs() <= CRITICAL_TOL {
        let (double, simple) = cubic_double_root(t);
        return Ok(RootSet::from_sorted(vec![double, simple], vec![true, false]));
    }

    let [a, b, c, d] = cubic_y_coefficients(t);
    let mut roots: Vec<f64> = cardano_real_roots(a, b, c, d)
        .into_iter()
        .map(|r| polish(t, r))
        .filter(|&r| r > 0.0)
        .collect();
    roots.sort_by(f64::total_cmp);

    let mut merged: Vec<f64> = Vec::with_capacity(roots.len());
    let mut double = Vec::with_capacity(roots.len());
    for r in roots {
        match merged.last_mut() {
            Some(prev) if (r - *prev).abs() <= DOUBLE_ROOT_REL * r.abs().max(prev.abs()) => {
                *prev = 0.5 * (*prev + r);
                *double.last_mut().unwrap() = true;
            }
            _ => {
                merged.push(r);
                double.push(false);
            }
        }
    }

    for (&r, &dbl) in merged.iter().zip(&double) {
        if !dbl && !cubic_residual_ok(t, r) {
            return Err(Error::invariant(format!(
                "cubic root {r} at θ = {t} has residual {:e}",
                cubic_y(t, r)
            )));
        }
    }
    Ok(RootSet::from_sorted(merged, double))
}

/// `D = θ²(θ−1)(θ³+θ²+3θ−1)`, the discriminant of the quadratic in ξ.
pub fn xi_discriminant(theta: f64) -> f64 {
    theta * theta * xi_discriminant_factor(theta)
}

/// `(θ−1)(θ³+θ²+3θ−1)`; shares its positive root below 1 with `D`.
pub fn xi_discriminant_factor(theta: f64) -> f64 {
    (theta - 1.0) * (((theta + 1.0) * theta + 3.0) * theta - 1.0)
}

/// `θ³ξ² + θ(3θ²−1)ξ + 2θ³ − 2θ + 1`.
pub fn xi_quadratic(theta: f64, xi: f64) -> f64 {
    let t2 = theta * theta;
    theta * t2 * xi * xi + theta * (3.0 * t2 - 1.0) * xi + 2.0 * theta * t2 - 2.0 * theta + 1.0
}

/// Closed form of the critical coupling θ_c′ below which the quadratic in ξ
/// has real roots: `(∛(26+6√33) − 8/∛(26+6√33) − 1) / 3`.
pub fn theta_c_prime() -> Coupling {
    let s = (26.0 + 6.0 * 33f64.sqrt()).cbrt();
    let value = (s - 8.0 / s - 1.0) / 3.0;
    debug_assert!(xi_discriminant(value).abs() <= 1e-12);
    Coupling(value)
}

/// Roots `ξ₁ ≤ ξ₂` of the quadratic in `ξ = x + 1/x`. Defined only for θ < 1.
///
/// Empty above θ_c′, a single (double) root at θ_c′, two roots below.
pub fn solve_xi(theta: Coupling) -> Result<RootSet> {
    let t = theta.value();
    if t >= 1.0 {
        return Err(Error::domain(format!("the ξ equation only has admissible solutions for θ < 1, got {t}")));
    }
    let t2 = t * t;
    if (t - theta_c_prime().value()).abs() <= CRITICAL_TOL {
        return Ok(RootSet::from_sorted(vec![(1.0 - 3.0 * t2) / (2.0 * t2)], vec![true]));
    }
    let factor = xi_discriminant_factor(t);
    if factor < 0.0 {
        return Ok(RootSet::default());
    }
    let s = factor.sqrt();
    let xi1 = (1.0 - 3.0 * t2 - s) / (2.0 * t2);
    let xi2 = (1.0 - 3.0 * t2 + s) / (2.0 * t2);
    Ok(RootSet::from_sorted(vec![xi1, xi2], vec![false, false]))
}

/// Midpoint bisection on `[lo, hi]` until the bracket is narrower than `tol`.
pub fn bisect<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::domain(format!("invalid bisection setup: lo = {lo}, hi = {hi}, tol = {tol}")));
    }
    let (mut lo, mut hi) = (lo, hi);
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if !f_lo.is_finite() || !f_hi.is_finite() {
        return Err(Error::Numeric(format!("non-finite value at bracket end: f({lo}) = {f_lo}, f({hi}) = {f_hi}")));
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracketing { lo, hi, f_lo, f_hi });
    }

    for _ in 0..BISECT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if !f_mid.is_finite() {
            return Err(Error::Numeric(format!("non-finite value f({mid}) = {f_mid}")));
        }
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// First sub-interval of width `step` on `[lo, hi]` across which `f` changes sign.
pub fn scan_for_sign_change<F>(f: F, lo: f64, hi: f64, step: f64) -> Option<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let n = ((hi - lo) / step).ceil() as usize;
    let mut a = lo;
    let mut fa = f(a);
    for i in 1..=n {
        let b = if i == n { hi } else { lo + i as f64 * step };
        let fb = f(b);
        if fa.is_finite() && fb.is_finite() && (fa == 0.0 || fa.signum() != fb.signum()) {
            return Some((a, b));
        }
        a = b;
        fa = fb;
    }
    None
}
