//! Transition matrix of the tree-indexed Markov chain attached to a boundary
//! law, and its spectrum.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::algebra::Coupling;
use crate::boundary::{enumerate_tisgms, scaled_residual, BoundaryLaw, Branch, LAW_RESIDUAL_TOL};
use crate::error::{Error, Result};

/// Relative tolerance below which a negative eigenvalue discriminant is
/// treated as rounding and clamped to zero.
pub const DISCRIMINANT_CLAMP: f64 = 1e-10;

const QE_RESIDUAL_TOL: f64 = 1e-9;
const FORM_AGREEMENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Channel {
    /// Row-stochastic, `p[i][j] = P(child = j | parent = i)`.
    pub p: [[f64; 3]; 3],
    /// `Z = θ²x² + θy² + 1`.
    pub z_norm: f64,
    pub theta: Coupling,
    pub law: BoundaryLaw,
}

impl Channel {
    pub fn row(&self, i: usize) -> &[f64; 3] {
        &self.p[i]
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.p[i][j])
    }
}

/// Row-normalized weights `θ^{|i−j|} z_j` with `z = (x², y², 1)`.
fn unreduced_matrix(theta: f64, x: f64, y: f64) -> [[f64; 3]; 3] {
    let z = [x * x, y * y, 1.0];
    let mut p = [[0.0; 3]; 3];
    for (i, row) in p.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = theta.powi(i.abs_diff(j) as i32) * z[j];
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|e| *e /= s);
    }
    p
}

/// Build the channel from the reduced form `(1/Z)·(x, θy²/x, θ²/x; θx²/y, y, θ/y; θ²x², θy², 1)`,
/// which is valid because `(x, y)` solves the fixed-point system.
pub fn build_channel(theta: Coupling, law: &BoundaryLaw) -> Result<Channel> {
    let (t, x, y) = (theta.value(), law.x, law.y);
    let r = scaled_residual(theta, x, y);
    if !(r <= LAW_RESIDUAL_TOL) {
        return Err(Error::Precondition(format!(
            "({x}, {y}) does not solve the fixed-point system at θ = {t} (residual {r:e})"
        )));
    }
    let z = t * t * x * x + t * y * y + 1.0;
    let p = [
        [x / z, t * y * y / (x * z), t * t / (x * z)],
        [t * x * x / (y * z), y / z, t / (y * z)],
        [t * t * x * x / z, t * y * y / z, 1.0 / z],
    ];

    let reference = unreduced_matrix(t, x, y);
    for i in 0..3 {
        for j in 0..3 {
            if (p[i][j] - reference[i][j]).abs() > FORM_AGREEMENT_TOL {
                return Err(Error::invariant(format!(
                    "reduced and unreduced channel differ at ({i}, {j}): {} vs {}",
                    p[i][j], reference[i][j]
                )));
            }
        }
    }
    Ok(Channel { p, z_norm: z, theta, law: *law })
}

/// Channel of the given branch at `theta`.
pub fn channel_for(theta: Coupling, branch: Branch) -> Result<Channel> {
    let catalog = enumerate_tisgms(theta)?;
    build_channel(theta, catalog.require(branch)?)
}

/// The unique `π` with `πP = π` and `Σπ = 1`.
pub fn stationary_distribution(ch: &Channel) -> Result<[f64; 3]> {
    let mut a = ch.matrix().transpose() - Matrix3::identity();
    a.set_row(2, &Vector3::repeat(1.0).transpose());
    let b = Vector3::new(0.0, 0.0, 1.0);
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numeric("stationary system is singular".into()))?;
    if pi.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Numeric(format!("stationary distribution has a non-positive entry: {pi:?}")));
    }
    Ok([pi[0], pi[1], pi[2]])
}

/// Closed-form non-Perron eigenvalues `(λ₁, λ₂)` with `λ₁ ≤ λ₂`.
pub fn analytic_eigenvalues(theta: Coupling, law: &BoundaryLaw) -> Result<(f64, f64)> {
    let (t, x, y) = (theta.value(), law.x, law.y);
    let z = t * t * x * x + t * y * y + 1.0;
    let a = 1.0 + x + y - 3.0 * z;
    let cubes = 1.0 + x.powi(3) + y.powi(3);
    let b = 4.0 * t * t * z * cubes / x;
    let s = if x == 1.0 {
        // On the symmetric solutions the cubic makes the discriminant a perfect
        // square, (1 − θ² − y + θy²)². Taking the root directly avoids the
        // cancellation in A² − B, which otherwise costs half the digits when
        // λ₁ ≈ λ₂ (small θ).
        (1.0 - t * t - y + t * y * y).abs()
    } else {
        let mut disc = a * a - b;
        if disc < 0.0 {
            if -disc > DISCRIMINANT_CLAMP * (a * a).max(b).max(1.0) {
                return Err(Error::invariant(format!(
                    "eigenvalues of the channel are complex at θ = {t}, (x, y) = ({x}, {y}): discriminant {disc:e}"
                )));
            }
            disc = 0.0;
        }
        disc.sqrt()
    };
    let lambda1 = (x + y + 1.0 - z - s) / (2.0 * z);
    let lambda2 = (x + y + 1.0 - z + s) / (2.0 * z);

    for lambda in [lambda1, lambda2] {
        let mu = 1.0 - lambda;
        let terms = [z * x * mu * mu, x * a * mu, t * t * cubes];
        let residual: f64 = terms.iter().sum();
        let scale: f64 = terms.iter().map(|v| v.abs()).sum();
        if residual.abs() > QE_RESIDUAL_TOL * scale.max(1.0) {
            return Err(Error::invariant(format!(
                "eigenvalue {lambda} fails its characteristic quadratic (residual {residual:e})"
            )));
        }
    }
    Ok((lambda1, lambda2))
}

/// Non-Perron eigenvalues from a dense eigensolver, ascending.
pub fn numeric_eigenvalues(ch: &Channel) -> Result<(f64, f64)> {
    let eigs = ch.matrix().complex_eigenvalues();
    let mut eigs: Vec<_> = eigs.iter().copied().collect();
    let perron = eigs
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).norm().total_cmp(&(b.1 - 1.0).norm()))
        .map(|(i, _)| i)
        .expect("3×3 matrix has eigenvalues");
    eigs.remove(perron);
    if eigs.iter().any(|e| e.im.abs() > 1e-9) {
        return Err(Error::Numeric(format!("complex eigenvalues {eigs:?}")));
    }
    let (a, b) = (eigs[0].re, eigs[1].re);
    Ok((a.min(b), a.max(b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MaxSource {
    Lambda1,
    Lambda2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralSummary {
    pub lambda1: f64,
    pub lambda2: f64,
    /// `max(|λ₁|, |λ₂|)`.
    pub lambda_max: f64,
    /// Kesten–Stigum indicator `2·λ_max² − 1` (positive ⇒ census reconstruction).
    pub eta: f64,
    pub max_source: MaxSource,
    /// Whether `max_source` is the expected one: `λ₁` for branch 1 above θ = 1, else `λ₂`.
    pub source_as_expected: bool,
}

pub fn summarize(theta: Coupling, law: &BoundaryLaw) -> Result<SpectralSummary> {
    let (lambda1, lambda2) = analytic_eigenvalues(theta, law)?;
    let (max_source, lambda_max) =
        if lambda1.abs() > lambda2.abs() { (MaxSource::Lambda1, lambda1.abs()) } else { (MaxSource::Lambda2, lambda2.abs()) };
    let expected = if law.branch.id() == 1 && theta.value() > 1.0 { MaxSource::Lambda1 } else { MaxSource::Lambda2 };
    let tie = (lambda1.abs() - lambda2.abs()).abs() <= 1e-12;
    Ok(SpectralSummary {
        lambda1,
        lambda2,
        lambda_max,
        eta: 2.0 * lambda_max * lambda_max - 1.0,
        max_source,
        source_as_expected: tie || max_source == expected,
    })
}

pub fn spectral_summary(theta: Coupling, branch: Branch) -> Result<SpectralSummary> {
    let catalog = enumerate_tisgms(theta)?;
    summarize(theta, catalog.require(branch)?)
}
