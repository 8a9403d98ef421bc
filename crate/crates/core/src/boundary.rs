//! Enumeration of the translation-invariant boundary laws `(x, y)` of the
//! three-state model on the binary tree (`x = √z₀`, `y = √z₁`, `z₂ = 1`).
//!
//! Branches 1–3 are the symmetric laws `x = 1` (one per root of the cubic in
//! `y`, branch 1 being the largest root). Branches 4–7 come in mirror pairs
//! `(4, 7)` and `(5, 6)` built from the two roots `ξ₁ ≤ ξ₂` of the quadratic
//! in `ξ = x + 1/x`.

use std::fmt;

use serde::Serialize;

use crate::algebra::{self, Coupling, CRITICAL_TOL};
use crate::error::{Error, Result};

/// Residual (scaled by `max(1, |x|)`, `max(1, |y|)`) a law must satisfy.
pub const LAW_RESIDUAL_TOL: f64 = 1e-9;

/// Branch identifier of a boundary law, 1 through 7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Branch(u8);

impl Branch {
    pub const ALL: [Branch; 7] = [Branch(1), Branch(2), Branch(3), Branch(4), Branch(5), Branch(6), Branch(7)];

    pub fn new(id: u8) -> Result<Self> {
        if (1..=7).contains(&id) {
            Ok(Branch(id))
        } else {
            Err(Error::domain(format!("branch id must be in 1..=7, got {id}")))
        }
    }

    pub fn id(self) -> u8 {
        self.0
    }

    /// Branch of the mirror-image law: 4 ↔ 7, 5 ↔ 6, symmetric branches fixed.
    pub fn mirror(self) -> Branch {
        match self.0 {
            4 => Branch(7),
            7 => Branch(4),
            5 => Branch(6),
            6 => Branch(5),
            id => Branch(id),
        }
    }

    pub fn is_symmetric(self) -> bool {
        self.0 <= 3
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryLaw {
    pub x: f64,
    pub y: f64,
    pub branch: Branch,
}

impl BoundaryLaw {
    /// `(z₀, z₁) = (x², y²)`.
    pub fn z(&self) -> [f64; 2] {
        [self.x * self.x, self.y * self.y]
    }
}

/// Which part of the phase diagram a coupling falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// θ > θ_c′: one law.
    Unique,
    /// θ = θ_c′: three laws (branches 1, 4, 6).
    AtThetaCPrime,
    /// θ_c < θ < θ_c′: five laws.
    Five,
    /// θ = θ_c: six laws (branch 2 merged into 3).
    AtThetaC,
    /// θ < θ_c: seven laws.
    Seven,
}

impl Regime {
    pub fn of(theta: Coupling) -> Regime {
        let t = theta.value();
        let tc = algebra::cubic_critical_theta().value();
        let tcp = algebra::theta_c_prime().value();
        if (t - tcp).abs() <= CRITICAL_TOL {
            Regime::AtThetaCPrime
        } else if t > tcp {
            Regime::Unique
        } else if (t - tc).abs() <= CRITICAL_TOL {
            Regime::AtThetaC
        } else if t > tc {
            Regime::Five
        } else {
            Regime::Seven
        }
    }

    pub fn law_count(self) -> usize {
        match self {
            Regime::Unique => 1,
            Regime::AtThetaCPrime => 3,
            Regime::Five => 5,
            Regime::AtThetaC => 6,
            Regime::Seven => 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionCatalog {
    pub theta: Coupling,
    pub regime: Regime,
    pub laws: Vec<BoundaryLaw>,
}

impl SolutionCatalog {
    pub fn get(&self, branch: Branch) -> Option<&BoundaryLaw> {
        self.laws.iter().find(|l| l.branch == branch)
    }

    pub fn require(&self, branch: Branch) -> Result<&BoundaryLaw> {
        self.get(branch).ok_or_else(|| {
            Error::domain(format!("branch {branch} does not exist at θ = {} ({:?})", self.theta, self.regime))
        })
    }

    pub fn branches(&self) -> Vec<Branch> {
        self.laws.iter().map(|l| l.branch).collect()
    }

    pub fn len(&self) -> usize {
        self.laws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.laws.is_empty()
    }
}

/// The two solutions of `x + 1/x = ξ`, smaller first. Their product is 1.
pub fn x_pair_from_xi(xi: f64) -> Result<(f64, f64)> {
    if !(xi >= 2.0) {
        return Err(Error::domain(format!("x + 1/x = ξ has no positive solution for ξ = {xi} < 2")));
    }
    let s = (xi * xi - 4.0).sqrt();
    let plus = 0.5 * (xi + s);
    // 2/(ξ + s) equals (ξ − s)/2 without the cancellation for large ξ.
    Ok((1.0 / plus, plus))
}

/// `y = √(((1−θ²)x − θ²(x²+1)) / θ)` for an asymmetric law.
pub fn y_from_x(theta: Coupling, x: f64) -> Result<f64> {
    let t = theta.value();
    let radicand = (1.0 - t * t) * x - t * t * (x * x + 1.0);
    if !(radicand > 0.0) {
        return Err(Error::domain(format!(
            "(1−θ²)x − θ²(x²+1) = {radicand:e} is not positive at θ = {t}, x = {x}"
        )));
    }
    Ok((radicand / t).sqrt())
}

/// `(x − RHS_a, y − RHS_b)` of the two fixed-point equations
/// `x = (x² + θy² + θ²)/(θ²x² + θy² + 1)` and `y = (θx² + y² + θ)/(θ²x² + θy² + 1)`.
pub fn system_residual(theta: Coupling, x: f64, y: f64) -> (f64, f64) {
    let t = theta.value();
    let (x2, y2) = (x * x, y * y);
    let den = t * t * x2 + t * y2 + 1.0;
    (x - (x2 + t * y2 + t * t) / den, y - (t * x2 + y2 + t) / den)
}

/// Largest of the two residual components, each scaled by `max(1, |·|)`.
pub fn scaled_residual(theta: Coupling, x: f64, y: f64) -> f64 {
    let (ra, rb) = system_residual(theta, x, y);
    (ra.abs() / x.abs().max(1.0)).max(rb.abs() / y.abs().max(1.0))
}

/// The law obtained by the spin flip `j ↦ 2 − j`: `(x, y) ↦ (1/x, y/x)`.
pub fn mirror_image(law: &BoundaryLaw) -> BoundaryLaw {
    BoundaryLaw { x: 1.0 / law.x, y: law.y / law.x, branch: law.branch.mirror() }
}

/// All translation-invariant boundary laws at `theta`.
pub fn enumerate_tisgms(theta: Coupling) -> Result<SolutionCatalog> {
    let regime = Regime::of(theta);
    let mut laws = Vec::with_capacity(7);

    let cubic = algebra::solve_cubic_y(theta)?;
    let ys = cubic.roots();
    let symmetric_branches: &[u8] = match (regime, ys.len()) {
        (Regime::Seven, 3) => &[3, 2, 1],
        (Regime::AtThetaC, 2) => &[3, 1],
        (Regime::Five | Regime::AtThetaCPrime | Regime::Unique, 1) => &[1],
        _ => {
            return Err(Error::invariant(format!(
                "cubic has {} positive roots at θ = {theta}, inconsistent with regime {regime:?}",
                ys.len()
            )))
        }
    };
    for (&y, &id) in ys.iter().zip(symmetric_branches) {
        laws.push(BoundaryLaw { x: 1.0, y, branch: Branch(id) });
    }

    if regime != Regime::Unique {
        let xis = algebra::solve_xi(theta)?;
        match xis.roots() {
            [xi] => {
                let (lo, hi) = x_pair_from_xi(*xi)?;
                laws.push(asymmetric(theta, lo, 4)?);
                laws.push(asymmetric(theta, hi, 6)?);
            }
            [xi1, xi2] => {
                let (x5, x6) = x_pair_from_xi(*xi1)?;
                let (x4, x7) = x_pair_from_xi(*xi2)?;
                laws.push(asymmetric(theta, x4, 4)?);
                laws.push(asymmetric(theta, x5, 5)?);
                laws.push(asymmetric(theta, x6, 6)?);
                laws.push(asymmetric(theta, x7, 7)?);
            }
            other => {
                return Err(Error::invariant(format!(
                    "ξ equation has {} roots at θ = {theta}, inconsistent with regime {regime:?}",
                    other.len()
                )))
            }
        }
    }
    laws.sort_by_key(|l| l.branch);

    for law in &laws {
        let r = scaled_residual(theta, law.x, law.y);
        if r > LAW_RESIDUAL_TOL {
            return Err(Error::invariant(format!(
                "branch {} at θ = {theta} has fixed-point residual {r:e}",
                law.branch
            )));
        }
    }
    if laws.len() != regime.law_count() {
        return Err(Error::invariant(format!(
            "found {} laws at θ = {theta}, regime {regime:?} requires {}",
            laws.len(),
            regime.law_count()
        )));
    }
    Ok(SolutionCatalog { theta, regime, laws })
}

fn asymmetric(theta: Coupling, x: f64, id: u8) -> Result<BoundaryLaw> {
    Ok(BoundaryLaw { x, y: y_from_x(theta, x)?, branch: Branch(id) })
}
