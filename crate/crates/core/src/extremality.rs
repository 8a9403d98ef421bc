//! Kesten–Stigum and Martinelli–Sinclair–Weitz indicators, and the
//! resulting three-valued extremality verdict.

use serde::Serialize;

use crate::algebra::Coupling;
use crate::boundary::{enumerate_tisgms, BoundaryLaw, Branch};
use crate::channel::{build_channel, summarize, Channel};
use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-12;

/// `|1−θ²|/(1+θ²)`, an upper bound on the upward disagreement rate γ.
pub fn gamma_upper_bound(theta: Coupling) -> f64 {
    let t2 = theta.value() * theta.value();
    (1.0 - t2).abs() / (1.0 + t2)
}

fn check_simplex(t: f64, u: f64) -> Result<()> {
    let ok = t.is_finite() && u.is_finite() && t >= -SIMPLEX_TOL && u >= -SIMPLEX_TOL && t + u <= 1.0 + SIMPLEX_TOL;
    if ok {
        Ok(())
    } else {
        Err(Error::domain(format!("(t, u) = ({t}, {u}) is not in the probability simplex")))
    }
}

/// The two denominators shared by `f` and `g`: the normalizers of `p⁰` and `p²`.
fn fg_denominators(t: f64, u: f64, theta: f64, law: &BoundaryLaw) -> (f64, f64) {
    let (x2, y2) = (law.x * law.x, law.y * law.y);
    let d0 = (x2 - theta * y2) * t + theta * (theta - y2) * u + theta * y2;
    let d2 = theta * (theta * x2 - y2) * t + (1.0 - theta * y2) * u + theta * y2;
    (d0, d2)
}

/// `f(t, u) = p⁰(0) − p²(0)` with `t = p₀`, `u = p₂`.
pub fn disagreement_f(t: f64, u: f64, theta: Coupling, law: &BoundaryLaw) -> Result<f64> {
    check_simplex(t, u)?;
    let th = theta.value();
    let x2 = law.x * law.x;
    let (d0, d2) = fg_denominators(t, u, th, law);
    Ok(x2 * t / d0 - x2 * th * th * t / d2)
}

/// `g(t, u) = p²(2) − p⁰(2)` with `t = p₀`, `u = p₂`.
pub fn disagreement_g(t: f64, u: f64, theta: Coupling, law: &BoundaryLaw) -> Result<f64> {
    check_simplex(t, u)?;
    let th = theta.value();
    let (d0, d2) = fg_denominators(t, u, th, law);
    Ok(u / d2 - th * th * u / d0)
}

/// Distribution of a site given that its boundary neighbour is pinned to
/// `parent_spin`, when the free distribution of the site is `p`.
pub fn conditional_spin_probs(p: [f64; 3], parent_spin: usize, theta: Coupling, law: &BoundaryLaw) -> Result<[f64; 3]> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|v| !(*v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("{p:?} is not a probability vector")));
    }
    if parent_spin > 2 {
        return Err(Error::domain(format!("spin {parent_spin} is not in {{0, 1, 2}}")));
    }
    let th = theta.value();
    let z = [law.x * law.x, law.y * law.y, 1.0];
    let w: [f64; 3] = std::array::from_fn(|s| th.powi(parent_spin.abs_diff(s) as i32) * z[s] * p[s]);
    let total: f64 = w.iter().sum();
    Ok(w.map(|v| v / total))
}

/// Half the largest L1 distance between two rows of the channel.
pub fn kappa_row_l1(ch: &Channel) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..3 {
        for j in i + 1..3 {
            let d: f64 = (0..3).map(|l| (ch.p[i][l] - ch.p[j][l]).abs()).sum();
            best = best.max(d);
        }
    }
    best / 2.0
}

/// The expanded three-term formula for κ.
pub fn kappa_general(theta: Coupling, law: &BoundaryLaw) -> f64 {
    let (t, x, y) = (theta.value(), law.x, law.y);
    let z = t * t * x * x + t * y * y + 1.0;
    let a = (x * x * (y - t * x).abs() + (y * y + t) * (x - t * y).abs()) / (x * y);
    let b = (x * x * (1.0 - t * t * x).abs() + t * y * y * (1.0 - x).abs() + (t * t - x).abs()) / x;
    let c = ((t * x * x + y * y) * (1.0 - t * y).abs() + (t - y).abs()) / y;
    a.max(b).max(c) / (2.0 * z)
}

/// κ from the per-branch closed forms. Branches 2 and 3 have none and use
/// [`kappa_general`].
pub fn kappa_closed_form_law(theta: Coupling, law: &BoundaryLaw) -> f64 {
    let (t, x, y) = (theta.value(), law.x, law.y);
    let z = 1.0 + t * t * x * x + t * y * y;
    let c = 1.0 - t * t;
    match law.branch.id() {
        1 => c.abs() / (1.0 + t * t + t * y * y),
        4 => c * (t * y * y + (t * t + 1.0) * x * x) / (x * z * z),
        5 => c * (t * x * x + y * y) / (y * z * z),
        6 | 7 => x * c * (y * y + t) / (y * z * z),
        _ => kappa_general(theta, law),
    }
}

pub fn kappa_closed_form(theta: Coupling, branch: Branch) -> Result<f64> {
    let catalog = enumerate_tisgms(theta)?;
    Ok(kappa_closed_form_law(theta, catalog.require(branch)?))
}

/// `U = 2·κ·γ̂ − 1` with the closed-form κ; negative certifies extremality.
pub fn msw_indicator(theta: Coupling, branch: Branch) -> Result<f64> {
    Ok(2.0 * kappa_closed_form(theta, branch)? * gamma_upper_bound(theta) - 1.0)
}

/// `U` with κ from the general formula.
pub fn msw_indicator_general(theta: Coupling, branch: Branch) -> Result<f64> {
    let catalog = enumerate_tisgms(theta)?;
    Ok(2.0 * kappa_general(theta, catalog.require(branch)?) * gamma_upper_bound(theta) - 1.0)
}

/// The branch-1 indicator written with `(1−θ)²` in place of `(1−θ²)²`.
/// Kept for comparison only; it does not bound `2κγ − 1`.
pub fn u1_printed(theta: Coupling) -> Result<f64> {
    let catalog = enumerate_tisgms(theta)?;
    let y = catalog.require(Branch::new(1)?)?.y;
    let t = theta.value();
    Ok(2.0 * (1.0 - t).powi(2) / ((1.0 + t * t) * (1.0 + t * t + t * y * y)) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    NonExtreme,
    Extreme,
    Undetermined,
}

impl Verdict {
    pub fn from_indicators(eta: f64, u: f64) -> Self {
        if eta > 0.0 {
            Verdict::NonExtreme
        } else if u < 0.0 {
            Verdict::Extreme
        } else {
            Verdict::Undetermined
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::NonExtreme => "NonExtreme",
            Verdict::Extreme => "Extreme",
            Verdict::Undetermined => "Undetermined",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtremalityReport {
    pub branch: Branch,
    pub theta: Coupling,
    pub law: BoundaryLaw,
    pub lambda1: f64,
    pub lambda2: f64,
    pub eta: f64,
    /// Closed-form κ (general formula for branches 2, 3).
    pub kappa: f64,
    pub kappa_general: f64,
    pub gamma_bound: f64,
    /// `2·kappa·gamma_bound − 1`; drives the verdict.
    pub u: f64,
    /// `2·kappa_general·gamma_bound − 1`.
    pub u_general: f64,
    pub verdict: Verdict,
}

pub fn classify_law(theta: Coupling, law: &BoundaryLaw) -> Result<ExtremalityReport> {
    let spectrum = summarize(theta, law)?;
    let gamma_bound = gamma_upper_bound(theta);
    let kappa = kappa_closed_form_law(theta, law);
    let kg = kappa_general(theta, law);
    let u = 2.0 * kappa * gamma_bound - 1.0;
    Ok(ExtremalityReport {
        branch: law.branch,
        theta,
        law: *law,
        lambda1: spectrum.lambda1,
        lambda2: spectrum.lambda2,
        eta: spectrum.eta,
        kappa,
        kappa_general: kg,
        gamma_bound,
        u,
        u_general: 2.0 * kg * gamma_bound - 1.0,
        verdict: Verdict::from_indicators(spectrum.eta, u),
    })
}

pub fn classify_measure(theta: Coupling, branch: Branch) -> Result<ExtremalityReport> {
    let catalog = enumerate_tisgms(theta)?;
    classify_law(theta, catalog.require(branch)?)
}

/// The simplex point where both `|f|` and `|g|` reach `|1−θ²|/(1+θ²)`.
pub fn gamma_extremal_point(law: &BoundaryLaw) -> (f64, f64) {
    let x2 = law.x * law.x;
    (1.0 / (1.0 + x2), x2 / (1.0 + x2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaGridReport {
    pub theta: Coupling,
    pub branch: Branch,
    pub grid: usize,
    pub max_abs_f: f64,
    pub argmax_f: (f64, f64),
    pub max_abs_g: f64,
    pub argmax_g: (f64, f64),
    pub bound: f64,
    pub expected_argmax: (f64, f64),
    pub pass: bool,
}

/// Maximize `|f|` and `|g|` over `{(i/n, j/n) : i + j ≤ n}` and compare with
/// [`gamma_upper_bound`].
pub fn verify_gamma_grid(theta: Coupling, law: &BoundaryLaw, grid: usize) -> Result<GammaGridReport> {
    if grid == 0 {
        return Err(Error::domain("grid must have at least one step"));
    }
    let n = grid as f64;
    let (mut mf, mut af, mut mg, mut ag) = (0.0f64, (0.0, 0.0), 0.0f64, (0.0, 0.0));
    for i in 0..=grid {
        for j in 0..=grid - i {
            let (t, u) = (i as f64 / n, j as f64 / n);
            let f = disagreement_f(t, u, theta, law)?.abs();
            let g = disagreement_g(t, u, theta, law)?.abs();
            if f > mf {
                (mf, af) = (f, (t, u));
            }
            if g > mg {
                (mg, ag) = (g, (t, u));
            }
        }
    }
    let bound = gamma_upper_bound(theta);
    Ok(GammaGridReport {
        theta,
        branch: law.branch,
        grid,
        max_abs_f: mf,
        argmax_f: af,
        max_abs_g: mg,
        argmax_g: ag,
        bound,
        expected_argmax: gamma_extremal_point(law),
        pass: mf <= bound + 1e-9 && mg <= bound + 1e-9,
    })
}

/// Check a channel against the law it was built from; convenience for callers
/// holding only a [`Channel`].
pub fn kappa_of_channel(ch: &Channel) -> (f64, f64) {
    (kappa_general(ch.theta, &ch.law), kappa_row_l1(ch))
}

/// Build the channel and evaluate both κ forms.
pub fn kappa_pair(theta: Coupling, law: &BoundaryLaw) -> Result<(f64, f64)> {
    Ok(kappa_of_channel(&build_channel(theta, law)?))
}
