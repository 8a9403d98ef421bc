//! Critical couplings where the solution count or an extremality indicator
//! changes, and the tabulated phase diagram.

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{
    bisect, cubic_critical_theta, cubic_discriminant, scan_for_sign_change, theta_c_prime, xi_discriminant_factor,
    Coupling, THETA_MAX, THETA_MIN,
};
use crate::boundary::{enumerate_tisgms, Branch};
use crate::channel::spectral_summary;
use crate::error::{Error, Result};
use crate::extremality::{classify_law, msw_indicator, msw_indicator_general, u1_printed, ExtremalityReport};

pub const SCAN_STEP: f64 = 1e-3;
pub const ROOT_TOL: f64 = 1e-13;
/// Offset from θ_c and θ_c′ so that bracket ends stay strictly inside the
/// interval where branches 4–7 exist.
const EDGE_OFFSET: f64 = 1e-7;

/// A scalar function of θ whose sign change defines a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Indicator {
    /// Kesten–Stigum `η = 2λ_max² − 1`.
    Eta(Branch),
    /// `2κγ̂ − 1` with the closed-form κ.
    Msw(Branch),
    /// `2κγ̂ − 1` with κ from the general formula.
    MswGeneral(Branch),
    /// Branch-1 indicator with `(1−θ)²` in the numerator.
    MswPrinted1,
}

impl Indicator {
    pub fn eval(self, theta: f64) -> Result<f64> {
        let th = Coupling::new(theta)?;
        match self {
            Indicator::Eta(b) => Ok(spectral_summary(th, b)?.eta),
            Indicator::Msw(b) => msw_indicator(th, b),
            Indicator::MswGeneral(b) => msw_indicator_general(th, b),
            Indicator::MswPrinted1 => u1_printed(th),
        }
    }

    pub fn name(self) -> String {
        match self {
            Indicator::Eta(b) => format!("eta{b}"),
            Indicator::Msw(b) => format!("U{b}"),
            Indicator::MswGeneral(b) => format!("U{b}_general"),
            Indicator::MswPrinted1 => "U1_printed".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Threshold {
    pub value: f64,
    /// Scan interval that contained the sign change.
    pub bracket: (f64, f64),
    /// `|indicator(value)|`.
    pub residual: f64,
    pub indicator: String,
}

/// First sign change of `indicator` on `[lo, hi]`, refined by bisection.
pub fn find_root_in(indicator: Indicator, lo: f64, hi: f64) -> Result<Threshold> {
    let f = |t: f64| indicator.eval(t).unwrap_or(f64::NAN);
    let bracket = scan_for_sign_change(f, lo, hi, SCAN_STEP).ok_or_else(|| Error::NoSignChange {
        indicator: indicator.name(),
        lo,
        hi,
    })?;
    let value = bisect(f, bracket.0, bracket.1, ROOT_TOL)?;
    Ok(Threshold { value, bracket, residual: indicator.eval(value)?.abs(), indicator: indicator.name() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSet {
    /// Onset of branches 2, 3.
    pub theta_c: Threshold,
    /// Onset of branches 4–7.
    pub theta_c_prime: Threshold,
    /// Branches 5, 6 are non-extreme below.
    pub theta_star: Threshold,
    /// Branches 5, 6 are extreme above.
    pub theta_double_star: Threshold,
    /// Branch 1 is extreme below.
    pub theta_bar: Threshold,
    /// Branch 1 is non-extreme above.
    pub theta_double_bar: Threshold,
    /// Largest difference between the branch-5 thresholds and the same
    /// thresholds recomputed on branch 6.
    pub mirror_deviation: f64,
}

impl ThresholdSet {
    pub fn values(&self) -> [f64; 6] {
        [
            self.theta_c.value,
            self.theta_star.value,
            self.theta_double_star.value,
            self.theta_c_prime.value,
            self.theta_bar.value,
            self.theta_double_bar.value,
        ]
    }

    /// `θ_c < θ* < θ** < θ_c′ < 1 < θ̄ < θ̄̄`.
    pub fn is_ordered(&self) -> bool {
        let v = self.values();
        v[..4].windows(2).all(|w| w[0] < w[1]) && v[3] < 1.0 && 1.0 < v[4] && v[4] < v[5]
    }

    pub fn max_residual(&self) -> f64 {
        self.all().iter().map(|t| t.residual).fold(0.0, f64::max)
    }

    pub fn all(&self) -> [&Threshold; 6] {
        [
            &self.theta_c,
            &self.theta_c_prime,
            &self.theta_star,
            &self.theta_double_star,
            &self.theta_bar,
            &self.theta_double_bar,
        ]
    }

    /// Width of branch 1's undetermined window.
    pub fn bar_gap(&self) -> f64 {
        self.theta_double_bar.value - self.theta_bar.value
    }

    /// Width of the undetermined window of branches 5, 6.
    pub fn star_gap(&self) -> f64 {
        self.theta_double_star.value - self.theta_star.value
    }
}

fn branch(id: u8) -> Branch {
    Branch::new(id).expect("valid branch id")
}

pub fn find_all_thresholds() -> Result<ThresholdSet> {
    let tc = cubic_critical_theta().value();
    let tcp = theta_c_prime().value();
    let theta_c = Threshold {
        value: tc,
        bracket: (0.1, 0.2),
        residual: cubic_discriminant(tc).abs(),
        indicator: "cubic discriminant".into(),
    };
    let theta_c_prime = Threshold {
        value: tcp,
        bracket: (tcp, tcp),
        residual: xi_discriminant_factor(tcp).abs(),
        indicator: "xi discriminant".into(),
    };

    let (lo, hi) = (tc + EDGE_OFFSET, tcp - EDGE_OFFSET);
    let (star, (double_bar, bar)) = rayon::join(
        || find_root_in(Indicator::Eta(branch(5)), lo, hi),
        || {
            rayon::join(
                || find_root_in(Indicator::Eta(branch(1)), 2.0, 4.0),
                || find_root_in(Indicator::Msw(branch(1)), 1.0 + SCAN_STEP, 4.0),
            )
        },
    );
    let star = star?;
    let double_star = find_root_in(Indicator::Msw(branch(5)), star.value, hi)?;

    let star6 = find_root_in(Indicator::Eta(branch(6)), lo, hi)?;
    let double_star6 = find_root_in(Indicator::Msw(branch(6)), star6.value, hi)?;
    let mirror_deviation = (star6.value - star.value).abs().max((double_star6.value - double_star.value).abs());

    Ok(ThresholdSet {
        theta_c,
        theta_c_prime,
        theta_star: star,
        theta_double_star: double_star,
        theta_bar: bar?,
        theta_double_bar: double_bar?,
        mirror_deviation,
    })
}

/// Thresholds computed from alternative forms of the indicators, for comparison
/// with the primary set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdAudit {
    /// Root of the branch-1 indicator with the `(1−θ)²` numerator, if it changes sign on (1, 4).
    pub theta_bar_printed: Option<Threshold>,
    /// Value of that indicator at the primary θ̄.
    pub u1_printed_at_theta_bar: f64,
    /// θ** recomputed with κ from the general formula.
    pub theta_double_star_general: Option<Threshold>,
}

pub fn audit_thresholds(set: &ThresholdSet) -> Result<ThresholdAudit> {
    let hi = theta_c_prime().value() - EDGE_OFFSET;
    let theta_bar_printed = match find_root_in(Indicator::MswPrinted1, 1.0 + SCAN_STEP, 4.0) {
        Ok(t) => Some(t),
        Err(Error::NoSignChange { .. }) => None,
        Err(e) => return Err(e),
    };
    let theta_double_star_general = match find_root_in(Indicator::MswGeneral(branch(5)), set.theta_star.value, hi) {
        Ok(t) => Some(t),
        Err(Error::NoSignChange { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(ThresholdAudit {
        theta_bar_printed,
        u1_printed_at_theta_bar: Indicator::MswPrinted1.eval(set.theta_bar.value)?,
        theta_double_star_general,
    })
}

/// All measures at one grid coupling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRow {
    pub theta: Coupling,
    pub count: usize,
    pub reports: Vec<ExtremalityReport>,
}

/// Evenly spaced grid with `steps` points from `theta_min` to `theta_max`.
pub fn theta_grid(theta_min: f64, theta_max: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 1 && theta_min == theta_max {
        Coupling::new(theta_min)?;
        return Ok(vec![theta_min]);
    }
    if !(theta_min > 0.0 && theta_min < theta_max) || steps < 2 {
        return Err(Error::domain(format!(
            "need 0 < theta_min < theta_max and steps ≥ 2, got [{theta_min}, {theta_max}] with {steps} steps"
        )));
    }
    if theta_min < THETA_MIN || theta_max > THETA_MAX {
        return Err(Error::domain(format!("θ range must lie within [{THETA_MIN}, {THETA_MAX}]")));
    }
    let h = (theta_max - theta_min) / (steps - 1) as f64;
    Ok((0..steps).map(|i| if i + 1 == steps { theta_max } else { theta_min + i as f64 * h }).collect())
}

pub fn phase_row(theta: Coupling) -> Result<PhaseRow> {
    let catalog = enumerate_tisgms(theta)?;
    let reports = catalog.laws.iter().map(|law| classify_law(theta, law)).collect::<Result<Vec<_>>>()?;
    Ok(PhaseRow { theta, count: reports.len(), reports })
}

/// Phase diagram over an even grid. Rows are in ascending θ regardless of
/// how the work is scheduled.
pub fn phase_diagram(theta_min: f64, theta_max: f64, steps: usize) -> Result<Vec<PhaseRow>> {
    theta_grid(theta_min, theta_max, steps)?
        .into_par_iter()
        .map(|t| phase_row(Coupling::new(t)?))
        .collect()
}
