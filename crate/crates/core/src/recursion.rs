//! Boundary-law recursion for general `m` (spins `0..=m`) and branching `k`.
//!
//! `F_i(h) = ln[(Σ_{j<m} θ^{|i−j|} e^{h_j} + θ^{m−i}) / (Σ_{j<m} θ^{m−j} e^{h_j} + 1)]`
//! and the translation-invariant fixed-point map `z_i ↦ (…)^k` with `z_i = e^{h_i}`.
//! For `m = k = 2` this reduces to the system solved exactly in [`crate::boundary`].

use serde::Serialize;

use crate::algebra::Coupling;
use crate::error::{Error, Result};

/// Log-weights `h₀ … h_{m−1}`, each relative to the last spin `m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryField(pub Vec<f64>);

impl BoundaryField {
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::domain("boundary field needs m ≥ 1 components"));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("boundary field components must be finite"));
        }
        Ok(BoundaryField(h))
    }

    pub fn m(&self) -> usize {
        self.0.len()
    }
}

/// A translation-invariant law `(z₀, …, z_{m−1})` on a tree of branching `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiLaw {
    pub z: Vec<f64>,
    pub k: u32,
}

impl TiLaw {
    pub fn new(z: Vec<f64>, k: u32) -> Result<Self> {
        if z.is_empty() || k == 0 {
            return Err(Error::domain("a law needs m ≥ 1 components and k ≥ 1"));
        }
        if z.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::domain(format!("law components must be finite and positive: {z:?}")));
        }
        Ok(TiLaw { z, k })
    }

    pub fn m(&self) -> usize {
        self.z.len()
    }

    pub fn field(&self) -> BoundaryField {
        BoundaryField(self.z.iter().map(|v| v.ln()).collect())
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `F(h, m, θ)`, evaluated with log-sum-exp so large fields do not overflow.
pub fn recursion_f(h: &BoundaryField, m: usize, theta: Coupling) -> Result<BoundaryField> {
    if m == 0 || h.m() != m {
        return Err(Error::domain(format!("field has {} components, expected m = {m}", h.m())));
    }
    let ln_theta = theta.value().ln();
    let den = log_sum_exp(
        h.0.iter()
            .enumerate()
            .map(|(j, &hj)| (m - j) as f64 * ln_theta + hj)
            .chain(std::iter::once(0.0)),
    );
    let out = (0..m)
        .map(|i| {
            let num = log_sum_exp(
                h.0.iter()
                    .enumerate()
                    .map(|(j, &hj)| i.abs_diff(j) as f64 * ln_theta + hj)
                    .chain(std::iter::once((m - i) as f64 * ln_theta)),
            );
            num - den
        })
        .collect();
    Ok(BoundaryField(out))
}

/// Right-hand side of the translation-invariant fixed-point equation.
pub fn ti_fixed_point_map(law: &TiLaw, theta: Coupling) -> TiLaw {
    let t = theta.value();
    let m = law.m();
    let den: f64 = law.z.iter().enumerate().map(|(j, &zj)| t.powi((m - j) as i32) * zj).sum::<f64>() + 1.0;
    let z = (0..m)
        .map(|i| {
            let num: f64 = law
                .z
                .iter()
                .enumerate()
                .map(|(j, &zj)| t.powi(i.abs_diff(j) as i32) * zj)
                .sum::<f64>()
                + t.powi((m - i) as i32);
            (num / den).powi(law.k as i32)
        })
        .collect();
    TiLaw { z, k: law.k }
}

/// The spin-flip `j ↦ m − j` applied to a law, renormalized so the last
/// component is 1 again: `z_i ↦ z_{m−i} / z₀` (with `z_m = 1`).
pub fn mirror_law(law: &TiLaw) -> TiLaw {
    let m = law.m();
    let full = |j: usize| if j == m { 1.0 } else { law.z[j] };
    let z = (0..m).map(|i| full(m - i) / law.z[0]).collect();
    TiLaw { z, k: law.k }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationSettings {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IterationSettings {
    fn default() -> Self {
        IterationSettings { damping: 0.5, tol: 1e-12, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPoint {
    pub law: TiLaw,
    pub iterations: usize,
    /// Largest log-coordinate change in the final step.
    pub last_step: f64,
    /// `max_i |k·F_i(h) − h_i|` at the returned law.
    pub residual: f64,
}

/// Damped iteration `h ← (1−d)·h + d·k·F(h)` in log coordinates.
///
/// Only attracting fixed points can be reached this way; which one depends on
/// the starting law.
pub fn iterate_to_fixed_point(z0: &TiLaw, theta: Coupling, settings: IterationSettings) -> Result<FixedPoint> {
    let IterationSettings { damping, tol, max_iter } = settings;
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::domain(format!("damping must lie in (0, 1], got {damping}")));
    }
    let m = z0.m();
    let k = z0.k as f64;
    let mut h = z0.field();
    let mut last_step = f64::INFINITY;

    for iter in 1..=max_iter {
        let f = recursion_f(&h, m, theta)?;
        last_step = 0.0;
        for (hi, fi) in h.0.iter_mut().zip(&f.0) {
            let next = (1.0 - damping) * *hi + damping * k * fi;
            last_step = last_step.max((next - *hi).abs());
            *hi = next;
        }
        if !last_step.is_finite() {
            return Err(Error::Numeric(format!("iteration diverged at step {iter}")));
        }
        if last_step <= tol {
            let f = recursion_f(&h, m, theta)?;
            let residual = h.0.iter().zip(&f.0).map(|(hi, fi)| (k * fi - hi).abs()).fold(0.0, f64::max);
            let law = TiLaw { z: h.0.iter().map(|v| v.exp()).collect(), k: z0.k };
            return Ok(FixedPoint { law, iterations: iter, last_step, residual });
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, last_step })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra;
    use crate::boundary::{enumerate_tisgms, Branch};

    fn c(t: f64) -> Coupling {
        Coupling::new(t).unwrap()
    }

    #[test]
    fn theta_one_gives_zero_field() {
        let h = BoundaryField::new(vec![0.3, -2.0, 5.0]).unwrap();
        let f = recursion_f(&h, 3, c(1.0)).unwrap();
        assert!(f.0.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn single_component_is_ising_like() {
        let theta: f64 = 0.37;
        for h0 in [-3.0f64, 0.0, 0.8, 40.0] {
            let f = recursion_f(&BoundaryField(vec![h0]), 1, c(theta)).unwrap();
            let expected = ((h0.exp() + theta) / (theta * h0.exp() + 1.0)).ln();
            assert!((f.0[0] - expected).abs() < 1e-12, "h0 = {h0}");
        }
    }

    #[test]
    fn large_fields_do_not_overflow() {
        let f = recursion_f(&BoundaryField(vec![800.0, 750.0]), 2, c(0.3)).unwrap();
        assert!(f.0.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn catalog_laws_are_fixed_points_of_the_general_recursion() {
        let theta = c(0.2);
        for law in enumerate_tisgms(theta).unwrap().laws {
            let h = BoundaryField(vec![2.0 * law.x.ln(), 2.0 * law.y.ln()]);
            let f = recursion_f(&h, 2, theta).unwrap();
            for (hi, fi) in h.0.iter().zip(&f.0) {
                assert!((2.0 * fi - hi).abs() < 1e-10, "{law:?}");
            }
        }
    }

    #[test]
    fn map_fixes_catalog_laws() {
        let theta = c(0.15);
        for law in enumerate_tisgms(theta).unwrap().laws {
            let z = TiLaw::new(law.z().to_vec(), 2).unwrap();
            let image = ti_fixed_point_map(&z, theta);
            for (a, b) in z.z.iter().zip(&image.z) {
                assert!((a - b).abs() <= 1e-10 * a.max(1.0), "{law:?}");
            }
        }
    }

    #[test]
    fn all_ones_is_fixed_at_theta_one() {
        let ones = TiLaw::new(vec![1.0; 4], 3).unwrap();
        assert_eq!(ti_fixed_point_map(&ones, c(1.0)).z, vec![1.0; 4]);
        let other = TiLaw::new(vec![0.2, 7.0, 3.0], 2).unwrap();
        assert!(ti_fixed_point_map(&other, c(1.0)).z.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn map_fixes_unique_law_at_one_half() {
        let theta = c(0.5);
        let y1 = algebra::solve_cubic_y(theta).unwrap().roots()[0];
        let z = TiLaw::new(vec![1.0, y1 * y1], 2).unwrap();
        let image = ti_fixed_point_map(&z, theta);
        assert!((image.z[0] - 1.0).abs() < 1e-10);
        assert!((image.z[1] - y1 * y1).abs() < 1e-10);
    }

    #[test]
    fn iteration_converges_to_unique_law() {
        let theta = c(0.5);
        let start = TiLaw::new(vec![1.0, 1.0], 2).unwrap();
        let fp = iterate_to_fixed_point(&start, theta, IterationSettings::default()).unwrap();
        let y1 = enumerate_tisgms(theta).unwrap().get(Branch::new(1).unwrap()).unwrap().y;
        assert!((fp.law.z[0] - 1.0).abs() < 1e-9);
        assert!((fp.law.z[1] - y1 * y1).abs() < 1e-9);
        assert!(fp.residual < 1e-10);
    }

    #[test]
    fn iteration_at_theta_one_stops_after_two_steps() {
        let start = TiLaw::new(vec![4.0, 0.1], 2).unwrap();
        let settings = IterationSettings { damping: 1.0, ..Default::default() };
        let fp = iterate_to_fixed_point(&start, c(1.0), settings).unwrap();
        assert!(fp.iterations <= 2);
        assert!(fp.law.z.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn iteration_near_asymmetric_law_lands_on_a_fixed_point() {
        let theta = c(0.10);
        let v4 = *enumerate_tisgms(theta).unwrap().get(Branch::new(4).unwrap()).unwrap();
        let start = TiLaw::new(vec![v4.x * v4.x * 1.01, v4.y * v4.y * 0.99], 2).unwrap();
        let settings = IterationSettings::default();
        let fp = iterate_to_fixed_point(&start, theta, settings).unwrap();
        assert!(fp.residual <= 1e-10);
    }

    #[test]
    fn iteration_reports_non_convergence() {
        let start = TiLaw::new(vec![3.0, 0.5], 2).unwrap();
        let settings = IterationSettings { max_iter: 3, ..Default::default() };
        assert!(matches!(
            iterate_to_fixed_point(&start, c(0.3), settings),
            Err(Error::NoConvergence { iterations: 3, .. })
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(TiLaw::new(vec![1.0, -1.0], 2).is_err());
        assert!(TiLaw::new(vec![], 2).is_err());
        assert!(BoundaryField::new(vec![f64::NAN]).is_err());
        let h = BoundaryField(vec![0.0, 0.0]);
        assert!(recursion_f(&h, 3, c(0.5)).is_err());
        let start = TiLaw::new(vec![1.0], 2).unwrap();
        let settings = IterationSettings { damping: 0.0, ..Default::default() };
        assert!(iterate_to_fixed_point(&start, c(0.5), settings).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn log_form_matches_direct_map(
                t in 0.05f64..5.0,
                z in proptest::collection::vec(0.01f64..50.0, 1..5),
                k in 1u32..4,
            ) {
                let theta = Coupling::new(t).unwrap();
                let law = TiLaw::new(z, k).unwrap();
                let direct = ti_fixed_point_map(&law, theta);
                let f = recursion_f(&law.field(), law.m(), theta).unwrap();
                for (d, fi) in direct.z.iter().zip(&f.0) {
                    let via_log = (k as f64 * fi).exp();
                    prop_assert!((d - via_log).abs() <= 1e-12 * d.max(1.0));
                }
            }

            #[test]
            fn map_commutes_with_mirror(
                t in 0.05f64..5.0,
                z in proptest::collection::vec(0.05f64..20.0, 2..4),
                k in 1u32..4,
            ) {
                let theta = Coupling::new(t).unwrap();
                let law = TiLaw::new(z, k).unwrap();
                let a = mirror_law(&ti_fixed_point_map(&law, theta));
                let b = ti_fixed_point_map(&mirror_law(&law), theta);
                for (u, v) in a.z.iter().zip(&b.z) {
                    prop_assert!((u - v).abs() <= 1e-10 * u.max(1.0));
                }
            }
        }
    }
}
