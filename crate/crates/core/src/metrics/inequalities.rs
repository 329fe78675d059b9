//! Comparisons between `W₂` and other distances on bounded domains.

use serde::Serialize;

use crate::error::{Result, SwarmError};
use crate::grid::ScalarField;

use super::{h_minus1_norm, lp_distance, w2_1d, w2_exact_small};

const LP_SLACK: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
}

impl InequalityReport {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Checks `W₂² ≤ ½ diam(Ω)² vol(Ω)^{1-1/p} ‖ρ - μ‖_{Lᵖ}` with the exact
/// transport solver.
pub fn check_w2_lp_bound(rho: &ScalarField, mu: &ScalarField, p: f64) -> Result<InequalityReport> {
    let g = rho.grid();
    let w2 = w2_exact_small(rho, mu)?.0;
    let lp = lp_distance(rho, mu, p)?;
    let vol_factor = if p.is_infinite() { g.volume() } else { g.volume().powf(1.0 - 1.0 / p) };
    let report = InequalityReport { lhs: w2 * w2, rhs: 0.5 * g.diameter().powi(2) * vol_factor * lp };
    if report.lhs > report.rhs + LP_SLACK {
        return Err(SwarmError::InequalityViolated { lhs: report.lhs, rhs: report.rhs });
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SandwichReport {
    pub w2: f64,
    pub h_minus1: f64,
    /// `b^{-1/2} ‖ρ - μ‖_{Ḣ⁻¹}`.
    pub lower: f64,
    /// `a^{-1/2} ‖ρ - μ‖_{Ḣ⁻¹}`.
    pub upper: f64,
}

/// Checks `b^{-1/2} ‖ρ - μ‖_{Ḣ⁻¹} ≤ W₂(ρ, μ) ≤ a^{-1/2} ‖ρ - μ‖_{Ḣ⁻¹}` for
/// densities with `a ≤ ρ, μ ≤ b`, allowing a relative `slack`.
///
/// In 1D `W₂` is the exact quantile integral of the piecewise-constant
/// densities; in 2D it is the exact transport cost between cell atoms.
pub fn check_w2_h1_sandwich(rho: &ScalarField, mu: &ScalarField, a: f64, b: f64, slack: f64) -> Result<SandwichReport> {
    if !(0.0 < a && a < b) {
        return Err(SwarmError::InvalidArgument(format!("need 0 < a < b, got a = {a}, b = {b}")));
    }
    let lo = rho.min().min(mu.min());
    let hi = rho.max().max(mu.max());
    if lo < a || hi > b {
        return Err(SwarmError::InvalidArgument(format!("densities span [{lo}, {hi}], outside [{a}, {b}]")));
    }
    let w2 = if rho.grid().dim() == 1 { w2_1d(rho, mu)? } else { w2_exact_small(rho, mu)?.0 };
    let hm1 = h_minus1_norm(&rho.sub(mu)?)?;
    let report = SandwichReport { w2, h_minus1: hm1, lower: hm1 / b.sqrt(), upper: hm1 / a.sqrt() };
    if report.lower > w2 * (1.0 + slack) {
        return Err(SwarmError::InequalityViolated { lhs: report.lower, rhs: w2 });
    }
    if w2 > report.upper * (1.0 + slack) {
        return Err(SwarmError::InequalityViolated { lhs: w2, rhs: report.upper });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use std::f64::consts::PI;

    #[test]
    fn identical_pair() {
        let g = GridSpec::unit_interval(32).unwrap();
        let f = ScalarField::constant(&g, 1.0);
        let r = check_w2_lp_bound(&f, &f, 1.0).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        let s = check_w2_h1_sandwich(&f, &f, 0.5, 1.5, 0.02).unwrap();
        assert_eq!((s.w2, s.lower, s.upper), (0.0, 0.0, 0.0));
    }

    #[test]
    fn extreme_pair_is_nearly_tight() {
        let g = GridSpec::unit_interval(32).unwrap();
        let mut a = ScalarField::zeros(&g);
        let mut b = ScalarField::zeros(&g);
        a.values_mut()[0] = 32.0;
        b.values_mut()[31] = 32.0;
        let r = check_w2_lp_bound(&a, &b, 1.0).unwrap();
        assert!((r.rhs - 1.0).abs() < 1e-12);
        assert!(r.margin() >= 0.0 && r.margin() <= 2.0 * g.h(0));
    }

    #[test]
    fn sandwich_amplitude_scaling() {
        let g = GridSpec::unit_interval(32).unwrap();
        let mu = ScalarField::constant(&g, 1.0);
        let ratio = |t: f64| {
            let rho = ScalarField::from_fn(&g, |p| 1.0 + 0.4 * t * (PI * p[0]).cos());
            let s = check_w2_h1_sandwich(&rho, &mu, 0.5, 1.5, 0.02).unwrap();
            s.w2 / s.h_minus1
        };
        let r1 = ratio(1.0);
        for t in [0.5, 0.25, 0.1] {
            assert!((ratio(t) / r1 - 1.0).abs() <= 0.1);
        }
    }

    #[test]
    fn out_of_band_densities_are_rejected() {
        let g = GridSpec::unit_interval(16).unwrap();
        let f = ScalarField::constant(&g, 1.0);
        let h = ScalarField::from_fn(&g, |p| if p[0] < 0.5 { 1.9 } else { 0.1 });
        assert!(check_w2_h1_sandwich(&h, &f, 0.5, 1.5, 0.02).is_err());
    }
}
