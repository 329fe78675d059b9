//! Distances between densities on a common grid.

mod inequalities;
mod network_simplex;
mod poisson;
mod quantile;
mod sinkhorn;

pub use inequalities::{check_w2_h1_sandwich, check_w2_lp_bound, InequalityReport, SandwichReport};
pub use network_simplex::{w2_exact_small, TransportPlan, MAX_EXACT_CELLS};
pub use poisson::{h_minus1_norm, solve_neumann_poisson, PoissonSolution};
pub use quantile::{w2_1d, w2_1d_with, CellModel};
pub use sinkhorn::{w2_sinkhorn, SinkhornOptions};

use serde::Serialize;

use crate::error::{Result, SwarmError};
use crate::grid::{gradient, ScalarField};

/// A metric value with solver diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub name: String,
    pub value: f64,
    pub iterations: usize,
    /// Final marginal violation (transport solvers) or relative residual.
    pub residual: f64,
}

/// `(Σ |ρ - μ|^p · cell_volume)^{1/p}`; `p = ∞` gives the max norm.
pub fn lp_distance(rho: &ScalarField, mu: &ScalarField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(SwarmError::InvalidArgument(format!("p = {p} must be at least 1")));
    }
    if rho.grid() != mu.grid() {
        return Err(SwarmError::GridMismatch);
    }
    let diffs = rho.values().iter().zip(mu.values()).map(|(a, b)| (a - b).abs());
    if p.is_infinite() {
        return Ok(diffs.fold(0.0, f64::max));
    }
    let vol = rho.grid().cell_volume();
    let s: f64 = if p == 1.0 { diffs.sum() } else if p == 2.0 { diffs.map(|d| d * d).sum() } else { diffs.map(|d| d.powf(p)).sum() };
    Ok((s * vol).powf(1.0 / p))
}

/// Total variation `½ ‖ρ - μ‖_{L¹}`.
pub fn total_variation(rho: &ScalarField, mu: &ScalarField) -> Result<f64> {
    Ok(0.5 * lp_distance(rho, mu, 1.0)?)
}

/// Full Sobolev norm `(‖f‖² + ‖∇f‖²)^{1/2}` with the grid gradient.
pub fn h1_norm(f: &ScalarField) -> f64 {
    let g = gradient(f);
    (f.inner(f) + g.inner(&g)).sqrt()
}

pub(crate) fn check_masses(rho: &ScalarField, mu: &ScalarField) -> Result<(f64, f64)> {
    if rho.grid() != mu.grid() {
        return Err(SwarmError::GridMismatch);
    }
    let (a, b) = (rho.mass(), mu.mass());
    if (a - b).abs() > 1e-9 {
        return Err(SwarmError::MassMismatch { left: a, right: b });
    }
    if let Some(cell) = rho.values().iter().chain(mu.values()).position(|v| *v < 0.0) {
        return Err(SwarmError::InvalidArgument(format!("negative density at flat index {cell}")));
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn lp_examples() {
        let g = GridSpec::unit_interval(256).unwrap();
        let mu = ScalarField::constant(&g, 1.0);
        let rho = ScalarField::from_fn(&g, |p| 1.0 + 0.3 * (PI * p[0]).cos());
        assert_eq!(lp_distance(&mu, &mu, 2.0).unwrap(), 0.0);
        assert!((lp_distance(&rho, &mu, 2.0).unwrap() - 0.3 / 2f64.sqrt()).abs() < 1e-3);
        assert!((lp_distance(&rho, &mu, f64::INFINITY).unwrap() - 0.3 * (PI / 512.0).cos()).abs() < 1e-12);
        assert!(lp_distance(&rho, &mu, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn l1_below_lp_on_unit_interval(vals in proptest::collection::vec(-2.0f64..2.0, 16), p in 1.0f64..6.0) {
            let g = GridSpec::unit_interval(16).unwrap();
            let a = ScalarField::new(g.clone(), vals).unwrap();
            let z = ScalarField::zeros(&g);
            prop_assert!(lp_distance(&a, &z, 1.0).unwrap() <= lp_distance(&a, &z, p).unwrap() * (1.0 + 1e-12) + 1e-15);
        }
    }
}
