//! Zero-mean Neumann Poisson solve and the `Ḣ⁻¹` norm.

use crate::error::{Result, SwarmError};
use crate::grid::{laplacian, ScalarField};

#[derive(Clone, Debug, PartialEq)]
pub struct PoissonSolution {
    pub phi: ScalarField,
    pub iterations: usize,
    pub relative_residual: f64,
}

const REL_TOL: f64 = 1e-10;

/// Solves `-Δφ = e` for zero-mean `φ` by conjugate gradients restricted to
/// the complement of the constants.
pub fn solve_neumann_poisson(e: &ScalarField) -> Result<PoissonSolution> {
    let integral = e.mass();
    if integral.abs() > 1e-9 {
        return Err(SwarmError::NotZeroMean { mean: integral / e.grid().volume() });
    }
    let grid = e.grid().clone();
    let rhs = e.zero_mean();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let project = |v: &mut [f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|x| *x -= m);
    };

    let b_norm = dot(rhs.values(), rhs.values()).sqrt();
    let mut phi = vec![0.0; grid.len()];
    if b_norm == 0.0 {
        return Ok(PoissonSolution { phi: ScalarField::from_raw(grid, phi), iterations: 0, relative_residual: 0.0 });
    }
    let mut r = rhs.values().to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let cap = 20 * grid.len() + 1000;
    for it in 1..=cap {
        let ap: Vec<f64> = laplacian(&ScalarField::from_raw(grid.clone(), p.clone()))
            .into_values()
            .into_iter()
            .map(|x| -x)
            .collect();
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(SwarmError::SolverDiverged { iterations: it, residual: rr.sqrt() / b_norm });
        }
        let alpha = rr / pap;
        for k in 0..phi.len() {
            phi[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        project(&mut r);
        let rr_new = dot(&r, &r);
        let rel = rr_new.sqrt() / b_norm;
        if rel <= REL_TOL {
            project(&mut phi);
            return Ok(PoissonSolution { phi: ScalarField::from_raw(grid, phi), iterations: it, relative_residual: rel });
        }
        let beta = rr_new / rr;
        for k in 0..p.len() {
            p[k] = r[k] + beta * p[k];
        }
        project(&mut p);
        rr = rr_new;
    }
    Err(SwarmError::SolverDiverged { iterations: cap, residual: rr.sqrt() / b_norm })
}

/// `‖e‖_{Ḣ⁻¹} = ⟨e, φ⟩^{1/2}` with `-Δφ = e`.
pub fn h_minus1_norm(e: &ScalarField) -> Result<f64> {
    let sol = solve_neumann_poisson(e)?;
    Ok(e.inner(&sol.phi).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{gradient, GridSpec};
    use std::f64::consts::PI;

    #[test]
    fn zero_field() {
        let g = GridSpec::unit_interval(32).unwrap();
        assert_eq!(h_minus1_norm(&ScalarField::zeros(&g)).unwrap(), 0.0);
    }

    #[test]
    fn cosine_eigenfunction() {
        let g = GridSpec::unit_interval(256).unwrap();
        let e = ScalarField::from_fn(&g, |p| (PI * p[0]).cos());
        let v = h_minus1_norm(&e).unwrap();
        let exact = 1.0 / (PI * 2f64.sqrt());
        assert!((v / exact - 1.0).abs() < 0.01, "{v}");
    }

    #[test]
    fn homogeneity_and_energy_identity() {
        let g = GridSpec::new(2, &[1.0, 1.5], &[24, 30]).unwrap();
        let e = ScalarField::from_fn(&g, |p| (PI * p[0]).cos() + 0.5 * (2.0 * PI * p[1] / 1.5).cos() * p[0]).zero_mean();
        let a = h_minus1_norm(&e).unwrap();
        let b = h_minus1_norm(&e.scale(2.0)).unwrap();
        assert!((b - 2.0 * a).abs() <= 1e-10 * b);
        let sol = solve_neumann_poisson(&e).unwrap();
        let gp = gradient(&sol.phi);
        assert!((gp.inner(&gp) - a * a).abs() <= 1e-8 * a * a);
    }

    #[test]
    fn rejects_nonzero_mean() {
        let g = GridSpec::unit_interval(16).unwrap();
        assert!(matches!(h_minus1_norm(&ScalarField::constant(&g, 0.1)), Err(SwarmError::NotZeroMean { .. })));
    }
}
