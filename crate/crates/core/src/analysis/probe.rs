//! Pairings of an error sequence against fixed test functions.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Result, SwarmError};
use crate::grid::{GridSpec, ScalarField};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    /// `pairings[j][t] = ⟨ψ_j, e_t⟩`.
    pub pairings: Vec<Vec<f64>>,
    /// `max_t |⟨ψ_j, e_t⟩|`.
    pub max_abs: Vec<f64>,
    /// `|⟨ψ_j, e_T⟩| / max_t |⟨ψ_j, e_t⟩|` at the last sample, 0 when all vanish.
    pub final_ratio: Vec<f64>,
}

pub fn weak_convergence_probe(fields: &[ScalarField], tests: &[ScalarField]) -> Result<ProbeReport> {
    let mut pairings = Vec::with_capacity(tests.len());
    for psi in tests {
        let mut row = Vec::with_capacity(fields.len());
        for e in fields {
            if e.grid() != psi.grid() {
                return Err(SwarmError::GridMismatch);
            }
            row.push(psi.inner(e));
        }
        pairings.push(row);
    }
    let max_abs: Vec<f64> = pairings.iter().map(|r| r.iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect();
    let final_ratio = pairings
        .iter()
        .zip(&max_abs)
        .map(|(r, m)| match r.last() {
            Some(v) if *m > 0.0 => v.abs() / m,
            _ => 0.0,
        })
        .collect();
    Ok(ProbeReport { pairings, max_abs, final_ratio })
}

/// `cos(πk x / L_x) cos(πl y / L_y)` for `0 ≤ k, l ≤ kmax`, `(k, l) ≠ (0, 0)`,
/// ordered by `l` then `k`. In 1D only `l = 0`.
pub fn cosine_dictionary(grid: &GridSpec, kmax: usize) -> Vec<ScalarField> {
    let lmax = if grid.dim() == 2 { kmax } else { 0 };
    let mut out = Vec::new();
    for l in 0..=lmax {
        for k in 0..=kmax {
            if k == 0 && l == 0 {
                continue;
            }
            let (lx, ly) = (grid.extent(0), if grid.dim() == 2 { grid.extent(1) } else { 1.0 });
            out.push(ScalarField::from_fn(grid, |p| {
                (PI * k as f64 * p[0] / lx).cos() * (PI * l as f64 * p[1] / ly).cos()
            }));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::heat_reference;

    #[test]
    fn zero_error_pairs_to_zero() {
        let g = GridSpec::unit_square(8).unwrap();
        let r = weak_convergence_probe(&[ScalarField::zeros(&g)], &cosine_dictionary(&g, 2)).unwrap();
        assert!(r.max_abs.iter().all(|m| *m == 0.0));
        assert_eq!(r.pairings.len(), 8);
    }

    #[test]
    fn heat_pairing_decays_at_first_eigenvalue() {
        let g = GridSpec::unit_interval(128).unwrap();
        let e0 = ScalarField::from_fn(&g, |p| (PI * p[0]).cos() + 0.5 * (3.0 * PI * p[0]).cos());
        let ts = [0.0, 0.05, 0.1, 0.2];
        let fields: Vec<ScalarField> = ts.iter().map(|t| heat_reference(&e0, *t, None).unwrap()).collect();
        let r = weak_convergence_probe(&fields, &cosine_dictionary(&g, 1)).unwrap();
        for (k, t) in ts.iter().enumerate() {
            let ratio = r.pairings[0][k] / r.pairings[0][0];
            assert!((ratio / (-PI * PI * t).exp() - 1.0).abs() < 0.02);
        }
    }
}
