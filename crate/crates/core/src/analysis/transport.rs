//! Diffusion-free linear transport `∂e/∂t = -∇·(e b)` by backtracking.

use crate::error::{Result, SwarmError};
use crate::grid::ScalarField;
use crate::velocity::Velocity;

use super::flow::{orbit, Reversed};

#[derive(Clone, Debug, PartialEq)]
pub struct TransportRun {
    pub times: Vec<f64>,
    pub fields: Vec<ScalarField>,
    /// `⟨e_t, 1⟩` before the conservative correction, per time.
    pub mean_defects: Vec<f64>,
}

impl TransportRun {
    pub fn l1_norms(&self) -> Vec<f64> {
        self.fields.iter().map(ScalarField::norm_l1).collect()
    }

    pub fn l2_norms(&self) -> Vec<f64> {
        self.fields.iter().map(ScalarField::norm_l2).collect()
    }

    /// `max_t |‖e_t‖₁ - ‖e₀‖₁| / ‖e₀‖₁`.
    pub fn l1_drift(&self) -> f64 {
        let n = self.l1_norms();
        let n0 = n[0];
        if n0 == 0.0 {
            return 0.0;
        }
        n.iter().map(|v| (v - n0).abs() / n0).fold(0.0, f64::max)
    }
}

/// `e_t(y) = e₀(φ_t⁻¹ y) / J(t, φ_t⁻¹ y)` on every cell center `y`.
///
/// The inverse flow and its Jacobian come from one RK4 orbit of `-b` per
/// cell; `e₀` is read by bilinear interpolation. Interpolation breaks the
/// exact zero mean slightly, so each field is corrected by removing the
/// defect in proportion to `|e_t|`; the raw defects are reported.
pub fn transport_linear(e0: &ScalarField, b: &dyn Velocity, t_grid: &[f64], step: f64) -> Result<TransportRun> {
    let grid = e0.grid();
    if b.dim() != grid.dim() {
        return Err(SwarmError::GridMismatch);
    }
    if e0.mass().abs() > 1e-9 * e0.norm_l1().max(1.0) {
        return Err(SwarmError::NotZeroMean { mean: e0.mean() });
    }
    let rev = Reversed(b);
    let nt = t_grid.len();
    let mut raw = vec![vec![0.0; grid.len()]; nt];
    for idx in 0..grid.len() {
        let o = orbit(&rev, grid, grid.center(idx), t_grid, step)?;
        for k in 0..nt {
            // log_j of -b is -∫ div b, i.e. 1 / J(t, x) at the foot point
            raw[k][idx] = e0.interpolate(o.positions[k]) * o.log_j[k].exp();
        }
    }
    let mut fields = Vec::with_capacity(nt);
    let mut mean_defects = Vec::with_capacity(nt);
    for values in raw {
        let total: f64 = values.iter().sum();
        let abs_total: f64 = values.iter().map(|v| v.abs()).sum();
        mean_defects.push(total * grid.cell_volume());
        let corrected = if abs_total > 0.0 {
            values.iter().map(|v| v - total * v.abs() / abs_total).collect()
        } else {
            values
        };
        fields.push(ScalarField::new(grid.clone(), corrected)?);
    }
    Ok(TransportRun { times: t_grid.to_vec(), fields, mean_defects })
}
