//! Linearization of a pointwise closed loop about its setpoint.

use crate::controllers::{apply, Controller, Law};
use crate::error::{Result, SwarmError};
use crate::grid::{divergence, ScalarField, VectorField};

const FIXED_POINT_TOL: f64 = 1e-6;

/// `b(x) = k(x, μ, μ) + μ ∂_ρ k(x, μ, μ)`, the transport field of the
/// linearized error dynamics `∂e/∂t = -∇·(e b)`.
///
/// Fails with [`SwarmError::NotAFixedPoint`] unless `‖∇·(μ K(μ, μ))‖_∞ ≤ 1e-6`.
pub fn linearize_pointwise(controller: &Controller, mu: &ScalarField) -> Result<VectorField> {
    let grid = mu.grid();
    let law = match controller.law() {
        Law::Zero => return Ok(VectorField::zeros(grid)),
        Law::ErrorGradient => {
            return Err(SwarmError::InvalidArgument(format!(
                "'{}' is not a pointwise controller",
                controller.name()
            )))
        }
        Law::Pointwise(p) => p,
    };
    let k = apply(controller, mu, mu)?;
    let residual = divergence(&k.scaled_by(mu)?).values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if residual > FIXED_POINT_TOL {
        return Err(SwarmError::NotAFixedPoint { residual });
    }
    let mut b = VectorField::from_fn(grid, |_| [0.0; 2]);
    for (idx, v) in b.values_mut().iter_mut().enumerate() {
        let x = grid.center(idx);
        let m = mu.get(idx);
        let k0 = law.k(x, m, m);
        let dk = law.d_rho(x, m, m);
        *v = [k0[0] + m * dk[0], k0[1] + m * dk[1]];
        if grid.dim() == 1 {
            v[1] = 0.0;
        }
    }
    Ok(b)
}
