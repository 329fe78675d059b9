//! Autonomous velocity fields `b(x)` used as linearized closed loops.

use std::f64::consts::PI;

use crate::error::{Result, SwarmError};
use crate::grid::{gradient, perp_gradient_of_stream, GridSpec, Mat2, ScalarField, Vec2, VectorField};

/// Names accepted by [`named_field`].
pub const FIELD_NAMES: [&str; 3] = ["rotation_stream", "shear_stream", "logistic_1d"];

/// A velocity field that can be queried off-grid.
pub trait Velocity: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, p: Vec2) -> Vec2;

    /// `Db(p)` with rows indexed by component: `j[a][c] = ∂b_a/∂x_c`.
    fn jacobian(&self, p: Vec2) -> Mat2;

    fn divergence(&self, p: Vec2) -> f64 {
        let j = self.jacobian(p);
        if self.dim() == 1 {
            j[0][0]
        } else {
            j[0][0] + j[1][1]
        }
    }

    /// Cell-centered samples on `grid`.
    fn sample(&self, grid: &GridSpec) -> Result<VectorField> {
        if grid.dim() != self.dim() {
            return Err(SwarmError::GridMismatch);
        }
        Ok(VectorField::from_fn(grid, |p| self.value(p)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroField {
    pub dim: usize,
}

impl Velocity for ZeroField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _: Vec2) -> Vec2 {
        [0.0; 2]
    }

    fn jacobian(&self, _: Vec2) -> Mat2 {
        [[0.0; 2]; 2]
    }
}

/// `b = (∂_y ψ, -∂_x ψ)` with `ψ = amp · sin(π x / L_x) · sin(k π y / L_y)`.
///
/// ψ vanishes on the boundary of the box, so `b` is tangent to it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamField {
    pub extent: [f64; 2],
    pub ky: f64,
    pub amp: f64,
}

impl StreamField {
    /// `ψ = sin πx sin πy` on the unit square: a single cell of rigid-like rotation.
    pub fn rotation() -> Self {
        Self { extent: [1.0, 1.0], ky: 1.0, amp: 1.0 }
    }

    /// `ψ = sin(πx) sin(2πy) / 2`: two counter-rotating cells.
    pub fn shear() -> Self {
        Self { extent: [1.0, 1.0], ky: 2.0, amp: 0.5 }
    }

    fn wavenumbers(&self) -> (f64, f64) {
        (PI / self.extent[0], self.ky * PI / self.extent[1])
    }

    pub fn stream(&self, p: Vec2) -> f64 {
        let (a, b) = self.wavenumbers();
        self.amp * (a * p[0]).sin() * (b * p[1]).sin()
    }

    pub fn stream_field(&self, grid: &GridSpec) -> ScalarField {
        ScalarField::from_fn(grid, |p| self.stream(p))
    }
}

impl Velocity for StreamField {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, p: Vec2) -> Vec2 {
        let (a, b) = self.wavenumbers();
        let (sx, cx) = (a * p[0]).sin_cos();
        let (sy, cy) = (b * p[1]).sin_cos();
        [self.amp * b * sx * cy, -self.amp * a * cx * sy]
    }

    fn jacobian(&self, p: Vec2) -> Mat2 {
        let (a, b) = self.wavenumbers();
        let (sx, cx) = (a * p[0]).sin_cos();
        let (sy, cy) = (b * p[1]).sin_cos();
        let psi_xx = -self.amp * a * a * sx * sy;
        let psi_yy = -self.amp * b * b * sx * sy;
        let psi_xy = self.amp * a * b * cx * cy;
        [[psi_xy, psi_yy], [-psi_xx, -psi_xy]]
    }

    /// Discrete perpendicular gradient of the sampled stream function, which
    /// is divergence-free under the grid's conservative divergence.
    fn sample(&self, grid: &GridSpec) -> Result<VectorField> {
        if grid.dim() != 2 {
            return Err(SwarmError::GridMismatch);
        }
        perp_gradient_of_stream(&self.stream_field(grid))
    }
}

/// `b(x) = x (L - x) / L` on `[0, L]`; compressible, vanishing at both walls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogisticField {
    pub length: f64,
}

impl Default for LogisticField {
    fn default() -> Self {
        Self { length: 1.0 }
    }
}

impl LogisticField {
    /// Closed-form flow on the unit interval: `x e^t / (1 - x + x e^t)`.
    pub fn exact_flow(x: f64, t: f64) -> f64 {
        let et = t.exp();
        x * et / (1.0 - x + x * et)
    }

    /// `∂φ_t/∂x = e^t / (1 - x + x e^t)²` on the unit interval.
    pub fn exact_jacobian(x: f64, t: f64) -> f64 {
        let et = t.exp();
        let d = 1.0 - x + x * et;
        et / (d * d)
    }
}

impl Velocity for LogisticField {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, p: Vec2) -> Vec2 {
        [p[0] * (self.length - p[0]) / self.length, 0.0]
    }

    fn jacobian(&self, p: Vec2) -> Mat2 {
        [[1.0 - 2.0 * p[0] / self.length, 0.0], [0.0, 0.0]]
    }
}

/// Adapter presenting a sampled [`VectorField`] as a [`Velocity`].
///
/// Values are bilinearly interpolated; the Jacobian interpolates the
/// cell-centered gradients of each component.
#[derive(Clone, Debug)]
pub struct GridVelocity {
    field: VectorField,
    grads: [VectorField; 2],
}

impl GridVelocity {
    pub fn new(field: VectorField) -> Self {
        let grads = [gradient(&field.component(0)), gradient(&field.component(1))];
        Self { field, grads }
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }
}

impl Velocity for GridVelocity {
    fn dim(&self) -> usize {
        self.field.grid().dim()
    }

    fn value(&self, p: Vec2) -> Vec2 {
        self.field.interpolate(p)
    }

    fn jacobian(&self, p: Vec2) -> Mat2 {
        let g0 = self.grads[0].interpolate(p);
        let g1 = self.grads[1].interpolate(p);
        [g0, g1]
    }

    fn sample(&self, grid: &GridSpec) -> Result<VectorField> {
        if grid == self.field.grid() {
            Ok(self.field.clone())
        } else {
            Err(SwarmError::GridMismatch)
        }
    }
}

/// Looks up a catalog field for the given grid.
pub fn named_field(name: &str, grid: &GridSpec) -> Result<Box<dyn Velocity>> {
    match name {
        "zero" => Ok(Box::new(ZeroField { dim: grid.dim() })),
        "rotation_stream" | "shear_stream" => {
            if grid.dim() != 2 {
                return Err(SwarmError::InvalidArgument(format!("{name} needs a 2D grid")));
            }
            let mut f = if name == "rotation_stream" { StreamField::rotation() } else { StreamField::shear() };
            f.extent = [grid.extent(0), grid.extent(1)];
            Ok(Box::new(f))
        }
        "logistic_1d" => {
            if grid.dim() != 1 {
                return Err(SwarmError::InvalidArgument("logistic_1d needs a 1D grid".into()));
            }
            Ok(Box::new(LogisticField { length: grid.extent(0) }))
        }
        other => Err(SwarmError::InvalidArgument(format!("unknown vector field '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::divergence;

    fn fd_jacobian(v: &dyn Velocity, p: Vec2) -> Mat2 {
        let d = 1e-6;
        let mut j = [[0.0; 2]; 2];
        for c in 0..v.dim() {
            let mut a = p;
            let mut b = p;
            a[c] += d;
            b[c] -= d;
            let (va, vb) = (v.value(a), v.value(b));
            for r in 0..2 {
                j[r][c] = (va[r] - vb[r]) / (2.0 * d);
            }
        }
        j
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let fields: Vec<Box<dyn Velocity>> =
            vec![Box::new(StreamField::rotation()), Box::new(StreamField::shear()), Box::new(LogisticField::default())];
        for f in &fields {
            for p in [[0.3, 0.7], [0.11, 0.52], [0.9, 0.05]] {
                let a = f.jacobian(p);
                let n = fd_jacobian(f.as_ref(), p);
                for r in 0..f.dim() {
                    for c in 0..f.dim() {
                        assert!((a[r][c] - n[r][c]).abs() < 1e-6, "{r}{c}: {} vs {}", a[r][c], n[r][c]);
                    }
                }
            }
        }
    }

    #[test]
    fn stream_fields_are_tangent_and_solenoidal() {
        for f in [StreamField::rotation(), StreamField::shear()] {
            assert!(f.divergence([0.37, 0.61]).abs() < 1e-12);
            assert!(f.value([0.0, 0.4])[0].abs() < 1e-12);
            assert!(f.value([0.4, 1.0])[1].abs() < 1e-12);
            let g = GridSpec::unit_square(32).unwrap();
            let s = f.sample(&g).unwrap();
            assert!(divergence(&s).values().iter().all(|d| d.abs() < 1e-10));
        }
    }

    #[test]
    fn logistic_closed_form_solves_the_ode() {
        let b = LogisticField::default();
        for x in [0.1, 0.5, 0.8] {
            let t = 0.7;
            let d = 1e-6;
            let dphi = (LogisticField::exact_flow(x, t + d) - LogisticField::exact_flow(x, t - d)) / (2.0 * d);
            assert!((dphi - b.value([LogisticField::exact_flow(x, t), 0.0])[0]).abs() < 1e-8);
            let dx = (LogisticField::exact_flow(x + d, t) - LogisticField::exact_flow(x - d, t)) / (2.0 * d);
            assert!((dx - LogisticField::exact_jacobian(x, t)).abs() < 1e-7);
        }
    }

    #[test]
    fn grid_velocity_reproduces_smooth_field() {
        let g = GridSpec::unit_square(64).unwrap();
        let f = StreamField::rotation();
        let gv = GridVelocity::new(VectorField::from_fn(&g, |p| f.value(p)));
        let p = [0.43, 0.27];
        let (a, b) = (gv.value(p), f.value(p));
        assert!((a[0] - b[0]).abs() < 2e-3 && (a[1] - b[1]).abs() < 2e-3);
        assert!(gv.divergence(p).abs() < 1e-2);
    }

    #[test]
    fn catalog_lookup() {
        let g2 = GridSpec::unit_square(8).unwrap();
        let g1 = GridSpec::unit_interval(8).unwrap();
        assert!(named_field("rotation_stream", &g2).is_ok());
        assert!(named_field("rotation_stream", &g1).is_err());
        assert!(named_field("logistic_1d", &g1).is_ok());
        assert!(named_field("nope", &g1).is_err());
    }
}
