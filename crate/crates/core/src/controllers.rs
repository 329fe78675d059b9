//! Distributed controllers: velocity laws that read only local jets.

use std::fmt;
use std::sync::Arc;

use crate::error::{Result, SwarmError};
use crate::grid::{jet_at_with, Boundary, Jet, ScalarField, Vec2, VectorField};
use crate::velocity::{named_field, Velocity};

/// `k(x, ρ(x), μ(x))`.
pub type PointwiseFn = Arc<dyn Fn(Vec2, f64, f64) -> Vec2 + Send + Sync>;

pub const DEFAULT_DENSITY_FLOOR: f64 = 1e-8;

/// Names accepted after the `pointwise:` prefix in [`from_key`].
pub const POINTWISE_NAMES: [&str; 4] = ["rotation_stream", "shear_stream", "logistic_1d", "constant_direction"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Symmetry {
    pub translation: bool,
    pub rotation: bool,
}

#[derive(Clone)]
pub struct PointwiseLaw {
    k: PointwiseFn,
    d_rho: Option<PointwiseFn>,
}

impl PointwiseLaw {
    pub fn new(k: PointwiseFn) -> Self {
        Self { k, d_rho: None }
    }

    pub fn with_derivative(mut self, d_rho: PointwiseFn) -> Self {
        self.d_rho = Some(d_rho);
        self
    }

    pub fn k(&self, x: Vec2, r: f64, m: f64) -> Vec2 {
        (self.k)(x, r, m)
    }

    /// `∂k/∂ρ`, analytic when supplied, otherwise a central difference with
    /// step `1e-6 · max(1, |r|)`.
    pub fn d_rho(&self, x: Vec2, r: f64, m: f64) -> Vec2 {
        if let Some(d) = &self.d_rho {
            return d(x, r, m);
        }
        let delta = 1e-6 * r.abs().max(1.0);
        let a = (self.k)(x, r + delta, m);
        let b = (self.k)(x, r - delta, m);
        [(a[0] - b[0]) / (2.0 * delta), (a[1] - b[1]) / (2.0 * delta)]
    }
}

#[derive(Clone)]
pub enum Law {
    Zero,
    /// `-∇(ρ - μ) / ρ`.
    ErrorGradient,
    Pointwise(PointwiseLaw),
}

#[derive(Clone)]
pub struct Controller {
    name: String,
    order: usize,
    symmetry: Symmetry,
    density_floor: f64,
    law: Law,
}

impl fmt::Debug for Controller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Controller")
            .field("name", &self.name)
            .field("order", &self.order)
            .field("symmetry", &self.symmetry)
            .field("density_floor", &self.density_floor)
            .finish()
    }
}

/// Jets built by [`apply_counted`], indexed by order.
pub type JetCounts = [usize; 3];

impl Controller {
    pub fn zero() -> Self {
        Self {
            name: "zero".into(),
            order: 0,
            symmetry: Symmetry { translation: true, rotation: true },
            density_floor: DEFAULT_DENSITY_FLOOR,
            law: Law::Zero,
        }
    }

    pub fn error_gradient() -> Self {
        Self {
            name: "error_gradient".into(),
            order: 1,
            symmetry: Symmetry { translation: true, rotation: true },
            density_floor: DEFAULT_DENSITY_FLOOR,
            law: Law::ErrorGradient,
        }
    }

    /// Order-0 controller wrapping `k(x, r, m)`.
    pub fn pointwise(name: impl Into<String>, law: PointwiseLaw) -> Self {
        Self {
            name: name.into(),
            order: 0,
            symmetry: Symmetry::default(),
            density_floor: DEFAULT_DENSITY_FLOOR,
            law: Law::Pointwise(law),
        }
    }

    pub fn with_density_floor(mut self, floor: f64) -> Self {
        self.density_floor = floor;
        self
    }

    pub fn with_symmetry(mut self, symmetry: Symmetry) -> Self {
        self.symmetry = symmetry;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn density_floor(&self) -> f64 {
        self.density_floor
    }

    pub fn law(&self) -> &Law {
        &self.law
    }

    pub fn pointwise_law(&self) -> Option<&PointwiseLaw> {
        match &self.law {
            Law::Pointwise(p) => Some(p),
            _ => None,
        }
    }

    /// Diffusivity of the closed-loop error dynamics, used for the explicit
    /// time-step limit. Only the error-gradient law is diffusive.
    pub fn diffusivity(&self) -> f64 {
        match self.law {
            Law::ErrorGradient => 1.0,
            _ => 0.0,
        }
    }

    /// `k(x, J_m ρ, J_m μ)`. A floor violation reports cell 0; [`apply`]
    /// substitutes the real index.
    pub fn evaluate(&self, x: Vec2, jr: &Jet, jm: &Jet) -> Result<Vec2> {
        match &self.law {
            Law::Zero => Ok([0.0; 2]),
            Law::ErrorGradient => {
                if !(jr.value >= self.density_floor) {
                    return Err(SwarmError::DensityFloor { cell: 0, value: jr.value, floor: self.density_floor });
                }
                let (gr, gm) = match (jr.gradient(), jm.gradient()) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return Err(SwarmError::InvalidArgument("error-gradient law needs order-1 jets".into())),
                };
                Ok([-(gr[0] - gm[0]) / jr.value, -(gr[1] - gm[1]) / jr.value])
            }
            Law::Pointwise(p) => Ok(p.k(x, jr.value, jm.value)),
        }
    }
}

/// Builds a controller from a configuration key: `"error_gradient"`,
/// `"zero"` or `"pointwise:<name>"`.
pub fn from_key(key: &str, dim: usize) -> Result<Controller> {
    match key {
        "error_gradient" => Ok(Controller::error_gradient()),
        "zero" => Ok(Controller::zero()),
        _ => match key.strip_prefix("pointwise:") {
            Some(name) => pointwise_catalog(name, dim),
            None => Err(SwarmError::InvalidArgument(format!("unknown controller '{key}'"))),
        },
    }
}

/// Catalog pointwise controllers.
///
/// The field-backed entries use `k = (m - r) · w(x)` with `w = -b` so that
/// the linearization about `μ ≡ 1` is the catalog field `b` itself.
/// `constant_direction` is `k = r · e_x`.
pub fn pointwise_catalog(name: &str, dim: usize) -> Result<Controller> {
    if name == "constant_direction" {
        let law = PointwiseLaw::new(Arc::new(|_, r, _| [r, 0.0])).with_derivative(Arc::new(|_, _, _| [1.0, 0.0]));
        return Ok(Controller::pointwise("pointwise:constant_direction", law)
            .with_symmetry(Symmetry { translation: true, rotation: false }));
    }
    let grid = match dim {
        1 => crate::grid::GridSpec::unit_interval(4)?,
        _ => crate::grid::GridSpec::unit_square(4)?,
    };
    let field: Arc<dyn Velocity> = Arc::from(named_field(name, &grid)?);
    Ok(Controller::pointwise(format!("pointwise:{name}"), error_weighted(field)))
}

/// `k(x, r, m) = (m - r) · w(x)` with `w = -b`.
pub fn error_weighted(b: Arc<dyn Velocity>) -> PointwiseLaw {
    let bk = b.clone();
    let k: PointwiseFn = Arc::new(move |x, r, m| {
        let v = bk.value(x);
        [(r - m) * v[0], (r - m) * v[1]]
    });
    let d: PointwiseFn = Arc::new(move |x, _, _| b.value(x));
    PointwiseLaw::new(k).with_derivative(d)
}

/// Evaluates the controller on every cell with reflected jets.
///
/// Wall cells keep their normal component; the walls are closed at the
/// faces by [`crate::dynamics::step_continuity`] and [`crate::grid::divergence`].
pub fn apply(controller: &Controller, rho: &ScalarField, mu: &ScalarField) -> Result<VectorField> {
    apply_counted(controller, rho, mu).map(|(v, _)| v)
}

pub fn apply_counted(controller: &Controller, rho: &ScalarField, mu: &ScalarField) -> Result<(VectorField, JetCounts)> {
    apply_with(controller, rho, mu, Boundary::Reflect)
}

/// Evaluation with jets taken under `bc`. With [`Boundary::Periodic`] this
/// is the controller on the periodic shadow domain.
pub fn apply_with(
    controller: &Controller,
    rho: &ScalarField,
    mu: &ScalarField,
    bc: Boundary,
) -> Result<(VectorField, JetCounts)> {
    let grid = rho.grid();
    if grid != mu.grid() {
        return Err(SwarmError::GridMismatch);
    }
    let m = controller.order;
    let mut counts = [0usize; 3];
    let mut values = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let jr = jet_at_with(rho, idx, m, bc)?;
        let jm = jet_at_with(mu, idx, m, bc)?;
        counts[m] += 2;
        let mut v = controller.evaluate(grid.center(idx), &jr, &jm).map_err(|e| e.at_cell(idx))?;
        if grid.dim() == 1 {
            v[1] = 0.0;
        }
        values.push(v);
    }
    Ok((VectorField::new(grid.clone(), values)?, counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{divergence, laplacian, GridSpec};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn cosine_pair(n: usize) -> (ScalarField, ScalarField) {
        let g = GridSpec::unit_interval(n).unwrap();
        (ScalarField::from_fn(&g, |p| 1.0 + 0.3 * (PI * p[0]).cos()), ScalarField::constant(&g, 1.0))
    }

    #[test]
    fn error_gradient_vanishes_at_setpoint() {
        let (rho, _) = cosine_pair(64);
        let v = apply(&Controller::error_gradient(), &rho, &rho).unwrap();
        assert_eq!(v.max_abs(), 0.0);
    }

    #[test]
    fn error_gradient_hand_value() {
        let x = [0.5, 0.0];
        let r = 1.0 + 0.3 * (PI * 0.5f64).cos();
        let jr = Jet::from_parts(r, Some([-0.3 * PI * (PI * 0.5f64).sin(), 0.0]), None);
        let jm = Jet::from_parts(1.0, Some([0.0, 0.0]), None);
        let v = Controller::error_gradient().evaluate(x, &jr, &jm).unwrap();
        assert!((v[0] - 0.3 * PI).abs() < 1e-12);
        assert!((v[0] - 0.9425).abs() < 1e-4);
    }

    #[test]
    fn error_gradient_is_linear_in_the_error_gradient() {
        let jr = Jet::from_parts(1.2, Some([0.4, -0.1]), None);
        let jr2 = Jet::from_parts(1.2, Some([0.8 - 0.3, -0.2 + 0.05]), None);
        let jm = Jet::from_parts(1.0, Some([0.3, -0.05]), None);
        let c = Controller::error_gradient();
        let a = c.evaluate([0.0; 2], &jr, &jm).unwrap();
        let b = c.evaluate([0.0; 2], &jr2, &jm).unwrap();
        assert!((b[0] - 2.0 * a[0]).abs() < 1e-12 && (b[1] - 2.0 * a[1]).abs() < 1e-12);
    }

    #[test]
    fn density_floor_reports_cell() {
        let g = GridSpec::unit_interval(16).unwrap();
        let mut rho = ScalarField::constant(&g, 1.0);
        rho.values_mut()[7] = 1e-10;
        let mu = ScalarField::constant(&g, 1.0);
        match apply(&Controller::error_gradient(), &rho, &mu) {
            Err(SwarmError::DensityFloor { cell, .. }) => assert_eq!(cell, 7),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn order_zero_never_builds_gradients() {
        let (rho, mu) = cosine_pair(32);
        let c = pointwise_catalog("logistic_1d", 1).unwrap();
        let (_, counts) = apply_counted(&c, &rho, &mu).unwrap();
        assert_eq!(counts, [64, 0, 0]);
        let (_, counts) = apply_counted(&Controller::error_gradient(), &rho, &mu).unwrap();
        assert_eq!(counts, [0, 64, 0]);
    }

    #[test]
    fn checkerboard_error_is_not_stationary() {
        let g = GridSpec::unit_interval(32).unwrap();
        let rho = ScalarField::from_fn(&g, |p| 1.0 + 0.1 * if ((p[0] * 32.0) as usize) % 2 == 0 { 1.0 } else { -1.0 });
        let mu = ScalarField::constant(&g, 1.0);
        let v = apply(&Controller::error_gradient(), &rho, &mu).unwrap();
        let flux = v.scaled_by(&rho).unwrap();
        let rate = divergence(&flux);
        assert!(rate.values().iter().any(|r| r.abs() > 1e-3));
        assert!(rate.mass().abs() < 1e-12);
    }

    #[test]
    fn feedback_linearization_identity_interior() {
        let g = GridSpec::unit_square(48).unwrap();
        let rho = ScalarField::from_fn(&g, |p| 1.0 + 0.3 * (PI * p[0]).cos() * (2.0 * PI * p[1]).cos());
        let mu = ScalarField::from_fn(&g, |p| 1.0 + 0.1 * (PI * p[1]).sin());
        let v = apply(&Controller::error_gradient(), &rho, &mu).unwrap();
        let flux = divergence(&v.scaled_by(&rho).unwrap());
        let e = rho.sub(&mu).unwrap();
        let lap = laplacian(&e);
        let tol = 1e-8 * e.norm_l2();
        for idx in 0..g.len() {
            let (i, j) = g.coords(idx);
            if i < 2 || j < 2 || i + 2 >= 48 || j + 2 >= 48 {
                continue;
            }
            assert!((flux.get(idx) + lap.get(idx)).abs() <= tol);
        }
    }

    #[test]
    fn finite_difference_derivative_matches_analytic() {
        let c = pointwise_catalog("rotation_stream", 2).unwrap();
        let law = c.pointwise_law().unwrap().clone();
        let fd = PointwiseLaw::new(law.k.clone());
        let x = [0.3, 0.6];
        let (a, b) = (law.d_rho(x, 1.3, 1.0), fd.d_rho(x, 1.3, 1.0));
        assert!((a[0] - b[0]).abs() < 1e-6 && (a[1] - b[1]).abs() < 1e-6);
    }

    #[test]
    fn keys() {
        assert_eq!(from_key("error_gradient", 1).unwrap().order(), 1);
        assert_eq!(from_key("zero", 2).unwrap().order(), 0);
        assert_eq!(from_key("pointwise:shear_stream", 2).unwrap().order(), 0);
        assert!(from_key("pointwise:bogus", 2).is_err());
        assert!(from_key("gradient", 2).is_err());
    }

    proptest! {
        #[test]
        fn locality(seed in 0u64..1000, cell in 2usize..30) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = GridSpec::unit_interval(32).unwrap();
            let vals: Vec<f64> = (0..32).map(|_| 1.0 + rng.gen::<f64>()).collect();
            let rho = ScalarField::new(g.clone(), vals).unwrap();
            let mu = ScalarField::constant(&g, 1.0);
            let mut rho2 = rho.clone();
            for (i, v) in rho2.values_mut().iter_mut().enumerate() {
                if i.abs_diff(cell) > 1 {
                    *v += 0.5;
                }
            }
            for c in [Controller::error_gradient(), pointwise_catalog("logistic_1d", 1).unwrap()] {
                let a = apply(&c, &rho, &mu).unwrap();
                let b = apply(&c, &rho2, &mu).unwrap();
                prop_assert_eq!(a.get(cell), b.get(cell));
            }
        }
    }
}
