//! Characteristic flows `φ_t` of autonomous fields and their Jacobians.

use serde::Serialize;

use crate::error::{Result, SwarmError};
use crate::grid::{GridSpec, Mat2, Vec2};
use crate::velocity::Velocity;

/// Default RK4 substep.
pub const DEFAULT_FLOW_STEP: f64 = 1e-2;

const CROSS_CHECK_TOL: f64 = 1e-4;

/// `-b`, whose forward flow is the inverse flow of `b`.
pub struct Reversed<'a>(pub &'a dyn Velocity);

impl Velocity for Reversed<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn value(&self, p: Vec2) -> Vec2 {
        let v = self.0.value(p);
        [-v[0], -v[1]]
    }

    fn jacobian(&self, p: Vec2) -> Mat2 {
        let j = self.0.jacobian(p);
        [[-j[0][0], -j[0][1]], [-j[1][0], -j[1][1]]]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowMap {
    pub times: Vec<f64>,
    /// `positions[s][k] = φ_{t_k}(seed_s)`.
    pub positions: Vec<Vec<Vec2>>,
    /// `J(t_k, seed_s)` from the Jacobi formula.
    pub jacobians: Vec<Vec<f64>>,
    /// Largest distance any RK4 step had to be projected back into Ω.
    pub max_clamp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JacobianReport {
    pub times: Vec<f64>,
    /// `exp ∫₀ᵗ (∇·b)(φ_s(x)) ds`, per seed and time.
    pub quadrature: Vec<Vec<f64>>,
    /// `det A(t)` with `dA/dt = Db(φ_t) A`, `A(0) = I`.
    pub variational: Vec<Vec<f64>>,
    pub max_relative_residual: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct Orbit {
    pub positions: Vec<Vec2>,
    pub log_j: Vec<f64>,
    pub det_a: Vec<f64>,
    pub max_clamp: f64,
}

type State = [f64; 7];

fn deriv(b: &dyn Velocity, s: &State) -> State {
    let p = [s[0], s[1]];
    let v = b.value(p);
    let d = b.jacobian(p);
    let div = if b.dim() == 1 { d[0][0] } else { d[0][0] + d[1][1] };
    // A is stored row-major in s[3..7]
    let a = [[s[3], s[4]], [s[5], s[6]]];
    let da = [
        d[0][0] * a[0][0] + d[0][1] * a[1][0],
        d[0][0] * a[0][1] + d[0][1] * a[1][1],
        d[1][0] * a[0][0] + d[1][1] * a[1][0],
        d[1][0] * a[0][1] + d[1][1] * a[1][1],
    ];
    [v[0], v[1], div, da[0], da[1], da[2], da[3]]
}

fn rk4(b: &dyn Velocity, s: &State, dt: f64) -> State {
    let add = |s: &State, k: &State, c: f64| {
        let mut o = *s;
        for i in 0..7 {
            o[i] += c * k[i];
        }
        o
    };
    let k1 = deriv(b, s);
    let k2 = deriv(b, &add(s, &k1, 0.5 * dt));
    let k3 = deriv(b, &add(s, &k2, 0.5 * dt));
    let k4 = deriv(b, &add(s, &k3, dt));
    let mut o = *s;
    for i in 0..7 {
        o[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    o
}

fn check_times(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(SwarmError::InvalidArgument("empty time grid".into()));
    }
    if t_grid[0] < 0.0 || t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(SwarmError::InvalidArgument("time grid must be nonnegative and nondecreasing".into()));
    }
    Ok(())
}

/// Integrates position, `log J` and the variational matrix along one orbit.
pub(crate) fn orbit(b: &dyn Velocity, grid: &GridSpec, x0: Vec2, t_grid: &[f64], step: f64) -> Result<Orbit> {
    let limit = 2.0 * grid.min_h();
    let mut s: State = [x0[0], x0[1], 0.0, 1.0, 0.0, 0.0, 1.0];
    if grid.dim() == 1 {
        s[1] = 0.0;
    }
    let mut t = 0.0;
    let mut out = Orbit {
        positions: Vec::with_capacity(t_grid.len()),
        log_j: Vec::with_capacity(t_grid.len()),
        det_a: Vec::with_capacity(t_grid.len()),
        max_clamp: 0.0,
    };
    for &target in t_grid {
        let span = target - t;
        if span > 0.0 {
            let sub = (span / step).ceil().max(1.0) as usize;
            let dt = span / sub as f64;
            for _ in 0..sub {
                s = rk4(b, &s, dt);
                let (q, d) = grid.clamp([s[0], s[1]]);
                if d > limit {
                    return Err(SwarmError::FlowEscape { distance: d, limit });
                }
                out.max_clamp = out.max_clamp.max(d);
                s[0] = q[0];
                s[1] = q[1];
            }
            t = target;
        }
        out.positions.push([s[0], s[1]]);
        out.log_j.push(s[2]);
        out.det_a.push(s[3] * s[6] - s[4] * s[5]);
    }
    Ok(out)
}

/// `φ_t(x)` for every seed and `t` in `t_grid` by RK4 with substep `step`.
pub fn flow_map(b: &dyn Velocity, grid: &GridSpec, seeds: &[Vec2], t_grid: &[f64], step: f64) -> Result<FlowMap> {
    check_times(t_grid)?;
    let mut positions = Vec::with_capacity(seeds.len());
    let mut jacobians = Vec::with_capacity(seeds.len());
    let mut max_clamp: f64 = 0.0;
    for &x in seeds {
        let o = orbit(b, grid, x, t_grid, step)?;
        max_clamp = max_clamp.max(o.max_clamp);
        jacobians.push(o.log_j.iter().map(|l| l.exp()).collect());
        positions.push(o.positions);
    }
    Ok(FlowMap { times: t_grid.to_vec(), positions, jacobians, max_clamp })
}

/// Jacobian determinant along the flow by two routes, cross-checked.
pub fn jacobian_along_flow(
    b: &dyn Velocity,
    grid: &GridSpec,
    seeds: &[Vec2],
    t_grid: &[f64],
    step: f64,
) -> Result<JacobianReport> {
    check_times(t_grid)?;
    let mut quadrature = Vec::with_capacity(seeds.len());
    let mut variational = Vec::with_capacity(seeds.len());
    let mut worst = 0.0f64;
    for &x in seeds {
        let o = orbit(b, grid, x, t_grid, step)?;
        let q: Vec<f64> = o.log_j.iter().map(|l| l.exp()).collect();
        for (jq, jv) in q.iter().zip(&o.det_a) {
            let rel = (jq - jv).abs() / jq.abs();
            if rel > CROSS_CHECK_TOL {
                return Err(SwarmError::CrossCheckFailure { quadrature: *jq, variational: *jv });
            }
            worst = worst.max(rel);
        }
        quadrature.push(q);
        variational.push(o.det_a);
    }
    Ok(JacobianReport { times: t_grid.to_vec(), quadrature, variational, max_relative_residual: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::velocity::{LogisticField, StreamField, ZeroField};

    fn t_grid(t_end: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| t_end * k as f64 / n as f64).collect()
    }

    #[test]
    fn zero_field_is_identity() {
        let g = GridSpec::unit_square(8).unwrap();
        let f = flow_map(&ZeroField { dim: 2 }, &g, &[[0.3, 0.4]], &[0.0, 1.0, 2.0], DEFAULT_FLOW_STEP).unwrap();
        assert!(f.positions[0].iter().all(|p| *p == [0.3, 0.4]));
        assert!(f.jacobians[0].iter().all(|j| *j == 1.0));
    }

    #[test]
    fn logistic_flow_and_jacobian_match_closed_form() {
        let g = GridSpec::unit_interval(64).unwrap();
        let seeds: Vec<Vec2> = [0.05, 0.3, 0.5, 0.9].iter().map(|x| [*x, 0.0]).collect();
        let f = flow_map(&LogisticField::default(), &g, &seeds, &[0.0, 1.0], 1e-3).unwrap();
        let jr = jacobian_along_flow(&LogisticField::default(), &g, &seeds, &t_grid(5.0, 10), 1e-3).unwrap();
        for (s, x) in seeds.iter().enumerate() {
            assert_eq!(f.jacobians[s][0], 1.0);
            assert!((f.positions[s][1][0] - LogisticField::exact_flow(x[0], 1.0)).abs() < 1e-6);
            for (k, t) in jr.times.iter().enumerate() {
                let exact = LogisticField::exact_jacobian(x[0], *t);
                assert!((jr.quadrature[s][k] - exact).abs() <= 1e-5 * exact.max(1.0));
            }
        }
    }

    #[test]
    fn stream_flow_preserves_stream_function_and_volume() {
        let g = GridSpec::unit_square(32).unwrap();
        let b = StreamField::rotation();
        let seeds = [[0.2, 0.3], [0.5, 0.45], [0.8, 0.9]];
        let ts = t_grid(5.0, 20);
        let f = flow_map(&b, &g, &seeds, &ts, DEFAULT_FLOW_STEP).unwrap();
        for (s, x) in seeds.iter().enumerate() {
            for p in &f.positions[s] {
                assert!((b.stream(*p) - b.stream(*x)).abs() < 1e-4);
            }
            assert!(f.jacobians[s].iter().all(|j| (j - 1.0).abs() < 1e-6));
        }
        let jr = jacobian_along_flow(&b, &g, &seeds, &ts, DEFAULT_FLOW_STEP).unwrap();
        assert!(jr.max_relative_residual <= 1e-4);
    }

    #[test]
    fn constant_field_escapes() {
        struct Drift;
        impl Velocity for Drift {
            fn dim(&self) -> usize {
                2
            }
            fn value(&self, _: Vec2) -> Vec2 {
                [1.0, 0.0]
            }
            fn jacobian(&self, _: Vec2) -> Mat2 {
                [[0.0; 2]; 2]
            }
        }
        let g = GridSpec::unit_square(16).unwrap();
        let r = flow_map(&Drift, &g, &[[0.5, 0.5]], &[0.0, 1.0], 0.2);
        assert!(matches!(r, Err(SwarmError::FlowEscape { .. })));
    }
}
