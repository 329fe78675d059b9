//! Explicit integration of the closed-loop continuity equation.

use thiserror::Error;

use crate::controllers::{apply, Controller};
use crate::error::{Result, SwarmError};
use crate::grid::{GridSpec, ScalarField, VectorField};

const VELOCITY_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub cfl: f64,
    pub t_end: f64,
    pub max_steps: usize,
    pub dt_override: Option<f64>,
    /// Record every `sample_stride` steps (plus `t = 0`, `t_end` and checkpoints).
    pub sample_stride: usize,
    /// Explicit diffusive limit `dt ≤ diffusion_number · h² / D`.
    pub diffusion_number: f64,
    /// Times the integrator lands on exactly and records.
    pub checkpoints: Vec<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            cfl: 0.45,
            t_end: 1.0,
            max_steps: 50_000_000,
            dt_override: None,
            sample_stride: 10,
            diffusion_number: 0.25,
            checkpoints: Vec::new(),
        }
    }
}

impl IntegratorConfig {
    pub fn with_t_end(t_end: f64) -> Self {
        Self { t_end, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SwarmError::InvalidArgument(m));
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return bad(format!("cfl {} outside (0, 1)", self.cfl));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end {} must be positive", self.t_end));
        }
        if self.sample_stride == 0 {
            return bad("sample_stride must be positive".into());
        }
        if !(self.diffusion_number > 0.0) {
            return bad("diffusion_number must be positive".into());
        }
        if let Some(dt) = self.dt_override {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt_override {dt} must be positive"));
            }
        }
        Ok(())
    }
}

/// `cfl · min(h) / max(max|v|, 1e-12)`.
pub fn cfl_dt(v: &VectorField, grid: &GridSpec, cfl: f64) -> f64 {
    cfl * grid.min_h() / v.max_abs().max(VELOCITY_FLOOR)
}

/// One forward-Euler step of the first-order upwind finite-volume scheme.
///
/// Face velocities are averages of the adjacent cells; boundary faces carry
/// no flux, so the update conserves mass up to summation rounding.
pub fn step_continuity(rho: &ScalarField, v: &VectorField, dt: f64) -> Result<ScalarField> {
    let g = rho.grid();
    if g != v.grid() {
        return Err(SwarmError::GridMismatch);
    }
    let r = rho.values();
    let vel = v.values();
    let mut out = r.to_vec();
    let (nx, ny) = (g.n(0), g.n(1));
    for a in 0..g.dim() {
        let c = dt / g.h(a);
        let stride = if a == 0 { 1 } else { nx };
        let (lines, len, line_step) = if a == 0 { (ny, nx, nx) } else { (nx, ny, 1) };
        for line in 0..lines {
            let base = line * line_step;
            for k in 0..len - 1 {
                let l = base + k * stride;
                let rr = l + stride;
                let vf = 0.5 * (vel[l][a] + vel[rr][a]);
                let flux = if vf > 0.0 { vf * r[l] } else { vf * r[rr] };
                if flux != 0.0 {
                    out[l] -= c * flux;
                    out[rr] += c * flux;
                }
            }
        }
    }
    if let Some(cell) = out.iter().position(|x| !x.is_finite()) {
        return Err(SwarmError::NonFiniteState { cell });
    }
    Ok(ScalarField::from_raw(g.clone(), out))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub densities: Vec<ScalarField>,
    pub controls: Vec<VectorField>,
    pub sample_stride: usize,
    /// Running `Σ ‖v‖_{L²} dt` at each sample time.
    pub effort: Vec<f64>,
    pub steps: usize,
    /// Smallest density value seen at any step.
    pub min_rho: f64,
    /// Steps after which some cell was negative.
    pub positivity_warnings: usize,
}

impl Trajectory {
    fn new(stride: usize) -> Self {
        Self {
            times: Vec::new(),
            densities: Vec::new(),
            controls: Vec::new(),
            sample_stride: stride,
            effort: Vec::new(),
            steps: 0,
            min_rho: f64::INFINITY,
            positivity_warnings: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the sample recorded at time `t` (within 1e-12).
    pub fn sample_at(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    pub fn final_density(&self) -> Option<&ScalarField> {
        self.densities.last()
    }
}

/// A run that stopped early, with everything recorded before the failure.
#[derive(Debug, Error)]
#[error("simulation aborted after {} steps: {cause}", partial.steps)]
pub struct SimulationError {
    #[source]
    pub cause: SwarmError,
    pub partial: Box<Trajectory>,
}

/// Closed-loop run `ρ ← step(ρ, K(ρ, μ), dt)` to `config.t_end`.
///
/// Without `dt_override`, `dt` is the CFL step capped by the explicit
/// diffusive limit of the controller and by the next checkpoint.
pub fn simulate(
    rho0: &ScalarField,
    controller: &Controller,
    mu: &ScalarField,
    config: &IntegratorConfig,
) -> std::result::Result<Trajectory, SimulationError> {
    let mut traj = Trajectory::new(config.sample_stride);
    let fail = |cause: SwarmError, traj: Trajectory| SimulationError { cause, partial: Box::new(traj) };
    if let Err(e) = config.validate() {
        return Err(fail(e, traj));
    }
    if rho0.grid() != mu.grid() {
        return Err(fail(SwarmError::GridMismatch, traj));
    }
    let grid = rho0.grid().clone();
    let mut stops: Vec<f64> = config.checkpoints.iter().copied().filter(|c| *c > 0.0 && *c < config.t_end).collect();
    stops.push(config.t_end);
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    let mut next_stop = 0;

    let diffusive_dt = match controller.diffusivity() {
        d if d > 0.0 => config.diffusion_number * grid.min_h().powi(2) / d,
        _ => f64::INFINITY,
    };

    let mut rho = rho0.clone();
    let mut t = 0.0;
    let mut effort = 0.0;
    let mut record = true;
    traj.min_rho = rho.min();
    loop {
        let v = match apply(controller, &rho, mu) {
            Ok(v) => v,
            Err(e) => return Err(fail(e, traj)),
        };
        let done = next_stop >= stops.len();
        if record || done {
            traj.times.push(t);
            traj.densities.push(rho.clone());
            traj.controls.push(v.clone());
            traj.effort.push(effort);
        }
        if done {
            break;
        }
        if traj.steps >= config.max_steps {
            return Err(fail(SwarmError::StepLimit { steps: traj.steps }, traj));
        }
        let target = stops[next_stop];
        let remaining = target - t;
        let mut dt = config.dt_override.unwrap_or_else(|| cfl_dt(&v, &grid, config.cfl).min(diffusive_dt));
        let mut landed = false;
        if dt >= remaining * (1.0 - 1e-12) {
            dt = remaining;
            landed = true;
        }
        effort += v.norm_l2() * dt;
        rho = match step_continuity(&rho, &v, dt) {
            Ok(r) => r,
            Err(e) => return Err(fail(e, traj)),
        };
        traj.steps += 1;
        if landed {
            t = target;
            next_stop += 1;
        } else {
            t += dt;
        }
        let m = rho.min();
        traj.min_rho = traj.min_rho.min(m);
        if m < 0.0 {
            traj.positivity_warnings += 1;
        }
        record = landed || traj.steps % config.sample_stride == 0;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use std::f64::consts::PI;

    #[test]
    fn cfl_examples() {
        let g = GridSpec::unit_interval(100).unwrap();
        let v = VectorField::from_fn(&g, |_| [2.0, 0.0]);
        assert!((cfl_dt(&v, &g, 0.45) - 0.00225).abs() < 1e-15);
        let v4 = VectorField::from_fn(&g, |_| [4.0, 0.0]);
        assert!((cfl_dt(&v4, &g, 0.45) * 2.0 - cfl_dt(&v, &g, 0.45)).abs() < 1e-15);
        assert_eq!(cfl_dt(&VectorField::zeros(&g), &g, 0.45), 0.45 * 0.01 / 1e-12);
    }

    #[test]
    fn zero_velocity_is_identity_bitwise() {
        let g = GridSpec::unit_square(16).unwrap();
        let rho = ScalarField::from_fn(&g, |p| 1.0 + 0.3 * p[0] * p[1]);
        assert_eq!(step_continuity(&rho, &VectorField::zeros(&g), 0.1).unwrap(), rho);
    }

    #[test]
    fn translation_step_conserves_mass() {
        let g = GridSpec::unit_interval(200).unwrap();
        let rho = ScalarField::from_fn(&g, |p| (-((p[0] - 0.5) / 0.1).powi(2)).exp()).normalized().unwrap();
        let v = VectorField::from_fn(&g, |_| [1.0, 0.0]);
        let dt = cfl_dt(&v, &g, 0.45);
        let next = step_continuity(&rho, &v, dt).unwrap();
        assert!((next.mass() - rho.mass()).abs() <= 1e-14);
        assert!(next.min() >= 0.0);
    }

    #[test]
    fn non_finite_output_is_an_error() {
        let g = GridSpec::unit_interval(8).unwrap();
        let rho = ScalarField::constant(&g, 1.0);
        let v = VectorField::from_fn(&g, |p| [if p[0] < 0.5 { f64::MAX } else { 0.0 }, 0.0]);
        assert!(matches!(step_continuity(&rho, &v, 1e10), Err(SwarmError::NonFiniteState { .. })));
    }

    #[test]
    fn fixed_point_run_is_constant() {
        let g = GridSpec::unit_interval(64).unwrap();
        let mu = ScalarField::from_fn(&g, |p| 1.0 + 0.2 * (PI * p[0]).cos());
        let traj = simulate(&mu, &Controller::error_gradient(), &mu, &IntegratorConfig::with_t_end(0.5)).unwrap();
        for d in &traj.densities {
            assert_eq!(d, &mu);
        }
        assert_eq!(*traj.times.last().unwrap(), 0.5);
    }

    #[test]
    fn checkpoints_are_hit_exactly() {
        let g = GridSpec::unit_interval(32).unwrap();
        let mu = ScalarField::constant(&g, 1.0);
        let rho = ScalarField::from_fn(&g, |p| 1.0 + 0.3 * (PI * p[0]).cos());
        let cfg = IntegratorConfig { t_end: 0.2, checkpoints: vec![0.05, 0.1], sample_stride: 1000, ..Default::default() };
        let traj = simulate(&rho, &Controller::error_gradient(), &mu, &cfg).unwrap();
        assert!(traj.sample_at(0.05).is_some() && traj.sample_at(0.1).is_some());
        assert_eq!(traj.times.first(), Some(&0.0));
        assert_eq!(traj.times.last(), Some(&0.2));
        for d in &traj.densities {
            assert!((d.mass() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn density_floor_aborts_with_partial_trajectory() {
        let g = GridSpec::unit_interval(16).unwrap();
        let mu = ScalarField::constant(&g, 1.0);
        let mut rho = ScalarField::constant(&g, 1.0);
        rho.values_mut()[3] = 0.0;
        let err = simulate(&rho, &Controller::error_gradient(), &mu, &IntegratorConfig::default()).unwrap_err();
        assert!(matches!(err.cause, SwarmError::DensityFloor { cell: 3, .. }));
        assert!(err.partial.is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig { cfl: 1.2, ..Default::default() }.validate().is_err());
        assert!(IntegratorConfig { t_end: -1.0, ..Default::default() }.validate().is_err());
        assert!(IntegratorConfig::default().validate().is_ok());
    }
}
