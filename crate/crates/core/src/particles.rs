//! Finite-agent realization of a continuum controller.
//!
//! Agents are sampled from a density, the density is re-estimated by a
//! boundary-reflected kernel estimate, the controller is evaluated on the
//! grid from that estimate and every agent moves with the velocity of the
//! cell it occupies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controllers::{apply, Controller};
use crate::dynamics::{cfl_dt, IntegratorConfig};
use crate::error::{Result, SwarmError};
use crate::grid::{GridSpec, ScalarField, Vec2, VectorField};
use crate::metrics::{w2_1d, w2_exact_small};

const MIN_AGENTS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct AgentSet {
    grid: GridSpec,
    positions: Vec<Vec2>,
    seed: u64,
    /// Largest distance a position had to be moved back into Ω.
    max_clamp: f64,
}

impl AgentSet {
    /// Clamps every position into the grid box.
    pub fn new(grid: &GridSpec, positions: Vec<Vec2>, seed: u64) -> Result<Self> {
        if positions.len() < MIN_AGENTS {
            return Err(SwarmError::InvalidArgument(format!("need at least {MIN_AGENTS} agents")));
        }
        let mut max_clamp: f64 = 0.0;
        let mut out = Vec::with_capacity(positions.len());
        for p in positions {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(SwarmError::InvalidArgument("non-finite agent position".into()));
            }
            let (mut q, d) = grid.clamp(p);
            if grid.dim() == 1 {
                q[1] = 0.0;
            }
            max_clamp = max_clamp.max(d);
            out.push(q);
        }
        Ok(Self { grid: grid.clone(), positions: out, seed, max_clamp })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn max_clamp(&self) -> f64 {
        self.max_clamp
    }

    pub fn mean(&self) -> Vec2 {
        let n = self.positions.len() as f64;
        let s = self.positions.iter().fold([0.0; 2], |a, p| [a[0] + p[0], a[1] + p[1]]);
        [s[0] / n, s[1] / n]
    }

    /// CSV rows `t,agent_id,x[,y]` without a header.
    pub fn csv_rows(&self, t: f64) -> String {
        let mut s = String::new();
        for (id, p) in self.positions.iter().enumerate() {
            if self.grid.dim() == 1 {
                s.push_str(&format!("{t},{id},{}\n", p[0]));
            } else {
                s.push_str(&format!("{t},{id},{},{}\n", p[0], p[1]));
            }
        }
        s
    }
}

/// Gaussian kernel with mirror images across both walls of each axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KdeConfig {
    bandwidth: f64,
}

impl KdeConfig {
    /// Bandwidth must be at least half a cell.
    pub fn new(bandwidth: f64, grid: &GridSpec) -> Result<Self> {
        let floor = 0.5 * grid.min_h();
        if !(bandwidth >= floor) || !bandwidth.is_finite() {
            return Err(SwarmError::InvalidArgument(format!("bandwidth {bandwidth} below h/2 = {floor}")));
        }
        Ok(Self { bandwidth })
    }

    /// Two cells.
    pub fn default_for(grid: &GridSpec) -> Self {
        Self { bandwidth: 2.0 * grid.min_h() }
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
}

/// Draws `n` agents: inverse-CDF sampling of the piecewise-constant density
/// in 1D; per-cell multinomial allocation with uniform jitter in 2D.
pub fn sample_density(rho: &ScalarField, n: usize, seed: u64) -> Result<AgentSet> {
    if n < MIN_AGENTS {
        return Err(SwarmError::InvalidArgument(format!("need at least {MIN_AGENTS} agents")));
    }
    if !rho.is_probability_density(1e-9) {
        return Err(SwarmError::InvalidArgument("sampling needs a unit-mass nonnegative density".into()));
    }
    let grid = rho.grid();
    let mut cdf = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    for v in rho.values() {
        acc += v;
        cdf.push(acc);
    }
    let total = acc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hx = grid.h(0);
    let positions = if grid.dim() == 1 {
        (0..n)
            .map(|_| {
                let u = rng.gen::<f64>() * total;
                let i = cdf.partition_point(|c| *c <= u).min(grid.len() - 1);
                let lo = if i == 0 { 0.0 } else { cdf[i - 1] };
                let w = rho.get(i);
                let frac = if w > 0.0 { ((u - lo) / w).clamp(0.0, 1.0) } else { 0.5 };
                [(i as f64 + frac) * hx, 0.0]
            })
            .collect()
    } else {
        let hy = grid.h(1);
        let mut counts = vec![0usize; grid.len()];
        for _ in 0..n {
            let u = rng.gen::<f64>() * total;
            let k = cdf.partition_point(|c| *c <= u).min(grid.len() - 1);
            counts[k] += 1;
        }
        let mut out = Vec::with_capacity(n);
        for (idx, c) in counts.iter().enumerate() {
            let (i, j) = grid.coords(idx);
            for _ in 0..*c {
                out.push([(i as f64 + rng.gen::<f64>()) * hx, (j as f64 + rng.gen::<f64>()) * hy]);
            }
        }
        out
    };
    AgentSet::new(grid, positions, seed)
}

/// Per-axis smoothing weights `W[i][j]` stored as one band per row, each
/// column summing to one. Weights below `1e-16` of the peak are dropped.
#[derive(Clone, Debug)]
struct AxisKernel {
    n: usize,
    lo: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl AxisKernel {
    fn new(grid: &GridSpec, axis: usize, sigma: f64) -> Self {
        let n = grid.n(axis);
        let l = grid.extent(axis);
        let g = |d: f64| (-0.5 * (d / sigma).powi(2)).exp();
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            let x = grid.axis_center(axis, i);
            for j in 0..n {
                let y = grid.axis_center(axis, j);
                let v = g(x - y) + g(x + y) + g(x - (2.0 * l - y)) + g(x + 2.0 * l - y) + g(x - 2.0 * l - y);
                w[i * n + j] = if v > 1e-16 { v } else { 0.0 };
            }
        }
        for j in 0..n {
            let col: f64 = (0..n).map(|i| w[i * n + j]).sum();
            for i in 0..n {
                w[i * n + j] /= col;
            }
        }
        let mut lo = Vec::with_capacity(n);
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let row = &w[i * n..(i + 1) * n];
            let a = row.iter().position(|v| *v != 0.0).unwrap_or(0);
            let b = row.iter().rposition(|v| *v != 0.0).map_or(a, |b| b + 1);
            lo.push(a);
            rows.push(row[a..b].to_vec());
        }
        Self { n, lo, rows }
    }

    /// `out[i] = Σ_j W[i][j] x[j · stride]`.
    fn apply(&self, x: &[f64], stride: usize, out: &mut [f64]) {
        for i in 0..self.n {
            let lo = self.lo[i];
            out[i] = self.rows[i].iter().enumerate().map(|(k, w)| w * x[(lo + k) * stride]).sum();
        }
    }
}

/// Kernel estimator bound to one grid.
#[derive(Clone, Debug)]
struct Estimator {
    grid: GridSpec,
    axes: Vec<AxisKernel>,
}

impl Estimator {
    fn new(grid: &GridSpec, kde: &KdeConfig) -> Self {
        let axes = (0..grid.dim()).map(|a| AxisKernel::new(grid, a, kde.bandwidth)).collect();
        Self { grid: grid.clone(), axes }
    }

    fn density(&self, agents: &AgentSet) -> Result<ScalarField> {
        if agents.len() < MIN_AGENTS {
            return Err(SwarmError::InvalidArgument(format!("need at least {MIN_AGENTS} agents")));
        }
        if agents.grid().dim() != self.grid.dim() {
            return Err(SwarmError::GridMismatch);
        }
        let grid = &self.grid;
        let (nx, ny) = (grid.n(0), grid.n(1));
        let counts = bin_agents(agents, grid);
        let mut v = vec![0.0; grid.len()];
        for j in 0..ny {
            self.axes[0].apply(&counts[j * nx..], 1, &mut v[j * nx..(j + 1) * nx]);
        }
        if grid.dim() == 2 {
            let mut col = vec![0.0; ny];
            let src = v.clone();
            for i in 0..nx {
                self.axes[1].apply(&src[i..], nx, &mut col);
                for (j, c) in col.iter().enumerate() {
                    v[j * nx + i] = *c;
                }
            }
        }
        let total: f64 = v.iter().sum::<f64>() * grid.cell_volume();
        v.iter_mut().for_each(|x| *x /= total);
        ScalarField::new(grid.clone(), v)
    }
}

/// Cloud-in-cell weights of every agent on the cell centers.
fn bin_agents(agents: &AgentSet, grid: &GridSpec) -> Vec<f64> {
    let mut counts = vec![0.0; grid.len()];
    let split = |axis: usize, x: f64| -> (usize, usize, f64) {
        let n = grid.n(axis);
        let s = x / grid.h(axis) - 0.5;
        if s <= 0.0 {
            return (0, 0, 1.0);
        }
        let i0 = s as usize;
        if i0 + 1 >= n {
            return (n - 1, n - 1, 1.0);
        }
        (i0, i0 + 1, 1.0 - (s - i0 as f64))
    };
    for p in agents.positions() {
        let (a0, a1, wa) = split(0, p[0]);
        if grid.dim() == 1 {
            counts[a0] += wa;
            counts[a1] += 1.0 - wa;
            continue;
        }
        let (b0, b1, wb) = split(1, p[1]);
        counts[grid.index(a0, b0)] += wa * wb;
        counts[grid.index(a1, b0)] += (1.0 - wa) * wb;
        counts[grid.index(a0, b1)] += wa * (1.0 - wb);
        counts[grid.index(a1, b1)] += (1.0 - wa) * (1.0 - wb);
    }
    counts
}

/// Boundary-reflected Gaussian kernel estimate on `grid`, unit mass.
pub fn kde_density(agents: &AgentSet, grid: &GridSpec, kde: &KdeConfig) -> Result<ScalarField> {
    Estimator::new(grid, kde).density(agents)
}

/// Moves `p` by `d` and mirrors it at the walls.
fn reflect_step(grid: &GridSpec, p: Vec2, d: Vec2) -> Vec2 {
    let mut q = [p[0] + d[0], p[1] + d[1]];
    for a in 0..grid.dim() {
        let l = grid.extent(a);
        let x = q[a].rem_euclid(2.0 * l);
        q[a] = if x > l { 2.0 * l - x } else { x };
    }
    if grid.dim() == 1 {
        q[1] = 0.0;
    }
    q
}

/// Moves every agent with the piecewise-constant cell velocity `v`.
pub fn advect_agents(agents: &AgentSet, v: &VectorField, dt: f64) -> Result<AgentSet> {
    let grid = v.grid();
    if grid != agents.grid() {
        return Err(SwarmError::GridMismatch);
    }
    let positions = agents
        .positions()
        .iter()
        .map(|p| {
            let u = v.get(grid.locate(*p));
            reflect_step(grid, *p, [dt * u[0], dt * u[1]])
        })
        .collect();
    Ok(AgentSet { grid: grid.clone(), positions, seed: agents.seed, max_clamp: agents.max_clamp })
}

/// Controller velocity from the kernel estimate, rescaled to the mass of `μ`.
pub fn agent_velocity(agents: &AgentSet, controller: &Controller, mu: &ScalarField, kde: &KdeConfig) -> Result<VectorField> {
    velocity_with(&Estimator::new(mu.grid(), kde), agents, controller, mu)
}

fn velocity_with(est: &Estimator, agents: &AgentSet, controller: &Controller, mu: &ScalarField) -> Result<VectorField> {
    if controller.order() > 1 {
        return Err(SwarmError::InvalidArgument("agents support controllers of order at most 1".into()));
    }
    let rho_hat = est.density(agents)?.scale(mu.mass());
    apply(controller, &rho_hat, mu)
}

/// One forward-Euler agent step: estimate `ρ̂`, evaluate `K(ρ̂, μ)` on the
/// grid and move each agent with the velocity of its cell, reflecting at
/// the walls.
pub fn step_agents(
    agents: &AgentSet,
    controller: &Controller,
    mu: &ScalarField,
    dt: f64,
    kde: &KdeConfig,
) -> Result<AgentSet> {
    let v = agent_velocity(agents, controller, mu, kde)?;
    advect_agents(agents, &v, dt)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentRun {
    pub times: Vec<f64>,
    pub snapshots: Vec<AgentSet>,
    pub steps: usize,
}

/// Agent run to `config.t_end` with the continuum time-step rule, recording
/// at `t = 0`, every checkpoint and `t_end`.
pub fn simulate_agents(
    agents: &AgentSet,
    controller: &Controller,
    mu: &ScalarField,
    config: &IntegratorConfig,
    kde: &KdeConfig,
) -> Result<AgentRun> {
    config.validate()?;
    let grid = mu.grid().clone();
    let mut stops: Vec<f64> = config.checkpoints.iter().copied().filter(|c| *c > 0.0 && *c < config.t_end).collect();
    stops.push(config.t_end);
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    let diffusive_dt = match controller.diffusivity() {
        d if d > 0.0 => config.diffusion_number * grid.min_h().powi(2) / d,
        _ => f64::INFINITY,
    };
    let mut run = AgentRun { times: vec![0.0], snapshots: vec![agents.clone()], steps: 0 };
    let est = Estimator::new(&grid, kde);
    let mut cur = agents.clone();
    let mut t = 0.0;
    for target in stops {
        while t < target {
            if run.steps >= config.max_steps {
                return Err(SwarmError::StepLimit { steps: run.steps });
            }
            let v = velocity_with(&est, &cur, controller, mu)?;
            let mut dt = config.dt_override.unwrap_or_else(|| cfl_dt(&v, &grid, config.cfl).min(diffusive_dt));
            let remaining = target - t;
            let landed = dt >= remaining * (1.0 - 1e-12);
            if landed {
                dt = remaining;
            }
            cur = advect_agents(&cur, &v, dt)?;
            run.steps += 1;
            t = if landed { target } else { t + dt };
        }
        run.times.push(target);
        run.snapshots.push(cur.clone());
    }
    Ok(run)
}

/// `W₂(ρ̂, ρ_t)` with `ρ̂` the kernel estimate of the agents: exact quantile
/// formula in 1D, network simplex in 2D.
pub fn empirical_vs_continuum(agents: &AgentSet, rho_t: &ScalarField, kde: &KdeConfig) -> Result<f64> {
    let est = kde_density(agents, rho_t.grid(), kde)?.scale(rho_t.mass());
    if rho_t.grid().dim() == 1 {
        w2_1d(&est, rho_t)
    } else {
        Ok(w2_exact_small(&est, rho_t)?.0)
    }
}
