//! Entropic optimal transport with log-domain Sinkhorn iterations.
//!
//! The squared Euclidean cost on a tensor grid is separable, so every
//! soft-min is evaluated axis by axis in `O(N · (n_x + n_y))`.

use crate::error::{Result, SwarmError};
use crate::grid::{GridSpec, ScalarField};

use super::{check_masses, MetricReport};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinkhornOptions {
    pub epsilon: f64,
    pub max_iters: usize,
    /// Required L¹ marginal violation.
    pub tol: f64,
    /// Geometric factor between successive ε stages.
    pub anneal_factor: f64,
}

impl SinkhornOptions {
    pub fn new(epsilon: f64, max_iters: usize) -> Self {
        Self { epsilon, max_iters, tol: 1e-6, anneal_factor: 0.5 }
    }
}

/// Debiased entropic estimate of `W₂`:
/// `S_ε = OT_ε(ρ, μ) - ½ OT_ε(ρ, ρ) - ½ OT_ε(μ, μ)`, reported as `√max(S_ε, 0)`.
pub fn w2_sinkhorn(rho: &ScalarField, mu: &ScalarField, epsilon: f64, max_iters: usize) -> Result<MetricReport> {
    w2_sinkhorn_with(rho, mu, &SinkhornOptions::new(epsilon, max_iters))
}

pub fn w2_sinkhorn_with(rho: &ScalarField, mu: &ScalarField, opts: &SinkhornOptions) -> Result<MetricReport> {
    if !(opts.epsilon > 0.0) {
        return Err(SwarmError::InvalidArgument(format!("epsilon {} must be positive", opts.epsilon)));
    }
    check_masses(rho, mu)?;
    let grid = rho.grid();
    let la = log_weights(rho);
    let lb = log_weights(mu);
    let kernel = SeparableCost::new(grid);
    let ab = solve(&kernel, &la, &lb, opts)?;
    let aa = solve(&kernel, &la, &la, opts)?;
    let bb = solve(&kernel, &lb, &lb, opts)?;
    let s = ab.value - 0.5 * (aa.value + bb.value);
    Ok(MetricReport {
        name: "w2_sinkhorn".into(),
        value: s.max(0.0).sqrt(),
        iterations: ab.iterations + aa.iterations + bb.iterations,
        residual: ab.violation.max(aa.violation).max(bb.violation),
    })
}

fn log_weights(f: &ScalarField) -> Vec<f64> {
    let total: f64 = f.values().iter().sum();
    f.values().iter().map(|v| if *v > 0.0 { (v / total).ln() } else { f64::NEG_INFINITY }).collect()
}

struct Solved {
    value: f64,
    iterations: usize,
    violation: f64,
}

struct SeparableCost {
    n: [usize; 2],
    coords: [Vec<f64>; 2],
}

impl SeparableCost {
    fn new(grid: &GridSpec) -> Self {
        let n = [grid.n(0), grid.n(1)];
        let coords = [
            (0..n[0]).map(|i| grid.axis_center(0, i)).collect(),
            (0..n[1]).map(|j| if grid.dim() == 2 { grid.axis_center(1, j) } else { 0.0 }).collect(),
        ];
        Self { n, coords }
    }

    /// `out_i = LSE_j (h_j - C_ij / ε)`.
    fn softmin(&self, h: &[f64], eps: f64) -> Vec<f64> {
        let [nx, ny] = self.n;
        let mut tmp = vec![0.0; nx * ny];
        let k0 = Kernel1d::new(&self.coords[0], eps);
        let mut line = vec![0.0; nx.max(ny)];
        let mut res = vec![0.0; nx.max(ny)];
        for j2 in 0..ny {
            k0.apply(&h[j2 * nx..(j2 + 1) * nx], &mut res[..nx]);
            tmp[j2 * nx..(j2 + 1) * nx].copy_from_slice(&res[..nx]);
        }
        if ny == 1 {
            return tmp;
        }
        let k1 = Kernel1d::new(&self.coords[1], eps);
        let mut out = vec![0.0; nx * ny];
        for i1 in 0..nx {
            for j2 in 0..ny {
                line[j2] = tmp[j2 * nx + i1];
            }
            k1.apply(&line[..ny], &mut res[..ny]);
            for i2 in 0..ny {
                out[i2 * nx + i1] = res[i2];
            }
        }
        out
    }
}

/// Gaussian kernel along one axis, applied as a log-sum-exp.
struct Kernel1d<'a> {
    coords: &'a [f64],
    eps: f64,
    k: Vec<f64>,
}

impl<'a> Kernel1d<'a> {
    fn new(coords: &'a [f64], eps: f64) -> Self {
        let n = coords.len();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let d = coords[i] - coords[j];
                k[i * n + j] = (-d * d / eps).exp();
            }
        }
        Self { coords, eps, k }
    }

    /// `out_i = LSE_j (h_j - (x_i - x_j)² / ε)`.
    ///
    /// Evaluated as `max h + ln Σ K_ij e^{h_j - max h}`; outputs whose sum
    /// underflows are recomputed exactly in the log domain.
    fn apply(&self, h: &[f64], out: &mut [f64]) {
        let n = h.len();
        let m = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            out.iter_mut().for_each(|o| *o = m);
            return;
        }
        let e: Vec<f64> = h.iter().map(|x| (x - m).exp()).collect();
        let mut buf = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.k[i * n..(i + 1) * n];
            let s: f64 = row.iter().zip(&e).map(|(a, b)| a * b).sum();
            *o = if s > 1e-250 {
                m + s.ln()
            } else {
                for j in 0..n {
                    let d = self.coords[i] - self.coords[j];
                    buf[j] = h[j] - d * d / self.eps;
                }
                lse(&buf)
            };
        }
    }
}

fn lse(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn solve(k: &SeparableCost, la: &[f64], lb: &[f64], opts: &SinkhornOptions) -> Result<Solved> {
    let n = la.len();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    let h = k.coords[0].get(1).map_or(1.0, |x| x - k.coords[0][0]);
    let mut eps = (10.0 * h * h).max(opts.epsilon);
    let mut iterations = 0;
    let mut violation = f64::INFINITY;
    let stage_cap = (opts.max_iters / 4).max(50);

    let half = |pot: &[f64], lw: &[f64], eps: f64| -> Vec<f64> {
        let arg: Vec<f64> = pot.iter().zip(lw).map(|(p, l)| l + p / eps).collect();
        k.softmin(&arg, eps).into_iter().map(|s| -eps * s).collect()
    };
    let row_violation = |f: &[f64], g: &[f64], eps: f64| -> f64 {
        let arg: Vec<f64> = g.iter().zip(lb).map(|(p, l)| l + p / eps).collect();
        let s = k.softmin(&arg, eps);
        (0..n)
            .filter(|&i| la[i].is_finite())
            .map(|i| {
                let a = la[i].exp();
                ((la[i] + f[i] / eps + s[i]).exp() - a).abs()
            })
            .sum()
    };

    loop {
        let last = eps <= opts.epsilon;
        let cap = if last { opts.max_iters.saturating_sub(iterations) } else { stage_cap };
        let stage_tol = if last { opts.tol } else { opts.tol.max(1e-3) };
        for it in 0..cap {
            f = half(&g, lb, eps);
            g = half(&f, la, eps);
            iterations += 1;
            if it % 5 == 4 || it + 1 == cap {
                violation = row_violation(&f, &g, eps);
                if violation <= stage_tol {
                    break;
                }
            }
        }
        if last {
            break;
        }
        eps = (eps * opts.anneal_factor).max(opts.epsilon);
    }
    if !(violation <= opts.tol) {
        return Err(SwarmError::NoConvergence { iterations, violation });
    }
    let value: f64 = (0..n)
        .map(|i| {
            let a = if la[i].is_finite() { la[i].exp() * f[i] } else { 0.0 };
            let b = if lb[i].is_finite() { lb[i].exp() * g[i] } else { 0.0 };
            a + b
        })
        .sum();
    Ok(Solved { value, iterations, violation })
}
