//! Spectral reference for the Neumann heat equation and the spectral gap.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Result, SwarmError};
use crate::grid::{laplacian, GridSpec, ScalarField};
use crate::metrics::solve_neumann_poisson;

/// Orthonormal DCT-II along one axis: `C[k][i] = s_k cos(π k (i + ½) / n)`.
struct Dct {
    n: usize,
    c: Vec<f64>,
}

impl Dct {
    fn new(n: usize) -> Self {
        let mut c = vec![0.0; n * n];
        for k in 0..n {
            let s = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            for i in 0..n {
                c[k * n + i] = s * (PI * k as f64 * (i as f64 + 0.5) / n as f64).cos();
            }
        }
        Self { n, c }
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.c[k * self.n..(k + 1) * self.n].iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn inverse(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, xk) in x.iter().enumerate() {
            if *xk == 0.0 {
                continue;
            }
            for (o, c) in out.iter_mut().zip(&self.c[k * self.n..(k + 1) * self.n]) {
                *o += xk * c;
            }
        }
    }
}

/// Applies `f` to every line along `axis` of a row-major `nx × ny` array.
fn along_axis(v: &mut [f64], nx: usize, ny: usize, axis: usize, mut f: impl FnMut(&[f64], &mut [f64])) {
    if axis == 0 {
        let mut out = vec![0.0; nx];
        for row in v.chunks_mut(nx) {
            f(row, &mut out);
            row.copy_from_slice(&out);
        }
    } else {
        let mut line = vec![0.0; ny];
        let mut out = vec![0.0; ny];
        for i in 0..nx {
            for j in 0..ny {
                line[j] = v[j * nx + i];
            }
            f(&line, &mut out);
            for j in 0..ny {
                v[j * nx + i] = out[j];
            }
        }
    }
}

/// `e^{tΔ} e₀` with zero-flux walls, by cosine transform.
///
/// Mode `(k, l)` is damped by `exp(-((πk/L_x)² + (πl/L_y)²) t)`. With
/// `modes = Some(m)` only wavenumbers `< m` per axis are kept.
pub fn heat_reference(e0: &ScalarField, t: f64, modes: Option<usize>) -> Result<ScalarField> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(SwarmError::InvalidArgument(format!("time {t} must be finite and nonnegative")));
    }
    let grid = e0.grid();
    let dims = grid.dim();
    let (nx, ny) = (grid.n(0), grid.n(1));
    let mut v = e0.values().to_vec();
    let dcts: Vec<Dct> = (0..dims).map(|a| Dct::new(grid.n(a))).collect();
    for (a, d) in dcts.iter().enumerate() {
        along_axis(&mut v, nx, ny, a, |x, o| d.forward(x, o));
    }
    let keep = modes.unwrap_or(usize::MAX);
    let wave = |axis: usize, k: usize| (PI * k as f64 / grid.extent(axis)).powi(2);
    for j in 0..ny {
        for i in 0..nx {
            let lam = wave(0, i) + if dims == 2 { wave(1, j) } else { 0.0 };
            let c = &mut v[j * nx + i];
            *c = if i < keep && j < keep { *c * (-lam * t).exp() } else { 0.0 };
        }
    }
    for (a, d) in dcts.iter().enumerate() {
        along_axis(&mut v, nx, ny, a, |x, o| d.inverse(x, o));
    }
    ScalarField::new(grid.clone(), v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Lambda1 {
    /// `(π / L_max)²`.
    pub analytic: f64,
    /// Smallest nonzero eigenvalue of the discrete `-Δ`.
    pub numeric: f64,
    pub iterations: usize,
}

/// First nonzero Neumann eigenvalue of `-Δ` on the grid box, analytically and
/// by inverse power iteration on zero-mean fields.
pub fn neumann_lambda1(grid: &GridSpec) -> Result<Lambda1> {
    let l_max = grid.extents().iter().copied().fold(0.0, f64::max);
    let analytic = (PI / l_max).powi(2);
    // generic start with components along every low mode
    let mut x = ScalarField::from_fn(grid, |p| {
        let u = p[0] / grid.extent(0);
        let w = if grid.dim() == 2 { p[1] / grid.extent(1) } else { 0.0 };
        u + 0.7 * w + 0.3 * u * u - 0.2 * w * w * w
    })
    .zero_mean();
    let mut lambda = f64::NAN;
    let mut iterations = 0;
    for it in 1..=500 {
        iterations = it;
        let n = x.norm_l2();
        x = x.scale(1.0 / n);
        let ax = laplacian(&x);
        let rq = -x.inner(&ax) / x.inner(&x);
        let done = (rq - lambda).abs() <= 1e-13 * rq;
        lambda = rq;
        if done {
            break;
        }
        x = solve_neumann_poisson(&x.zero_mean())?.phi.zero_mean();
    }
    Ok(Lambda1 { analytic, numeric: lambda, iterations })
}
