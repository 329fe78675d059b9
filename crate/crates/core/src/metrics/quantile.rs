//! One-dimensional W₂ through quantile functions.

use crate::error::{Result, SwarmError};
use crate::grid::ScalarField;

use super::check_masses;

/// How a cell value is read as a measure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CellModel {
    /// Constant density across the cell; the CDF is piecewise linear.
    #[default]
    Uniform,
    /// A point mass at the cell center, the measure the exact LP sees.
    Atomic,
}

/// `W₂` between two 1D densities under [`CellModel::Uniform`].
pub fn w2_1d(rho: &ScalarField, mu: &ScalarField) -> Result<f64> {
    w2_1d_with(rho, mu, CellModel::Uniform)
}

/// `(∫₀¹ |F_ρ⁻¹(q) - F_μ⁻¹(q)|² dq)^{1/2}`, integrated exactly over the
/// merged breakpoints of both cumulative distributions.
pub fn w2_1d_with(rho: &ScalarField, mu: &ScalarField, model: CellModel) -> Result<f64> {
    if rho.grid().dim() != 1 {
        return Err(SwarmError::InvalidArgument("w2_1d needs a 1D grid".into()));
    }
    let (ma, mb) = check_masses(rho, mu)?;
    if ma <= 0.0 {
        return Ok(0.0);
    }
    let h = rho.grid().h(0);
    let a = Quantile::new(rho.values(), ma / rho.grid().cell_volume(), h, model);
    let b = Quantile::new(mu.values(), mb / mu.grid().cell_volume(), h, model);

    let (mut i, mut j) = (a.first_cell(), b.first_cell());
    let mut q = 0.0;
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        let end = a.upper(i).min(b.upper(j));
        if end > q {
            let dq = end - q;
            total += match model {
                CellModel::Uniform => {
                    let d0 = a.at(i, q) - b.at(j, q);
                    let d1 = a.at(i, end) - b.at(j, end);
                    let dm = a.at(i, 0.5 * (q + end)) - b.at(j, 0.5 * (q + end));
                    dq / 6.0 * (d0 * d0 + 4.0 * dm * dm + d1 * d1)
                }
                CellModel::Atomic => {
                    let d = a.center(i) - b.center(j);
                    dq * d * d
                }
            };
            q = end;
        }
        if a.upper(i) <= end {
            i = a.next_cell(i + 1);
        }
        if b.upper(j) <= end {
            j = b.next_cell(j + 1);
        }
    }
    Ok(total.max(0.0).sqrt())
}

struct Quantile {
    cdf: Vec<f64>,
    weights: Vec<f64>,
    h: f64,
    model: CellModel,
}

impl Quantile {
    fn new(values: &[f64], total: f64, h: f64, model: CellModel) -> Self {
        let weights: Vec<f64> = values.iter().map(|v| v / total).collect();
        let mut cdf = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in &weights {
            acc += w;
            cdf.push(acc);
        }
        // the last breakpoint closes the unit interval exactly
        let last = cdf.len() - 1;
        cdf[last] = 1.0;
        Self { cdf, weights, h, model }
    }

    fn len(&self) -> usize {
        self.weights.len()
    }

    fn next_cell(&self, from: usize) -> usize {
        (from..self.len()).find(|&k| self.weights[k] > 0.0).unwrap_or(self.len())
    }

    fn first_cell(&self) -> usize {
        self.next_cell(0)
    }

    fn upper(&self, k: usize) -> f64 {
        self.cdf[k + 1]
    }

    fn center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.h
    }

    /// Quantile at level `q` inside cell `k`.
    fn at(&self, k: usize, q: f64) -> f64 {
        match self.model {
            CellModel::Atomic => self.center(k),
            CellModel::Uniform => {
                let s = ((q - self.cdf[k]) / self.weights[k]).clamp(0.0, 1.0);
                (k as f64 + s) * self.h
            }
        }
    }
}
