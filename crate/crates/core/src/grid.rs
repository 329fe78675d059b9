//! Uniform cell-centered discretization of box domains.
//!
//! Cells are indexed row-major with the x index running fastest:
//! `idx = j * nx + i`. One-dimensional grids carry a dummy second axis with a
//! single cell so every operator can be written once for both dimensions.
//!
//! The difference operators form a summation-by-parts pair:
//!
//! * [`gradient`] uses central differences with even (Neumann) reflection
//!   ghosts, so `f[-1] = f[0]`;
//! * [`divergence`] averages cell values to faces and forces the boundary
//!   face flux to zero.
//!
//! With cell-volume weights these satisfy `<grad f, v> = -<f, div v>` exactly,
//! and [`laplacian`] is defined as `divergence(gradient(f))`, which is a
//! three-point stencil per axis at spacing `2h` with reflection ghosts.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SwarmError};

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

/// Boundary handling for stencils.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Cell-centered even reflection (homogeneous Neumann data).
    Reflect,
    /// Periodic wrap; used for the translation-equivariance shadow domain.
    Periodic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    extent: [f64; 2],
    cells: [usize; 2],
}

/// Builds a box grid `[0, L_x] (x [0, L_y])` with `cells` per axis.
pub fn build_grid(dim: usize, extents: &[f64], cells: &[usize]) -> Result<GridSpec> {
    GridSpec::new(dim, extents, cells)
}

impl GridSpec {
    pub fn new(dim: usize, extents: &[f64], cells: &[usize]) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(SwarmError::InvalidGrid(format!("unsupported dimension {dim}")));
        }
        if extents.len() != dim || cells.len() != dim {
            return Err(SwarmError::InvalidGrid(format!(
                "expected {dim} extents and cell counts, got {} and {}",
                extents.len(),
                cells.len()
            )));
        }
        let mut extent = [1.0; 2];
        let mut n = [1usize; 2];
        for a in 0..dim {
            if !(extents[a].is_finite() && extents[a] > 0.0) {
                return Err(SwarmError::InvalidGrid(format!("extent {} must be positive", extents[a])));
            }
            if cells[a] < 4 {
                return Err(SwarmError::InvalidGrid(format!("axis {a} has {} cells, need at least 4", cells[a])));
            }
            extent[a] = extents[a];
            n[a] = cells[a];
        }
        Ok(Self { dim, extent, cells: n })
    }

    /// Unit interval with `n` cells.
    pub fn unit_interval(n: usize) -> Result<Self> {
        Self::new(1, &[1.0], &[n])
    }

    /// Unit square with `n x n` cells.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(2, &[1.0, 1.0], &[n, n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self, axis: usize) -> usize {
        self.cells[axis]
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.extent[axis]
    }

    pub fn extents(&self) -> &[f64] {
        &self.extent[..self.dim]
    }

    pub fn cell_counts(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn h(&self, axis: usize) -> f64 {
        self.extent[axis] / self.cells[axis] as f64
    }

    pub fn min_h(&self) -> f64 {
        (0..self.dim).map(|a| self.h(a)).fold(f64::INFINITY, f64::min)
    }

    pub fn len(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.h(a)).product()
    }

    /// vol(Ω).
    pub fn volume(&self) -> f64 {
        self.extents().iter().product()
    }

    /// diam(Ω) for a box: length of the main diagonal.
    pub fn diameter(&self) -> f64 {
        self.extents().iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    /// Square grid: equal cell counts and spacings on both axes.
    pub fn is_square(&self) -> bool {
        self.dim == 2 && self.cells[0] == self.cells[1] && (self.extent[0] - self.extent[1]).abs() <= 1e-12 * self.extent[0]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.cells[0] + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.cells[0], idx / self.cells[0])
    }

    #[inline]
    pub fn axis_center(&self, axis: usize, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h(axis)
    }

    /// Cell center; the unused second coordinate of a 1D grid is 0.
    #[inline]
    pub fn center(&self, idx: usize) -> Vec2 {
        let (i, j) = self.coords(idx);
        let y = if self.dim == 2 { self.axis_center(1, j) } else { 0.0 };
        [self.axis_center(0, i), y]
    }

    pub fn centers(&self) -> Vec<Vec2> {
        (0..self.len()).map(|idx| self.center(idx)).collect()
    }

    /// Index of the cell containing `p`, with points outside Ω mapped to the
    /// nearest boundary cell.
    pub fn locate(&self, p: Vec2) -> usize {
        let mut ij = [0usize; 2];
        for a in 0..self.dim {
            let s = (p[a] / self.h(a)).floor();
            ij[a] = if s < 0.0 { 0 } else { (s as usize).min(self.cells[a] - 1) };
        }
        self.index(ij[0], ij[1])
    }

    /// Projects `p` onto Ω; returns the projected point and the distance moved.
    pub fn clamp(&self, p: Vec2) -> (Vec2, f64) {
        let mut q = p;
        let mut d2 = 0.0;
        for a in 0..self.dim {
            let c = p[a].clamp(0.0, self.extent[a]);
            d2 += (c - p[a]) * (c - p[a]);
            q[a] = c;
        }
        (q, d2.sqrt())
    }

    /// True when cell `idx` touches the boundary face normal to `axis`.
    pub fn on_boundary(&self, idx: usize, axis: usize) -> bool {
        if axis >= self.dim {
            return false;
        }
        let (i, j) = self.coords(idx);
        let k = if axis == 0 { i } else { j };
        k == 0 || k + 1 == self.cells[axis]
    }

    /// Neighbor of `idx` offset by `delta` cells along `axis` under `bc`.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, delta: isize, bc: Boundary) -> usize {
        let (i, j) = self.coords(idx);
        let n = self.cells[axis] as isize;
        let k = if axis == 0 { i } else { j } as isize + delta;
        let k = match bc {
            Boundary::Reflect => reflect_index(k, n),
            Boundary::Periodic => k.rem_euclid(n),
        } as usize;
        if axis == 0 {
            self.index(k, j)
        } else {
            self.index(i, k)
        }
    }

    fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(SwarmError::GridMismatch)
        }
    }
}

/// Even reflection about the cell-centered boundary: `-1 -> 0`, `n -> n-1`.
#[inline]
fn reflect_index(mut k: isize, n: isize) -> isize {
    loop {
        if k < 0 {
            k = -k - 1;
        } else if k >= n {
            k = 2 * n - k - 1;
        } else {
            return k;
        }
    }
}

/// Reflection for a component normal to the wall: the ghost value flips sign.
#[inline]
fn odd_reflect_index(k: isize, n: isize) -> (isize, f64) {
    let mut sign = 1.0;
    let mut k = k;
    loop {
        if k < 0 {
            k = -k - 1;
            sign = -sign;
        } else if k >= n {
            k = 2 * n - k - 1;
            sign = -sign;
        } else {
            return (k, sign);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(SwarmError::InvalidArgument(format!(
                "field has {} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(cell) = values.iter().position(|v| !v.is_finite()) {
            return Err(SwarmError::NonFiniteState { cell });
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &GridSpec, c: f64) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(Vec2) -> f64) -> Self {
        let values = (0..grid.len()).map(|idx| f(grid.center(idx))).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// ∫ f, i.e. Σ f · cell_volume.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Spatial average over Ω.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Volume-weighted inner product.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn norm_l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn is_probability_density(&self, tol: f64) -> bool {
        self.values.iter().all(|v| *v >= 0.0) && (self.mass() - 1.0).abs() <= tol
    }

    /// Rescales to unit mass. Fails on non-positive total mass.
    pub fn normalized(&self) -> Result<Self> {
        let m = self.mass();
        if !(m > 0.0 && m.is_finite()) {
            return Err(SwarmError::InvalidArgument(format!("cannot normalize field of mass {m}")));
        }
        Ok(self.map(|v| v / m))
    }

    /// Subtracts the spatial mean.
    pub fn zero_mean(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// Bilinear interpolation with Neumann reflection beyond the outer cell
    /// centers. Points outside Ω are projected first.
    pub fn interpolate(&self, p: Vec2) -> f64 {
        let g = &self.grid;
        let (p, _) = g.clamp(p);
        let mut base = [0isize; 2];
        let mut frac = [0.0; 2];
        for a in 0..g.dim {
            let s = p[a] / g.h(a) - 0.5;
            let f = s.floor();
            base[a] = f as isize;
            frac[a] = s - f;
        }
        let nx = g.cells[0] as isize;
        let ny = g.cells[1] as isize;
        let at = |di: isize, dj: isize| {
            let i = reflect_index(base[0] + di, nx) as usize;
            let j = if g.dim == 2 { reflect_index(base[1] + dj, ny) as usize } else { 0 };
            self.values[g.index(i, j)]
        };
        if g.dim == 1 {
            (1.0 - frac[0]) * at(0, 0) + frac[0] * at(1, 0)
        } else {
            let (tx, ty) = (frac[0], frac[1]);
            (1.0 - tx) * (1.0 - ty) * at(0, 0) + tx * (1.0 - ty) * at(1, 0) + (1.0 - tx) * ty * at(0, 1) + tx * ty * at(1, 1)
        }
    }

    /// Serializes to the grid text format: a header `dim n_axes... L_axes...`
    /// followed by one value per line in row-major order.
    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut out = String::with_capacity(self.values.len() * 24 + 32);
        out.push_str(&g.dim.to_string());
        for n in g.cell_counts() {
            let _ = write!(out, " {n}");
        }
        for l in g.extents() {
            let _ = write!(out, " {l}");
        }
        out.push('\n');
        for v in &self.values {
            let _ = writeln!(out, "{v}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| SwarmError::InvalidArgument(format!("field text: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("missing header"))?.split_whitespace().collect();
        let dim: usize = header.first().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad dimension"))?;
        if header.len() != 1 + 2 * dim {
            return Err(bad("header length does not match dimension"));
        }
        let cells: Vec<usize> = header[1..=dim]
            .iter()
            .map(|s| s.parse().map_err(|_| bad("bad cell count")))
            .collect::<Result<_>>()?;
        let extents: Vec<f64> = header[dim + 1..]
            .iter()
            .map(|s| s.parse().map_err(|_| bad("bad extent")))
            .collect::<Result<_>>()?;
        let grid = GridSpec::new(dim, &extents, &cells)?;
        let values: Vec<f64> = lines
            .map(|l| l.trim().parse::<f64>().map_err(|_| bad("bad value")))
            .collect::<Result<_>>()?;
        ScalarField::new(grid, values)
    }
}

/// Cell-centered velocity field. The second component of a 1D field is 0.
///
/// Zero normal flux is encoded structurally: [`divergence`] never reads a
/// boundary face, and [`VectorField::interpolate`] reflects the normal
/// component oddly so it vanishes on ∂Ω.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    values: Vec<Vec2>,
}

impl VectorField {
    pub fn new(grid: GridSpec, values: Vec<Vec2>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(SwarmError::InvalidArgument(format!(
                "vector field has {} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(cell) = values.iter().position(|v| !(v[0].is_finite() && v[1].is_finite())) {
            return Err(SwarmError::NonFiniteState { cell });
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: GridSpec, values: Vec<Vec2>) -> Self {
        Self { grid, values }
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        Self { grid: grid.clone(), values: vec![[0.0; 2]; grid.len()] }
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(Vec2) -> Vec2) -> Self {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|idx| {
                let mut v = f(grid.center(idx));
                if dim == 1 {
                    v[1] = 0.0;
                }
                v
            })
            .collect();
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Vec2] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Vec2] {
        &mut self.values
    }

    pub fn get(&self, idx: usize) -> Vec2 {
        self.values[idx]
    }

    pub fn component(&self, axis: usize) -> ScalarField {
        ScalarField::from_raw(self.grid.clone(), self.values.iter().map(|v| v[axis]).collect())
    }

    pub fn inner(&self, other: &VectorField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.values.iter().zip(&other.values).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Largest component magnitude.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().flat_map(|v| v.iter()).fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Pointwise product with a scalar field, e.g. the mass flux `ρ v`.
    pub fn scaled_by(&self, s: &ScalarField) -> Result<Self> {
        self.grid.check_same(s.grid())?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(s.values()).map(|(v, c)| [v[0] * c, v[1] * c]).collect(),
        })
    }

    pub fn sub(&self, other: &VectorField) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect(),
        })
    }

    /// Zeroes the wall-normal component in every boundary cell.
    pub fn project_boundary_normal(&mut self) {
        let g = &self.grid;
        for (idx, v) in self.values.iter_mut().enumerate() {
            for a in 0..g.dim {
                if g.on_boundary(idx, a) {
                    v[a] = 0.0;
                }
            }
        }
    }

    /// Bilinear interpolation; the wall-normal component is reflected oddly so
    /// that it is exactly zero on ∂Ω, tangential components evenly.
    pub fn interpolate(&self, p: Vec2) -> Vec2 {
        let g = &self.grid;
        let (p, _) = g.clamp(p);
        let mut base = [0isize; 2];
        let mut frac = [0.0; 2];
        for a in 0..g.dim {
            let s = p[a] / g.h(a) - 0.5;
            let f = s.floor();
            base[a] = f as isize;
            frac[a] = s - f;
        }
        let n = [g.cells[0] as isize, g.cells[1] as isize];
        let mut out = [0.0; 2];
        for (comp, o) in out.iter_mut().enumerate().take(g.dim) {
            let at = |di: isize, dj: isize| {
                let mut sign = 1.0;
                let mut ij = [0usize; 2];
                for (a, d) in [(0usize, di), (1usize, dj)] {
                    if a >= g.dim {
                        continue;
                    }
                    let k = base[a] + d;
                    if a == comp {
                        let (k, s) = odd_reflect_index(k, n[a]);
                        sign *= s;
                        ij[a] = k as usize;
                    } else {
                        ij[a] = reflect_index(k, n[a]) as usize;
                    }
                }
                sign * self.values[g.index(ij[0], ij[1])][comp]
            };
            *o = if g.dim == 1 {
                (1.0 - frac[0]) * at(0, 0) + frac[0] * at(1, 0)
            } else {
                let (tx, ty) = (frac[0], frac[1]);
                (1.0 - tx) * (1.0 - ty) * at(0, 0)
                    + tx * (1.0 - ty) * at(1, 0)
                    + (1.0 - tx) * ty * at(0, 1)
                    + tx * ty * at(1, 1)
            };
        }
        out
    }
}

/// Central-difference gradient with Neumann reflection ghosts.
pub fn gradient(f: &ScalarField) -> VectorField {
    gradient_with(f, Boundary::Reflect)
}

pub fn gradient_with(f: &ScalarField, bc: Boundary) -> VectorField {
    let g = f.grid();
    let vals = f.values();
    let values = (0..g.len())
        .map(|idx| {
            let mut out = [0.0; 2];
            for (a, o) in out.iter_mut().enumerate().take(g.dim()) {
                let up = vals[g.neighbor(idx, a, 1, bc)];
                let down = vals[g.neighbor(idx, a, -1, bc)];
                *o = (up - down) / (2.0 * g.h(a));
            }
            out
        })
        .collect();
    VectorField::from_raw(g.clone(), values)
}

/// Conservative divergence: face values are arithmetic means of adjacent
/// cells and boundary faces carry zero flux.
pub fn divergence(v: &VectorField) -> ScalarField {
    let g = v.grid();
    let vals = v.values();
    let mut out = vec![0.0; g.len()];
    for a in 0..g.dim() {
        let h = g.h(a);
        for (idx, o) in out.iter_mut().enumerate() {
            let (i, j) = g.coords(idx);
            let k = if a == 0 { i } else { j };
            let n = g.n(a);
            let here = vals[idx][a];
            let plus = if k + 1 < n { 0.5 * (here + vals[g.neighbor(idx, a, 1, Boundary::Reflect)][a]) } else { 0.0 };
            let minus = if k > 0 { 0.5 * (here + vals[g.neighbor(idx, a, -1, Boundary::Reflect)][a]) } else { 0.0 };
            *o += (plus - minus) / h;
        }
    }
    ScalarField::from_raw(g.clone(), out)
}

/// Neumann Laplacian, assembled as `divergence(gradient(f))`.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    divergence(&gradient(f))
}

/// Discrete perpendicular gradient `(∂_y ψ, -∂_x ψ)` of a stream function
/// that vanishes on ∂Ω. Uses the same face-average stencil as
/// [`divergence`], so the result is divergence-free to rounding.
pub fn perp_gradient_of_stream(psi: &ScalarField) -> Result<VectorField> {
    let g = psi.grid();
    if g.dim() != 2 {
        return Err(SwarmError::InvalidArgument("stream functions need a 2D grid".into()));
    }
    let vals = psi.values();
    let d = |idx: usize, a: usize| {
        let (i, j) = g.coords(idx);
        let k = if a == 0 { i } else { j } as isize;
        let n = g.n(a) as isize;
        let pick = |kk: isize| {
            let (kk, s) = odd_reflect_index(kk, n);
            let id = if a == 0 { g.index(kk as usize, j) } else { g.index(i, kk as usize) };
            s * vals[id]
        };
        (pick(k + 1) - pick(k - 1)) / (2.0 * g.h(a))
    };
    let values = (0..g.len()).map(|idx| [d(idx, 1), -d(idx, 0)]).collect();
    Ok(VectorField::from_raw(g.clone(), values))
}

/// Truncated jet of a field at one cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub order: usize,
    pub value: f64,
    gradient: Option<Vec2>,
    hessian: Option<Mat2>,
}

impl Jet {
    pub fn from_parts(value: f64, gradient: Option<Vec2>, hessian: Option<Mat2>) -> Self {
        let order = if hessian.is_some() {
            2
        } else if gradient.is_some() {
            1
        } else {
            0
        };
        Self { order, value, gradient, hessian }
    }

    pub fn gradient(&self) -> Option<Vec2> {
        self.gradient
    }

    pub fn hessian(&self) -> Option<Mat2> {
        self.hessian
    }
}

/// Order-`m` jet of `f` at cell `idx` from the reflecting stencils.
pub fn jet_at(f: &ScalarField, idx: usize, m: usize) -> Result<Jet> {
    jet_at_with(f, idx, m, Boundary::Reflect)
}

pub fn jet_at_with(f: &ScalarField, idx: usize, m: usize, bc: Boundary) -> Result<Jet> {
    if m > 2 {
        return Err(SwarmError::InvalidArgument(format!("jet order {m} exceeds 2")));
    }
    let g = f.grid();
    let v = f.values();
    let value = v[idx];
    let gradient = (m >= 1).then(|| {
        let mut out = [0.0; 2];
        for (a, o) in out.iter_mut().enumerate().take(g.dim()) {
            *o = (v[g.neighbor(idx, a, 1, bc)] - v[g.neighbor(idx, a, -1, bc)]) / (2.0 * g.h(a));
        }
        out
    });
    let hessian = (m >= 2).then(|| {
        let mut hm = [[0.0; 2]; 2];
        for a in 0..g.dim() {
            let h = g.h(a);
            hm[a][a] = (v[g.neighbor(idx, a, 1, bc)] - 2.0 * value + v[g.neighbor(idx, a, -1, bc)]) / (h * h);
        }
        if g.dim() == 2 {
            let corner = |dx: isize, dy: isize| v[g.neighbor(g.neighbor(idx, 0, dx, bc), 1, dy, bc)];
            let xy = (corner(1, 1) - corner(1, -1) - corner(-1, 1) + corner(-1, -1)) / (4.0 * g.h(0) * g.h(1));
            hm[0][1] = xy;
            hm[1][0] = xy;
        }
        hm
    });
    Ok(Jet { order: m, value, gradient, hessian })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn build_grid_centers_and_volume() {
        let g = build_grid(1, &[1.0], &[4]).unwrap();
        let c: Vec<f64> = (0..4).map(|i| g.center(i)[0]).collect();
        assert_eq!(c, vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(g.h(0), 0.25);

        let g = build_grid(2, &[1.0, 2.0], &[8, 16]).unwrap();
        assert_eq!((g.h(0), g.h(1)), (0.125, 0.125));
        assert_eq!(g.cell_volume(), 0.015625);
    }

    #[test]
    fn build_grid_rejects_bad_input() {
        assert!(build_grid(3, &[1.0, 1.0, 1.0], &[4, 4, 4]).is_err());
        assert!(build_grid(1, &[1.0], &[3]).is_err());
        assert!(build_grid(1, &[-1.0], &[8]).is_err());
        assert!(build_grid(2, &[1.0], &[8]).is_err());
    }

    #[test]
    fn gradient_of_constant_and_linear() {
        let g = GridSpec::unit_interval(64).unwrap();
        let c = ScalarField::constant(&g, 3.5);
        assert!(gradient(&c).max_abs() == 0.0);
        let lin = ScalarField::from_fn(&g, |p| p[0]);
        let gr = gradient(&lin);
        for idx in 1..63 {
            assert!((gr.get(idx)[0] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_is_second_order() {
        let err = |n: usize| {
            let g = GridSpec::unit_interval(n).unwrap();
            let f = ScalarField::from_fn(&g, |p| (PI * p[0]).cos());
            let gr = gradient(&f);
            (1..n - 1).map(|i| (gr.get(i)[0] + PI * (PI * g.center(i)[0]).sin()).abs()).fold(0.0, f64::max)
        };
        let e1 = err(128);
        let e2 = err(256);
        assert!(e1 < 1e-3);
        assert!((e1 / e2).log2() > 1.9, "order {}", (e1 / e2).log2());
    }

    #[test]
    fn divergence_of_constant_flow_lives_at_the_walls() {
        let g = GridSpec::unit_interval(16).unwrap();
        let v = VectorField::from_fn(&g, |_| [1.0, 0.0]);
        let d = divergence(&v);
        assert!(d.get(0) > 0.0 && d.get(15) < 0.0);
        for idx in 1..15 {
            assert_eq!(d.get(idx), 0.0);
        }
        assert!(d.mass().abs() < 1e-12);
    }

    #[test]
    fn stream_function_field_is_discretely_divergence_free() {
        let g = GridSpec::unit_square(64).unwrap();
        let psi = ScalarField::from_fn(&g, |p| (PI * p[0]).sin() * (PI * p[1]).sin());
        let v = perp_gradient_of_stream(&psi).unwrap();
        let d = divergence(&v);
        assert!(d.values().iter().all(|x| x.abs() <= 1e-10), "max {}", d.max().abs().max(d.min().abs()));
        // and it approximates the analytic field to second order
        let exact = |p: Vec2| [PI * (PI * p[0]).sin() * (PI * p[1]).cos(), -PI * (PI * p[0]).cos() * (PI * p[1]).sin()];
        let err = (0..g.len())
            .map(|i| {
                let e = exact(g.center(i));
                (v.get(i)[0] - e[0]).abs().max((v.get(i)[1] - e[1]).abs())
            })
            .fold(0.0, f64::max);
        assert!(err < 5e-3, "{err}");
    }

    #[test]
    fn laplacian_rayleigh_quotient_and_compatibility() {
        let g = GridSpec::unit_interval(128).unwrap();
        let f = ScalarField::from_fn(&g, |p| (PI * p[0]).cos());
        let lap = laplacian(&f);
        let rq = -f.inner(&lap) / f.inner(&f);
        assert!((rq / (PI * PI) - 1.0).abs() < 5e-3, "{rq}");
        assert!(lap.mass().abs() < 1e-10);
        assert!(laplacian(&ScalarField::constant(&g, 2.0)).max_abs_value() == 0.0);
    }

    #[test]
    fn laplacian_is_div_of_grad_bitwise() {
        let g = GridSpec::new(2, &[1.0, 1.5], &[12, 9]).unwrap();
        let f = ScalarField::from_fn(&g, |p| (3.0 * p[0]).sin() + p[1] * p[1] * p[0]);
        assert_eq!(laplacian(&f), divergence(&gradient(&f)));
    }

    #[test]
    fn laplacian_converges_at_second_order() {
        let err = |n: usize| {
            let g = GridSpec::unit_square(n).unwrap();
            let f = ScalarField::from_fn(&g, |p| (PI * p[0]).cos() * (2.0 * PI * p[1]).cos());
            let lap = laplacian(&f);
            let exact = f.scale(-5.0 * PI * PI);
            lap.sub(&exact).unwrap().norm_l2()
        };
        let (e1, e2, e3) = (err(16), err(32), err(64));
        assert!((e1 / e2).log2() >= 1.9 && (e2 / e3).log2() >= 1.9);
    }

    #[test]
    fn jets() {
        let g = GridSpec::unit_interval(32).unwrap();
        let f = ScalarField::from_fn(&g, |p| p[0] * p[0]);
        let j0 = jet_at(&f, 5, 0).unwrap();
        assert_eq!(j0.value, f.get(5));
        assert!(j0.gradient().is_none());
        let j2 = jet_at(&f, 10, 2).unwrap();
        assert!((j2.hessian().unwrap()[0][0] - 2.0).abs() < 1e-8);
        let lin = ScalarField::from_fn(&g, |p| 3.0 * p[0] - 1.0);
        assert!((jet_at(&lin, 7, 1).unwrap().gradient().unwrap()[0] - 3.0).abs() < 1e-10);
        assert!(jet_at(&f, 0, 3).is_err());

        let g2 = GridSpec::unit_square(16).unwrap();
        let f2 = ScalarField::from_fn(&g2, |p| (p[0] * 3.0).sin() * p[1].exp());
        let h = jet_at(&f2, g2.index(0, 15), 2).unwrap().hessian().unwrap();
        assert!((h[0][1] - h[1][0]).abs() <= 1e-12);
    }

    #[test]
    fn text_format_roundtrip() {
        let g = GridSpec::new(2, &[1.0, 2.0], &[4, 5]).unwrap();
        let f = ScalarField::from_fn(&g, |p| p[0] * 0.1 + p[1].sin());
        let txt = f.to_text();
        assert!(txt.starts_with("2 4 5 1 2\n"));
        assert_eq!(ScalarField::from_text(&txt).unwrap(), f);
    }

    #[test]
    fn interpolation_reproduces_linear_data_inside() {
        let g = GridSpec::unit_square(16).unwrap();
        let f = ScalarField::from_fn(&g, |p| 2.0 * p[0] - p[1]);
        let p = [0.41, 0.73];
        assert!((f.interpolate(p) - (2.0 * 0.41 - 0.73)).abs() < 1e-12);
        let v = VectorField::from_fn(&g, |p| [p[0] * (1.0 - p[0]), 0.0]);
        assert_eq!(v.interpolate([0.0, 0.5])[0], 0.0);
        assert_eq!(v.interpolate([1.0, 0.5])[0], 0.0);
    }

    impl ScalarField {
        fn max_abs_value(&self) -> f64 {
            self.values().iter().fold(0.0, |m, v| m.max(v.abs()))
        }
    }
}
