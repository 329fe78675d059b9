//! Commutation of a controller with grid symmetries.

use serde::{Deserialize, Serialize};

use crate::controllers::{apply, apply_with, Controller};
use crate::error::{Result, SwarmError};
use crate::grid::{Boundary, GridSpec, ScalarField, Vec2, VectorField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationCenter {
    /// Center of the box; the grid maps onto itself with its walls.
    GridCenter,
    /// Center of cell `(i, j)` on the periodic torus.
    Cell(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// Whole-cell shift on the periodic shadow domain.
    Translate { shift: [isize; 2] },
    /// Counter-clockwise rotation by `quarter_turns · 90°`.
    Rotate { quarter_turns: u8, center: RotationCenter },
}

/// Index permutation `dest[idx]` and the vector action of a transform.
struct Action {
    dest: Vec<usize>,
    quarter_turns: u8,
    bc: Boundary,
}

impl Action {
    fn new(grid: &GridSpec, t: Transform) -> Result<Self> {
        let (nx, ny) = (grid.n(0), grid.n(1));
        let wrap = |v: isize, n: usize| v.rem_euclid(n as isize) as usize;
        match t {
            Transform::Translate { shift } => {
                if grid.dim() == 1 && shift[1] != 0 {
                    return Err(SwarmError::UnsupportedTransform("vertical shift on a 1D grid".into()));
                }
                let dest = (0..grid.len())
                    .map(|idx| {
                        let (i, j) = grid.coords(idx);
                        grid.index(wrap(i as isize + shift[0], nx), wrap(j as isize + shift[1], ny))
                    })
                    .collect();
                Ok(Self { dest, quarter_turns: 0, bc: Boundary::Periodic })
            }
            Transform::Rotate { quarter_turns, center } => {
                if grid.dim() != 2 || !grid.is_square() || nx != ny {
                    return Err(SwarmError::UnsupportedTransform("rotations need a square 2D grid".into()));
                }
                let q = quarter_turns % 4;
                let n = nx as isize;
                let (bc, rot): (Boundary, Box<dyn Fn(isize, isize) -> (isize, isize)>) = match center {
                    RotationCenter::GridCenter => (Boundary::Reflect, Box::new(move |i, j| (n - 1 - j, i))),
                    RotationCenter::Cell(ci, cj) => {
                        if ci >= nx || cj >= ny {
                            return Err(SwarmError::UnsupportedTransform(format!("cell ({ci}, {cj}) is off the grid")));
                        }
                        let (ci, cj) = (ci as isize, cj as isize);
                        (Boundary::Periodic, Box::new(move |i, j| ((ci - (j - cj)).rem_euclid(n), (cj + (i - ci)).rem_euclid(n))))
                    }
                };
                let dest = (0..grid.len())
                    .map(|idx| {
                        let (i, j) = grid.coords(idx);
                        let (mut a, mut b) = (i as isize, j as isize);
                        for _ in 0..q {
                            (a, b) = rot(a, b);
                        }
                        grid.index(a as usize, b as usize)
                    })
                    .collect();
                Ok(Self { dest, quarter_turns: q, bc })
            }
        }
    }

    fn rotate(&self, mut v: Vec2) -> Vec2 {
        for _ in 0..self.quarter_turns {
            v = [-v[1], v[0]];
        }
        v
    }

    fn push_scalar(&self, f: &ScalarField) -> Result<ScalarField> {
        let mut out = vec![0.0; f.values().len()];
        for (idx, v) in f.values().iter().enumerate() {
            out[self.dest[idx]] = *v;
        }
        ScalarField::new(f.grid().clone(), out)
    }

    fn push_vector(&self, f: &VectorField) -> Result<VectorField> {
        let mut out = vec![[0.0; 2]; f.values().len()];
        for (idx, v) in f.values().iter().enumerate() {
            out[self.dest[idx]] = self.rotate(*v);
        }
        VectorField::new(f.grid().clone(), out)
    }

    fn controller(&self, c: &Controller, rho: &ScalarField, mu: &ScalarField) -> Result<VectorField> {
        match self.bc {
            Boundary::Reflect => apply(c, rho, mu),
            Boundary::Periodic => apply_with(c, rho, mu, Boundary::Periodic).map(|(v, _)| v),
        }
    }
}

/// `‖T K(ρ, μ) - K(Tρ, Tμ)‖_{L²} / max(‖K(ρ, μ)‖_{L²}, 1e-12)`.
///
/// Scalars are pushed forward as `(Tf)(x) = f(T⁻¹x)` and vectors also have
/// their values rotated. Translations and cell-centered rotations act on
/// the periodic shadow of the box; rotations about the grid center keep
/// the walls.
pub fn equivariance_residual(
    controller: &Controller,
    transform: Transform,
    rho: &ScalarField,
    mu: &ScalarField,
) -> Result<f64> {
    if rho.grid() != mu.grid() {
        return Err(SwarmError::GridMismatch);
    }
    let act = Action::new(rho.grid(), transform)?;
    let k = act.controller(controller, rho, mu)?;
    let lhs = act.push_vector(&k)?;
    let rhs = act.controller(controller, &act.push_scalar(rho)?, &act.push_scalar(mu)?)?;
    Ok(lhs.sub(&rhs)?.norm_l2() / k.norm_l2().max(1e-12))
}
