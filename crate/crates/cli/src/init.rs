//! Named density initializers. Every result has unit mass.

use std::f64::consts::PI;

use swarmfield::{GridSpec, ScalarField};

use crate::error::{CliError, Result};
use crate::scenario::InitSpec;

pub const INITIALIZER_NAMES: [&str; 4] = ["uniform", "cosine_bump", "gaussian_bump", "two_bumps"];

fn allowed(kind: &str) -> &'static [&'static str] {
    match kind {
        "uniform" => &[],
        "cosine_bump" => &["amplitude", "modes"],
        "gaussian_bump" => &["center", "width", "floor"],
        _ => &["centers", "width", "floor", "weights"],
    }
}

fn present(spec: &InitSpec) -> Vec<&'static str> {
    let mut out = Vec::new();
    let flags = [
        ("amplitude", spec.amplitude.is_some()),
        ("modes", spec.modes.is_some()),
        ("center", spec.center.is_some()),
        ("centers", spec.centers.is_some()),
        ("width", spec.width.is_some()),
        ("floor", spec.floor.is_some()),
        ("weights", spec.weights.is_some()),
    ];
    for (name, set) in flags {
        if set {
            out.push(name);
        }
    }
    out
}

fn point(path: &str, grid: &GridSpec, v: &[f64]) -> Result<[f64; 2]> {
    if v.len() != grid.dim() {
        return Err(CliError::schema(path, format!("needs {} coordinates", grid.dim())));
    }
    let mut p = [0.0; 2];
    for (a, x) in v.iter().enumerate() {
        if !(0.0..=grid.extent(a)).contains(x) {
            return Err(CliError::schema(path, format!("coordinate {x} outside the box")));
        }
        p[a] = *x;
    }
    Ok(p)
}

fn gaussian(grid: &GridSpec, c: [f64; 2], w: f64) -> impl Fn([f64; 2]) -> f64 + '_ {
    move |p| {
        let mut r2 = (p[0] - c[0]).powi(2);
        if grid.dim() == 2 {
            r2 += (p[1] - c[1]).powi(2);
        }
        (-0.5 * r2 / (w * w)).exp()
    }
}

/// `uniform`: `1 / |Ω|`.
/// `cosine_bump`: `1 + a ∏ cos(k_i π x_i / L_i)`, `|a| < 1`, default `a = 0.3`, modes `(1, 0)`.
/// `gaussian_bump`: `floor + exp(-|x - c|² / 2w²)`, default center of the box, `w = 0.1`, `floor = 0.1`.
/// `two_bumps`: floor plus two weighted Gaussians, default centers at 0.3 and 0.7 along x.
///
/// All are normalized to unit mass.
pub fn build_density(spec: &InitSpec, grid: &GridSpec, path: &str) -> Result<ScalarField> {
    let kind = spec.kind.as_str();
    if !INITIALIZER_NAMES.contains(&kind) {
        return Err(CliError::InitializerUnknown { kind: "initializer", key: spec.kind.clone(), path: format!("{path}.kind") });
    }
    if let Some(extra) = present(spec).into_iter().find(|p| !allowed(kind).contains(p)) {
        return Err(CliError::schema(format!("{path}.{extra}"), format!("not a parameter of '{kind}'")));
    }
    let d = grid.dim();
    let mid = [0.5 * grid.extent(0), if d == 2 { 0.5 * grid.extent(1) } else { 0.0 }];
    let width = spec.width.unwrap_or(0.1);
    let floor = spec.floor.unwrap_or(0.1);
    if !(width > 0.0 && width.is_finite()) {
        return Err(CliError::schema(format!("{path}.width"), "must be positive"));
    }
    if !(floor >= 0.0 && floor.is_finite()) {
        return Err(CliError::schema(format!("{path}.floor"), "must be nonnegative"));
    }
    let raw = match kind {
        "uniform" => ScalarField::constant(grid, 1.0),
        "cosine_bump" => {
            let a = spec.amplitude.unwrap_or(0.3);
            if !(a.abs() < 1.0) {
                return Err(CliError::schema(format!("{path}.amplitude"), "must lie in (-1, 1)"));
            }
            let modes = spec.modes.clone().unwrap_or_else(|| if d == 1 { vec![1] } else { vec![1, 0] });
            if modes.len() != d {
                return Err(CliError::schema(format!("{path}.modes"), format!("needs {d} entries")));
            }
            ScalarField::from_fn(grid, |p| {
                let c: f64 = modes.iter().enumerate().map(|(i, k)| (*k as f64 * PI * p[i] / grid.extent(i)).cos()).product();
                1.0 + a * c
            })
        }
        "gaussian_bump" => {
            let c = match &spec.center {
                Some(v) => point(&format!("{path}.center"), grid, v)?,
                None => mid,
            };
            let g = gaussian(grid, c, width);
            ScalarField::from_fn(grid, |p| floor + g(p))
        }
        _ => {
            let centers = match &spec.centers {
                Some(cs) => {
                    if cs.len() != 2 {
                        return Err(CliError::schema(format!("{path}.centers"), "needs exactly two centers"));
                    }
                    [point(&format!("{path}.centers[0]"), grid, &cs[0])?, point(&format!("{path}.centers[1]"), grid, &cs[1])?]
                }
                None => [[0.3 * grid.extent(0), mid[1]], [0.7 * grid.extent(0), mid[1]]],
            };
            let w = spec.weights.clone().unwrap_or_else(|| vec![1.0, 1.0]);
            if w.len() != 2 || w.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return Err(CliError::schema(format!("{path}.weights"), "needs two nonnegative weights"));
            }
            let (g0, g1) = (gaussian(grid, centers[0], width), gaussian(grid, centers[1], width));
            ScalarField::from_fn(grid, |p| floor + w[0] * g0(p) + w[1] * g1(p))
        }
    };
    let rho = raw.normalized().map_err(|e| CliError::schema(path, e.to_string()))?;
    if !rho.is_probability_density(1e-9) {
        return Err(CliError::schema(path, "initializer did not produce a unit-mass nonnegative density"));
    }
    Ok(rho)
}
