//! Correlation-decay diagnostics for flows with an invariant density.

use serde::Serialize;

use crate::error::{Result, SwarmError};
use crate::grid::{divergence, ScalarField, Vec2};
use crate::velocity::Velocity;

use super::flow::{orbit, Reversed};

const INVARIANCE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Decaying,
    Oscillating,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Decaying => "decaying",
            Verdict::Oscillating => "oscillating",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixingReport {
    pub t_grid: Vec<f64>,
    /// `C(t) = ⟨f, g ∘ φ_t⁻¹⟩_π`.
    pub correlations: Vec<f64>,
    /// `⟨1, f⟩_π ⟨1, g⟩_π`.
    pub product_of_means: f64,
    pub verdict: Verdict,
}

impl MixingReport {
    /// `|C(t) - ⟨1,f⟩⟨1,g⟩|` normalized by its value at the first time.
    pub fn relative_gaps(&self) -> Vec<f64> {
        let gaps: Vec<f64> = self.correlations.iter().map(|c| (c - self.product_of_means).abs()).collect();
        let g0 = gaps.first().copied().unwrap_or(0.0);
        gaps.iter().map(|g| if g0 > 0.0 { g / g0 } else { 0.0 }).collect()
    }
}

/// Classifies a correlation series.
///
/// * oscillating: the gap never falls below 50% of its initial value, or
///   climbs back above 50% after having fallen below it;
/// * decaying: otherwise, if it stays within 5% over the last third;
/// * inconclusive: anything else.
///
/// A zero initial gap (a constant test function) counts as decaying.
pub fn classify(rel_gaps: &[f64], initial_gap: f64) -> Verdict {
    if initial_gap <= f64::MIN_POSITIVE || rel_gaps.is_empty() {
        return Verdict::Decaying;
    }
    let first_drop = rel_gaps.iter().position(|g| *g < 0.5);
    let recurs = match first_drop {
        None => true,
        Some(k) => rel_gaps[k..].iter().any(|g| *g > 0.5),
    };
    if recurs {
        return Verdict::Oscillating;
    }
    let tail_start = rel_gaps.len() - rel_gaps.len().div_ceil(3);
    if rel_gaps[tail_start..].iter().all(|g| *g <= 0.05) {
        Verdict::Decaying
    } else {
        Verdict::Inconclusive
    }
}

fn report(t_grid: Vec<f64>, correlations: Vec<f64>, product_of_means: f64) -> MixingReport {
    let g0 = correlations.first().map_or(0.0, |c| (c - product_of_means).abs());
    let mut r = MixingReport { t_grid, correlations, product_of_means, verdict: Verdict::Inconclusive };
    r.verdict = classify(&r.relative_gaps(), g0);
    r
}

/// `C(t) = Σ_y f(y) g(φ_t⁻¹ y) π(y) vol` over cell centers, with the inverse
/// flow integrated by RK4. `π` must be a probability density that the flow
/// preserves: `‖∇·(π b)‖_∞ ≤ 1e-6` on the sampled field.
pub fn mixing_correlation(
    b: &dyn Velocity,
    pi: &ScalarField,
    f: &dyn Fn(Vec2) -> f64,
    g: &dyn Fn(Vec2) -> f64,
    t_grid: &[f64],
    step: f64,
) -> Result<MixingReport> {
    let grid = pi.grid();
    let sampled = b.sample(grid)?;
    let flux = sampled.scaled_by(pi)?;
    let residual = divergence(&flux).values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if residual > INVARIANCE_TOL {
        return Err(SwarmError::NotInvariant { residual });
    }
    if !pi.is_probability_density(1e-9) {
        return Err(SwarmError::InvalidArgument("invariant density must be a probability density".into()));
    }
    let vol = grid.cell_volume();
    let rev = Reversed(b);
    let mut corr = vec![0.0; t_grid.len()];
    let (mut mf, mut mg) = (0.0, 0.0);
    for idx in 0..grid.len() {
        let y = grid.center(idx);
        let w = pi.get(idx) * vol;
        let fy = f(y);
        mf += w * fy;
        mg += w * g(y);
        if w == 0.0 {
            continue;
        }
        let o = orbit(&rev, grid, y, t_grid, step)?;
        for (c, x) in corr.iter_mut().zip(&o.positions) {
            *c += w * fy * g(*x);
        }
    }
    Ok(report(t_grid.to_vec(), corr, mf * mg))
}

/// Arnold cat map `(x, y) ↦ (2x + y, x + y) mod 1` on the `N × N` lattice
/// `{(i/N, j/N)}`, where it is an exact permutation. Correlations are taken
/// against the uniform measure for integer times `0..=iterations`.
pub fn cat_map_correlation(
    n: usize,
    iterations: usize,
    f: &dyn Fn(Vec2) -> f64,
    g: &dyn Fn(Vec2) -> f64,
) -> Result<MixingReport> {
    if n < 2 {
        return Err(SwarmError::InvalidArgument("lattice needs at least 2 points per side".into()));
    }
    let w = 1.0 / (n * n) as f64;
    let pt = |i: usize, j: usize| [i as f64 / n as f64, j as f64 / n as f64];
    let mut fv = vec![0.0; n * n];
    let mut gv = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            fv[j * n + i] = f(pt(i, j));
            gv[j * n + i] = g(pt(i, j));
        }
    }
    let (mf, mg) = (fv.iter().sum::<f64>() * w, gv.iter().sum::<f64>() * w);
    // g ∘ T⁻ⁿ at y equals g at T⁻ⁿ y; walk each lattice point backwards
    // with T⁻¹(x, y) = (x - y, 2y - x).
    let mut back: Vec<(usize, usize)> = (0..n * n).map(|k| (k % n, k / n)).collect();
    let mut corr = Vec::with_capacity(iterations + 1);
    for _ in 0..=iterations {
        let c: f64 = back.iter().enumerate().map(|(k, &(i, j))| fv[k] * gv[j * n + i]).sum::<f64>() * w;
        corr.push(c);
        for p in back.iter_mut() {
            let (i, j) = (p.0 as i64, p.1 as i64);
            let nn = n as i64;
            *p = ((i - j).rem_euclid(nn) as usize, (2 * j - i).rem_euclid(nn) as usize);
        }
    }
    let times = (0..=iterations).map(|k| k as f64).collect();
    Ok(report(times, corr, mf * mg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::velocity::{LogisticField, StreamField, ZeroField};
    use std::f64::consts::PI;

    fn uniform(g: &GridSpec) -> ScalarField {
        ScalarField::constant(g, 1.0 / g.volume())
    }

    #[test]
    fn classify_rules() {
        assert_eq!(classify(&[1.0, 0.9, 0.8, 0.7], 1.0), Verdict::Oscillating);
        assert_eq!(classify(&[1.0, 0.3, 0.7, 0.1], 1.0), Verdict::Oscillating);
        assert_eq!(classify(&[1.0, 0.3, 0.1, 0.04, 0.01, 0.0], 1.0), Verdict::Decaying);
        assert_eq!(classify(&[1.0, 0.3, 0.2, 0.2, 0.2, 0.2], 1.0), Verdict::Inconclusive);
    }

    #[test]
    fn constant_test_function_gives_product_of_means() {
        let g = GridSpec::unit_square(24).unwrap();
        let f = |p: Vec2| (2.0 * PI * p[0]).sin() + 0.3;
        let one = |_: Vec2| 2.0;
        let r = mixing_correlation(&StreamField::rotation(), &uniform(&g), &f, &one, &[0.0, 0.5, 1.0], 0.01).unwrap();
        for c in &r.correlations {
            assert!((c - r.product_of_means).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_flow_is_constant_and_oscillating() {
        let g = GridSpec::unit_square(16).unwrap();
        let f = |p: Vec2| (2.0 * PI * p[0]).sin();
        let ts: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let r = mixing_correlation(&ZeroField { dim: 2 }, &uniform(&g), &f, &f, &ts, 0.1).unwrap();
        assert!(r.correlations.iter().all(|c| *c == r.correlations[0]));
        assert_eq!(r.verdict, Verdict::Oscillating);
    }

    #[test]
    fn compressible_field_without_invariant_uniform_density() {
        let g = GridSpec::unit_interval(32).unwrap();
        let f = |p: Vec2| p[0];
        let r = mixing_correlation(&LogisticField::default(), &uniform(&g), &f, &f, &[0.0], 0.01);
        assert!(matches!(r, Err(SwarmError::NotInvariant { .. })));
    }

    #[test]
    fn cat_map_decorrelates() {
        let f = |p: Vec2| ((2.0 * PI * p[0]).sin() + (2.0 * PI * p[1]).cos()).exp();
        let r = cat_map_correlation(256, 12, &f, &f).unwrap();
        let gaps = r.relative_gaps();
        assert!(gaps[10] < 0.05);
        assert_eq!(r.verdict, Verdict::Decaying);
    }
}
