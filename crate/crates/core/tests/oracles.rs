use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swarmfield::analysis::{RotationCenter, DEFAULT_FLOW_STEP};
use swarmfield::controllers::{pointwise_catalog, POINTWISE_NAMES};
use swarmfield::velocity::{named_field, FIELD_NAMES};
use swarmfield::{
    equivariance_residual, fit_decay, heat_reference, simulate, transport_linear, w2_1d, w2_exact_small, w2_sinkhorn, Controller,
    GridSpec, IntegratorConfig, ScalarField, Transform,
};

#[test]
fn heat_oracle_in_two_dimensions() {
    let g = GridSpec::unit_square(128).unwrap();
    let mu = ScalarField::constant(&g, 1.0);
    let rho0 = ScalarField::from_fn(&g, |p| 1.0 + 0.3 * (PI * p[0]).cos() * (PI * p[1]).cos());
    let config = IntegratorConfig { t_end: 0.1, sample_stride: 100_000, ..IntegratorConfig::default() };
    let traj = simulate(&rho0, &Controller::error_gradient(), &mu, &config).unwrap();
    let e = traj.final_density().unwrap().sub(&mu).unwrap();
    let reference = heat_reference(&rho0.sub(&mu).unwrap(), 0.1, None).unwrap();
    let rel = e.sub(&reference).unwrap().norm_l2() / reference.norm_l2();
    assert!(rel <= 0.08, "{rel}");
}

#[test]
fn w2_decays_at_least_at_ninety_percent_of_lambda1() {
    let g = GridSpec::unit_interval(256).unwrap();
    let mu = ScalarField::constant(&g, 1.0);
    let rho0 = ScalarField::from_fn(&g, |p| 1.0 + 0.3 * (PI * p[0]).cos());
    let config = IntegratorConfig { t_end: 1.0, sample_stride: 4000, ..IntegratorConfig::default() };
    let traj = simulate(&rho0, &Controller::error_gradient(), &mu, &config).unwrap();
    let w: Vec<f64> = traj.densities.iter().map(|r| w2_1d(r, &mu).unwrap()).collect();
    let fit = fit_decay(&traj.times, &w, None).unwrap();
    assert!(fit.lambda_hat >= 0.9 * PI * PI, "{}", fit.lambda_hat);
    let e0 = rho0.sub(&mu).unwrap();
    let (a, b) = (mu.min() + e0.min(), mu.max() + e0.max());
    let c = (b / a).sqrt();
    for (t, wt) in traj.times.iter().zip(&w) {
        assert!(*wt <= 1.1 * c * (-PI * PI * t).exp() * w[0]);
    }
}

fn zero_mean_bumps(g: &GridSpec) -> ScalarField {
    let bump = |p: [f64; 2], c: [f64; 2]| {
        let r2 = (p[0] - c[0]).powi(2) + if g.dim() == 2 { (p[1] - c[1]).powi(2) } else { 0.0 };
        (-r2 / (2.0 * 0.1f64.powi(2))).exp()
    };
    ScalarField::from_fn(g, |p| bump(p, [0.3, 0.35]) - 0.7 * bump(p, [0.65, 0.6])).zero_mean()
}

#[test]
fn transport_conserves_l1_and_zero_mean_for_every_catalog_field() {
    let ts: Vec<f64> = (0..=20).map(|k| 0.25 * k as f64).collect();
    for name in FIELD_NAMES {
        let g = if name == "logistic_1d" { GridSpec::unit_interval(1024).unwrap() } else { GridSpec::unit_square(128).unwrap() };
        let b = named_field(name, &g).unwrap();
        let e0 = zero_mean_bumps(&g);
        let mut drifts = Vec::new();
        for step in [DEFAULT_FLOW_STEP, 0.5 * DEFAULT_FLOW_STEP] {
            let run = transport_linear(&e0, b.as_ref(), &ts, step).unwrap();
            for f in &run.fields {
                assert!(f.mass().abs() <= 1e-8, "{name}: mean {}", f.mass());
            }
            drifts.push(run.l1_drift());
        }
        assert!(drifts.iter().all(|d| *d <= 0.02), "{name}: {drifts:?}");
    }
}

#[test]
fn nonzero_pointwise_laws_break_rotation_symmetry() {
    let g = GridSpec::unit_square(48).unwrap();
    let rho = ScalarField::from_fn(&g, |p| 1.0 + 0.3 * (PI * p[0]).cos() * (2.0 * PI * p[1]).cos() + 0.1 * (PI * p[1]).sin());
    let mu = ScalarField::from_fn(&g, |p| 1.0 + 0.2 * (2.0 * PI * p[0]).sin() * (PI * p[1]).cos());
    let rotations: Vec<Transform> = [RotationCenter::GridCenter, RotationCenter::Cell(13, 30)]
        .into_iter()
        .flat_map(|center| (1..=3).map(move |q| Transform::Rotate { quarter_turns: q, center }))
        .collect();
    let worst = |c: &Controller| rotations.iter().map(|t| equivariance_residual(c, *t, &rho, &mu).unwrap()).fold(0.0, f64::max);
    for name in POINTWISE_NAMES.iter().filter(|n| **n != "logistic_1d") {
        let c = pointwise_catalog(name, 2).unwrap();
        assert!(worst(&c) > 0.1, "{name}: {}", worst(&c));
    }
    assert_eq!(worst(&Controller::zero()), 0.0);
}

/// Two random cosine modes with amplitudes in `[0.3, 0.45]` and random signs.
fn random_pair_member(g: &GridSpec, rng: &mut ChaCha8Rng) -> ScalarField {
    let modes = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (2.0, 1.0), (1.0, 2.0)];
    let mut terms = Vec::new();
    for _ in 0..2 {
        let (kx, ky) = modes[rng.gen_range(0..modes.len())];
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        terms.push((kx, ky, sign * rng.gen_range(0.3..0.45)));
    }
    ScalarField::from_fn(g, |p| 1.0 + terms.iter().map(|(kx, ky, a)| a * (kx * PI * p[0]).cos() * (ky * PI * p[1]).cos()).sum::<f64>())
        .normalized()
        .unwrap()
}

#[test]
fn sinkhorn_matches_exact_transport_on_32x32() {
    let g = GridSpec::unit_square(32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut checked = 0;
    while checked < 3 {
        let (a, b) = (random_pair_member(&g, &mut rng), random_pair_member(&g, &mut rng));
        let exact = w2_exact_small(&a, &b).unwrap().0;
        // the cell-atom oracle exceeds the piecewise-constant W2 by an absolute
        // amount of order h, so relative agreement is only meaningful once the
        // distance spans a few cells
        if exact < 3.0 * g.h(0) {
            continue;
        }
        let approx = w2_sinkhorn(&a, &b, g.h(0).powi(2), 20_000).unwrap().value;
        assert!((approx - exact).abs() / exact <= 0.02, "{approx} vs {exact}");
        checked += 1;
    }
}

#[test]
fn sinkhorn_tracks_the_piecewise_constant_quantile_formula() {
    let g = GridSpec::unit_interval(32).unwrap();
    for amp in [0.05, 0.1, 0.2, 0.4] {
        let a = ScalarField::from_fn(&g, |p| 1.0 + amp * (PI * p[0]).cos()).normalized().unwrap();
        let b = ScalarField::from_fn(&g, |p| 1.0 - amp * (2.0 * PI * p[0]).cos()).normalized().unwrap();
        let quantile = w2_1d(&a, &b).unwrap();
        let approx = w2_sinkhorn(&a, &b, g.h(0).powi(2), 50_000).unwrap().value;
        assert!((approx - quantile).abs() / quantile <= 5e-3, "amp {amp}: {approx} vs {quantile}");
    }
}
