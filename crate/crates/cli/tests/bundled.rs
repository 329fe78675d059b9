use std::path::{Path, PathBuf};

use serde_json::Value;
use swarmfield_cli::{load_scenario, run_scenario};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(name: &str) -> (Value, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let s = load_scenario(&scenario(name)).unwrap();
    let report = run_scenario(&s, dir.path()).unwrap();
    assert!(report.passed, "{name}: {:?}", report.failures);
    let text = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    (serde_json::from_str(&text).unwrap(), dir)
}

fn quantity(summary: &Value, key: &str) -> Value {
    summary["quantities"][key].clone()
}

#[test]
fn heat_1d_recovers_first_eigenvalue() {
    let (s, dir) = run("heat_1d.json");
    let ratio = quantity(&s, "fit_decay.lambda_ratio").as_f64().unwrap();
    assert!((0.97..=1.03).contains(&ratio), "{ratio}");
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,l2,w2,effort,min_rho,mass");
    assert!(dir.path().join("analysis/fit_decay.json").exists());
    assert!(dir.path().join("analysis/heat_reference.json").exists());
}

#[test]
fn rotation_transport_conserves_l1_and_does_not_mix() {
    let (s, _dir) = run("rotation_transport_2d.json");
    assert!(quantity(&s, "transport_linear.l1_drift").as_f64().unwrap() <= 0.02);
    assert_eq!(quantity(&s, "mixing_correlation.verdict"), "oscillating");
}

#[test]
fn fixed_point_stays_put() {
    let (s, _dir) = run("fixed_point.json");
    assert!(quantity(&s, "metrics.w2.max").as_f64().unwrap() <= 1e-6);
}

#[test]
fn particle_bridge_tracks_continuum() {
    let (s, dir) = run("particle_bridge_1d.json");
    assert!(quantity(&s, "particles.max_w2_to_continuum").as_f64().unwrap() <= 0.02);
    assert!(dir.path().join("analysis/particles.json").exists());
}

#[test]
fn runs_are_byte_for_byte_reproducible() {
    for name in ["particle_bridge_1d.json", "fixed_point.json"] {
        let (_, a) = run(name);
        let (_, b) = run(name);
        for file in ["trajectory.csv", "summary.json"] {
            let x = std::fs::read(a.path().join(file)).unwrap();
            let y = std::fs::read(b.path().join(file)).unwrap();
            assert_eq!(x, y, "{name}/{file}");
        }
        for entry in std::fs::read_dir(a.path().join("analysis")).unwrap() {
            let p = entry.unwrap().path();
            let other = b.path().join("analysis").join(p.file_name().unwrap());
            assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(other).unwrap(), "{}", p.display());
        }
    }
}
