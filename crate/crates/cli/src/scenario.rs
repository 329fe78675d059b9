//! Scenario files: strict JSON with every unknown key rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use swarmfield::analysis::Transform;
use swarmfield::controllers::from_key;
use swarmfield::velocity::{named_field, FIELD_NAMES};
use swarmfield::{Controller, GridSpec, IntegratorConfig, ScalarField};

use crate::error::{CliError, Result};
use crate::init::build_density;

pub const SEED_ENV: &str = "SWARMFIELD_SEED";

pub const METRIC_NAMES: [&str; 8] = ["l1", "l2", "linf", "tv", "w2", "hm1", "control_l2", "effort"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub grid: GridParams,
    pub rho0: InitSpec,
    pub mu: InitSpec,
    pub controller: String,
    pub integrator: IntegratorParams,
    #[serde(default)]
    pub metrics: Vec<String>,
    #[serde(default)]
    pub analyses: Vec<AnalysisSpec>,
    #[serde(default)]
    pub particles: Option<ParticleParams>,
    /// Relative to the working directory; `out/<name>` when absent.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub dim: usize,
    pub cells: Vec<usize>,
    /// Box side lengths, 1 per axis by default.
    #[serde(default)]
    pub extents: Option<Vec<f64>>,
}

/// A named density initializer. Which parameters apply depends on `kind`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

fn default_cfl() -> f64 {
    0.45
}

fn default_stride() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorParams {
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
    #[serde(default)]
    pub dt_override: Option<f64>,
    #[serde(default)]
    pub checkpoints: Vec<f64>,
    #[serde(default)]
    pub max_steps: Option<usize>,
}

/// Scalar test function for correlation analyses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Observable {
    /// `sin(2π (k_x x / L_x + k_y y / L_y))`.
    Sine { modes: [i32; 2] },
    /// `cos(2π (k_x x / L_x + k_y y / L_y))`.
    Cosine { modes: [i32; 2] },
}

fn default_samples() -> usize {
    21
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalysisSpec {
    /// Exponential fit to a recorded metric.
    FitDecay {
        #[serde(default)]
        label: Option<String>,
        metric: String,
        #[serde(default)]
        window: Option<[f64; 2]>,
    },
    /// Relative L² distance of `ρ_t - μ` from the spectral heat solution.
    HeatReference {
        #[serde(default)]
        label: Option<String>,
        times: Vec<f64>,
    },
    /// Linear transport of `e₀ = ρ₀ - μ` along a catalog field.
    TransportLinear {
        #[serde(default)]
        label: Option<String>,
        field: String,
        t_end: f64,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default)]
        step: Option<f64>,
    },
    /// Correlation decay along a catalog field with `μ` as invariant density.
    MixingCorrelation {
        #[serde(default)]
        label: Option<String>,
        field: String,
        f: Observable,
        #[serde(default)]
        g: Option<Observable>,
        t_end: f64,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default)]
        step: Option<f64>,
    },
    /// Controller residuals under grid symmetries at `(ρ₀, μ)`.
    Equivariance {
        #[serde(default)]
        label: Option<String>,
        transforms: Vec<Transform>,
    },
    /// Jacobian determinant along catalog flows by two routes.
    Jacobian {
        #[serde(default)]
        label: Option<String>,
        field: String,
        seeds: Vec<[f64; 2]>,
        t_end: f64,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default)]
        step: Option<f64>,
    },
}

impl AnalysisSpec {
    pub fn op(&self) -> &'static str {
        match self {
            AnalysisSpec::FitDecay { .. } => "fit_decay",
            AnalysisSpec::HeatReference { .. } => "heat_reference",
            AnalysisSpec::TransportLinear { .. } => "transport_linear",
            AnalysisSpec::MixingCorrelation { .. } => "mixing_correlation",
            AnalysisSpec::Equivariance { .. } => "equivariance",
            AnalysisSpec::Jacobian { .. } => "jacobian",
        }
    }

    /// Output file stem and summary prefix.
    pub fn label(&self) -> &str {
        let l = match self {
            AnalysisSpec::FitDecay { label, .. }
            | AnalysisSpec::HeatReference { label, .. }
            | AnalysisSpec::TransportLinear { label, .. }
            | AnalysisSpec::MixingCorrelation { label, .. }
            | AnalysisSpec::Equivariance { label, .. }
            | AnalysisSpec::Jacobian { label, .. } => label,
        };
        l.as_deref().unwrap_or_else(|| self.op())
    }

    fn field(&self) -> Option<&str> {
        match self {
            AnalysisSpec::TransportLinear { field, .. }
            | AnalysisSpec::MixingCorrelation { field, .. }
            | AnalysisSpec::Jacobian { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleParams {
    pub agents: usize,
    /// Kernel bandwidth in cells.
    #[serde(default)]
    pub bandwidth_cells: Option<f64>,
    pub times: Vec<f64>,
}

/// Bounds on a named summary quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertion {
    pub quantity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equals: Option<serde_json::Value>,
}

/// The numerical objects a scenario describes.
pub struct Prepared {
    pub grid: GridSpec,
    pub rho0: ScalarField,
    pub mu: ScalarField,
    pub controller: Controller,
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::schema(path, e.into_inner().to_string())
    })?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
    parse_scenario(&text)
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::schema(path, format!("{v} must be positive and finite")))
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(CliError::schema("name", "must be a nonempty [A-Za-z0-9_-] identifier"));
        }
        let it = &self.integrator;
        positive("integrator.t_end", it.t_end)?;
        if !(it.cfl > 0.0 && it.cfl < 1.0) {
            return Err(CliError::schema("integrator.cfl", format!("{} outside (0, 1)", it.cfl)));
        }
        if it.sample_stride == 0 {
            return Err(CliError::schema("integrator.sample_stride", "must be positive"));
        }
        if let Some(dt) = it.dt_override {
            positive("integrator.dt_override", dt)?;
        }
        if it.max_steps == Some(0) {
            return Err(CliError::schema("integrator.max_steps", "must be positive"));
        }
        for (k, c) in it.checkpoints.iter().enumerate() {
            self.check_time(&format!("integrator.checkpoints[{k}]"), *c)?;
        }
        for (k, m) in self.metrics.iter().enumerate() {
            if !METRIC_NAMES.contains(&m.as_str()) {
                return Err(CliError::InitializerUnknown { kind: "metric", key: m.clone(), path: format!("metrics[{k}]") });
            }
        }
        let prepared = self.prepare()?;
        for (k, a) in self.analyses.iter().enumerate() {
            self.check_analysis(&format!("analyses[{k}]"), a, &prepared.grid)?;
        }
        let mut labels: Vec<&str> = self.analyses.iter().map(AnalysisSpec::label).collect();
        labels.sort_unstable();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(CliError::schema("analyses", format!("duplicate label '{}'", w[0])));
        }
        if labels.contains(&"particles") || labels.contains(&"run") || labels.contains(&"metrics") {
            return Err(CliError::schema("analyses", "labels 'run', 'metrics' and 'particles' are reserved"));
        }
        if let Some(p) = &self.particles {
            if p.agents < 10 {
                return Err(CliError::schema("particles.agents", "need at least 10 agents"));
            }
            if let Some(bw) = p.bandwidth_cells {
                if !(bw >= 0.5 && bw.is_finite()) {
                    return Err(CliError::schema("particles.bandwidth_cells", "must be at least 0.5"));
                }
            }
            for (k, t) in p.times.iter().enumerate() {
                self.check_time(&format!("particles.times[{k}]"), *t)?;
            }
        }
        for (k, a) in self.assertions.iter().enumerate() {
            if a.min.is_none() && a.max.is_none() && a.equals.is_none() {
                return Err(CliError::schema(format!("assertions[{k}]"), "needs at least one of min, max, equals"));
            }
        }
        Ok(())
    }

    fn check_time(&self, path: &str, t: f64) -> Result<()> {
        if !(t > 0.0 && t <= self.integrator.t_end) {
            return Err(CliError::schema(path, format!("{t} outside (0, t_end]")));
        }
        Ok(())
    }

    fn check_analysis(&self, path: &str, a: &AnalysisSpec, grid: &GridSpec) -> Result<()> {
        if let Some(field) = a.field() {
            if field != "zero" && !FIELD_NAMES.contains(&field) {
                return Err(CliError::InitializerUnknown { kind: "vector field", key: field.into(), path: format!("{path}.field") });
            }
            named_field(field, grid).map_err(|e| CliError::schema(format!("{path}.field"), e.to_string()))?;
        }
        match a {
            AnalysisSpec::FitDecay { metric, window, .. } => {
                if !self.metrics.contains(metric) {
                    return Err(CliError::schema(format!("{path}.metric"), format!("'{metric}' is not among the recorded metrics")));
                }
                if let Some([lo, hi]) = window {
                    if !(lo < hi) {
                        return Err(CliError::schema(format!("{path}.window"), "needs lo < hi"));
                    }
                }
            }
            AnalysisSpec::HeatReference { times, .. } => {
                for (k, t) in times.iter().enumerate() {
                    self.check_time(&format!("{path}.times[{k}]"), *t)?;
                }
            }
            AnalysisSpec::TransportLinear { t_end, samples, step, .. }
            | AnalysisSpec::MixingCorrelation { t_end, samples, step, .. }
            | AnalysisSpec::Jacobian { t_end, samples, step, .. } => {
                positive(&format!("{path}.t_end"), *t_end)?;
                if *samples < 2 {
                    return Err(CliError::schema(format!("{path}.samples"), "need at least 2 samples"));
                }
                if let Some(s) = step {
                    positive(&format!("{path}.step"), *s)?;
                }
            }
            AnalysisSpec::Equivariance { transforms, .. } => {
                if transforms.is_empty() {
                    return Err(CliError::schema(format!("{path}.transforms"), "empty"));
                }
            }
        }
        Ok(())
    }

    /// Builds the grid, both densities and the controller.
    pub fn prepare(&self) -> Result<Prepared> {
        let g = &self.grid;
        let extents = g.extents.clone().unwrap_or_else(|| vec![1.0; g.dim]);
        let grid = GridSpec::new(g.dim, &extents, &g.cells).map_err(|e| CliError::schema("grid", e.to_string()))?;
        let rho0 = build_density(&self.rho0, &grid, "rho0")?;
        let mu = build_density(&self.mu, &grid, "mu")?;
        let controller = from_key(&self.controller, grid.dim()).map_err(|_| CliError::InitializerUnknown {
            kind: "controller",
            key: self.controller.clone(),
            path: "controller".into(),
        })?;
        Ok(Prepared { grid, rho0, mu, controller })
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        let it = &self.integrator;
        let mut checkpoints = it.checkpoints.clone();
        for a in &self.analyses {
            if let AnalysisSpec::HeatReference { times, .. } = a {
                checkpoints.extend(times);
            }
        }
        if let Some(p) = &self.particles {
            checkpoints.extend(&p.times);
        }
        checkpoints.sort_by(f64::total_cmp);
        checkpoints.dedup();
        let mut config = IntegratorConfig {
            cfl: it.cfl,
            t_end: it.t_end,
            sample_stride: it.sample_stride,
            dt_override: it.dt_override,
            checkpoints,
            ..IntegratorConfig::default()
        };
        if let Some(m) = it.max_steps {
            config.max_steps = m;
        }
        config
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| Path::new("out").join(&self.name))
    }

    /// Replaces the seed with `SWARMFIELD_SEED` when that is set.
    pub fn apply_seed_override(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v.trim().parse().map_err(|_| CliError::schema(SEED_ENV, format!("'{v}' is not an unsigned integer")))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "heat",
        "grid": {"dim": 1, "cells": [64]},
        "rho0": {"kind": "cosine_bump", "amplitude": 0.3},
        "mu": {"kind": "uniform"},
        "controller": "error_gradient",
        "integrator": {"t_end": 0.1}
    }"#;

    #[test]
    fn minimal_scenario_gets_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.integrator.cfl, 0.45);
        assert_eq!(s.integrator.sample_stride, 10);
        assert_eq!(s.seed, 0);
        assert!(s.metrics.is_empty() && s.analyses.is_empty() && s.particles.is_none());
        assert_eq!(s.output_dir(), Path::new("out/heat"));
    }

    #[test]
    fn misspelled_controller_names_the_key() {
        let text = MINIMAL.replace("\"error_gradient\"", "\"eror_gradient\"");
        match parse_scenario(&text) {
            Err(CliError::InitializerUnknown { key, kind, .. }) => {
                assert_eq!(key, "eror_gradient");
                assert_eq!(kind, "controller");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_t_end_is_a_schema_error() {
        let text = MINIMAL.replace("\"t_end\": 0.1", "\"t_end\": -1.0");
        match parse_scenario(&text) {
            Err(CliError::Schema { path, .. }) => assert_eq!(path, "integrator.t_end"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_its_path() {
        let text = MINIMAL.replace("\"t_end\": 0.1", "\"t_end\": 0.1, \"tend\": 2");
        match parse_scenario(&text) {
            Err(e @ CliError::Schema { .. }) => {
                assert!(e.to_string().contains("integrator"), "{e}");
                assert!(e.to_string().contains("tend"), "{e}");
                assert_eq!(e.exit_code(), 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_initializer() {
        let text = MINIMAL.replace("\"uniform\"", "\"flat\"");
        assert!(matches!(parse_scenario(&text), Err(CliError::InitializerUnknown { kind: "initializer", .. })));
    }

    #[test]
    fn fit_needs_recorded_metric() {
        let text = MINIMAL.replace(
            "\"integrator\": {\"t_end\": 0.1}",
            "\"integrator\": {\"t_end\": 0.1}, \"analyses\": [{\"op\": \"fit_decay\", \"metric\": \"l2\"}]",
        );
        match parse_scenario(&text) {
            Err(CliError::Schema { path, .. }) => assert_eq!(path, "analyses[0].metric"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn particle_times_join_checkpoints() {
        let text = MINIMAL.replace(
            "\"integrator\": {\"t_end\": 0.1}",
            "\"integrator\": {\"t_end\": 0.1, \"checkpoints\": [0.05]}, \"particles\": {\"agents\": 100, \"times\": [0.02, 0.05]}",
        );
        let s = parse_scenario(&text).unwrap();
        assert_eq!(s.integrator_config().checkpoints, vec![0.02, 0.05]);
    }
}
