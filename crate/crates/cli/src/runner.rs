//! Executes a scenario and writes `trajectory.csv`, `analysis/<label>.json`
//! and `summary.json` into the output directory.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use swarmfield::analysis::{jacobian_along_flow, DEFAULT_FLOW_STEP};
use swarmfield::dynamics::SimulationError;
use swarmfield::grid::Vec2;
use swarmfield::metrics::{h_minus1_norm, lp_distance, total_variation, w2_1d, w2_exact_small, w2_sinkhorn, MAX_EXACT_CELLS};
use swarmfield::particles::simulate_agents;
use swarmfield::velocity::named_field;
use swarmfield::{
    empirical_vs_continuum, equivariance_residual, fit_decay, heat_reference, mixing_correlation, sample_density, simulate,
    transport_linear, GridSpec, IntegratorConfig, KdeConfig, ScalarField, SwarmError, Trajectory,
};

use crate::error::{CliError, Result};
use crate::scenario::{AnalysisSpec, Assertion, Observable, ParticleParams, Prepared, Scenario};

type Quantities = BTreeMap<String, Value>;

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub name: String,
    pub out_dir: PathBuf,
    pub passed: bool,
    /// One line per failed assertion.
    pub failures: Vec<String>,
}

impl RunReport {
    pub fn exit_code(&self) -> u8 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).expect("json values always serialize");
    text.push('\n');
    write_file(path, &text)
}

fn linspace(t_end: f64, samples: usize) -> Vec<f64> {
    (0..samples).map(|k| t_end * k as f64 / (samples - 1) as f64).collect()
}

impl Observable {
    fn eval(self, grid: &GridSpec) -> impl Fn(Vec2) -> f64 + '_ {
        let (modes, sine) = match self {
            Observable::Sine { modes } => (modes, true),
            Observable::Cosine { modes } => (modes, false),
        };
        move |p| {
            let mut arg = modes[0] as f64 * p[0] / grid.extent(0);
            if grid.dim() == 2 {
                arg += modes[1] as f64 * p[1] / grid.extent(1);
            }
            let arg = 2.0 * PI * arg;
            if sine {
                arg.sin()
            } else {
                arg.cos()
            }
        }
    }
}

fn w2(rho: &ScalarField, mu: &ScalarField) -> swarmfield::Result<f64> {
    let g = rho.grid();
    if g.dim() == 1 {
        w2_1d(rho, mu)
    } else if g.len() <= MAX_EXACT_CELLS {
        Ok(w2_exact_small(rho, mu)?.0)
    } else {
        Ok(w2_sinkhorn(rho, mu, g.min_h().powi(2), 5000)?.value)
    }
}

fn metric(name: &str, traj: &Trajectory, k: usize, mu: &ScalarField) -> swarmfield::Result<f64> {
    let rho = &traj.densities[k];
    match name {
        "l1" => lp_distance(rho, mu, 1.0),
        "l2" => lp_distance(rho, mu, 2.0),
        "linf" => lp_distance(rho, mu, f64::INFINITY),
        "tv" => total_variation(rho, mu),
        "w2" => w2(rho, mu),
        "hm1" => h_minus1_norm(&rho.sub(mu)?),
        "control_l2" => Ok(traj.controls[k].norm_l2()),
        "effort" => Ok(traj.effort[k]),
        other => Err(SwarmError::InvalidArgument(format!("unknown metric '{other}'"))),
    }
}

/// Metric columns per recorded sample.
fn metric_table(s: &Scenario, traj: &Trajectory, mu: &ScalarField) -> std::result::Result<Vec<Vec<f64>>, SwarmError> {
    s.metrics.iter().map(|m| (0..traj.len()).map(|k| metric(m, traj, k, mu)).collect()).collect()
}

fn trajectory_csv(s: &Scenario, traj: &Trajectory, table: &[Vec<f64>]) -> String {
    let mut out = String::from("t");
    for m in &s.metrics {
        out.push(',');
        out.push_str(m);
    }
    out.push_str(",min_rho,mass\n");
    for (k, t) in traj.times.iter().enumerate() {
        write!(out, "{t}").unwrap();
        for col in table {
            write!(out, ",{}", col[k]).unwrap();
        }
        let rho = &traj.densities[k];
        writeln!(out, ",{},{}", rho.min(), rho.mass()).unwrap();
    }
    out
}

fn run_quantities(traj: &Trajectory, q: &mut Quantities) {
    let m0 = traj.densities.first().map_or(0.0, ScalarField::mass);
    let drift = traj.densities.iter().map(|r| (r.mass() - m0).abs()).fold(0.0, f64::max);
    q.insert("run.steps".into(), json!(traj.steps));
    q.insert("run.samples".into(), json!(traj.len()));
    q.insert("run.min_rho".into(), json!(traj.min_rho));
    q.insert("run.max_mass_drift".into(), json!(drift));
    q.insert("run.positivity_warnings".into(), json!(traj.positivity_warnings));
}

fn metric_quantities(s: &Scenario, table: &[Vec<f64>], q: &mut Quantities) {
    for (name, col) in s.metrics.iter().zip(table) {
        let (Some(first), Some(last)) = (col.first(), col.last()) else { continue };
        q.insert(format!("metrics.{name}.initial"), json!(first));
        q.insert(format!("metrics.{name}.final"), json!(last));
        q.insert(format!("metrics.{name}.max"), json!(col.iter().copied().fold(f64::NEG_INFINITY, f64::max)));
        q.insert(format!("metrics.{name}.min"), json!(col.iter().copied().fold(f64::INFINITY, f64::min)));
    }
}

struct Context<'a> {
    scenario: &'a Scenario,
    prepared: &'a Prepared,
    traj: &'a Trajectory,
    table: &'a [Vec<f64>],
}

/// Detail document and summary entries of one analysis.
fn analysis(ctx: &Context, spec: &AnalysisSpec) -> swarmfield::Result<(Value, Vec<(&'static str, Value)>)> {
    let Prepared { grid, rho0, mu, controller } = ctx.prepared;
    let traj = ctx.traj;
    match spec {
        AnalysisSpec::FitDecay { metric, window, .. } => {
            let col = ctx.scenario.metrics.iter().position(|m| m == metric).expect("validated metric");
            let fit = fit_decay(&traj.times, &ctx.table[col], *window)?;
            let l_max = grid.extents().iter().copied().fold(0.0, f64::max);
            let lambda1 = (PI / l_max).powi(2);
            let ratio = fit.lambda_hat / lambda1;
            let detail = json!({ "metric": metric, "fit": fit, "lambda1": lambda1, "lambda_ratio": ratio });
            Ok((
                detail,
                vec![
                    ("lambda_hat", json!(fit.lambda_hat)),
                    ("lambda_ratio", json!(ratio)),
                    ("r_squared", json!(fit.r_squared)),
                ],
            ))
        }
        AnalysisSpec::HeatReference { times, .. } => {
            let e0 = rho0.sub(mu)?;
            let mut rel = Vec::with_capacity(times.len());
            for t in times {
                let k = traj.sample_at(*t).ok_or_else(|| SwarmError::InvalidArgument(format!("no sample at t = {t}")))?;
                let reference = heat_reference(&e0, *t, None)?;
                let e = traj.densities[k].sub(mu)?;
                rel.push(e.sub(&reference)?.norm_l2() / reference.norm_l2().max(1e-300));
            }
            let worst = rel.iter().copied().fold(0.0, f64::max);
            Ok((json!({ "times": times, "relative_l2": rel }), vec![("max_relative_l2", json!(worst))]))
        }
        AnalysisSpec::TransportLinear { field, t_end, samples, step, .. } => {
            let b = named_field(field, grid)?;
            let run = transport_linear(&rho0.sub(mu)?, b.as_ref(), &linspace(*t_end, *samples), step.unwrap_or(DEFAULT_FLOW_STEP))?;
            let l2 = run.l2_norms();
            let min_ratio = if l2[0] > 0.0 { l2.iter().copied().fold(f64::INFINITY, f64::min) / l2[0] } else { 1.0 };
            let detail = json!({
                "field": field,
                "times": run.times,
                "l1_norms": run.l1_norms(),
                "l2_norms": l2,
                "mean_defects": run.mean_defects,
            });
            Ok((detail, vec![("l1_drift", json!(run.l1_drift())), ("min_l2_ratio", json!(min_ratio))]))
        }
        AnalysisSpec::MixingCorrelation { field, f, g, t_end, samples, step, .. } => {
            let b = named_field(field, grid)?;
            let g = g.unwrap_or(*f);
            let (fe, ge) = (f.eval(grid), g.eval(grid));
            let rep = mixing_correlation(b.as_ref(), mu, &fe, &ge, &linspace(*t_end, *samples), step.unwrap_or(DEFAULT_FLOW_STEP))?;
            let gaps = rep.relative_gaps();
            let last = gaps.last().copied().unwrap_or(0.0);
            let detail = json!({ "field": field, "report": rep, "relative_gaps": gaps });
            Ok((detail, vec![("verdict", json!(rep.verdict.as_str())), ("final_relative_gap", json!(last))]))
        }
        AnalysisSpec::Equivariance { transforms, .. } => {
            let res: Vec<f64> =
                transforms.iter().map(|t| equivariance_residual(controller, *t, rho0, mu)).collect::<swarmfield::Result<_>>()?;
            let worst = res.iter().copied().fold(0.0, f64::max);
            Ok((json!({ "controller": controller.name(), "transforms": transforms, "residuals": res }), vec![("max_residual", json!(worst))]))
        }
        AnalysisSpec::Jacobian { field, seeds, t_end, samples, step, .. } => {
            let b = named_field(field, grid)?;
            let rep = jacobian_along_flow(b.as_ref(), grid, seeds, &linspace(*t_end, *samples), step.unwrap_or(DEFAULT_FLOW_STEP))?;
            let worst = rep.max_relative_residual;
            Ok((json!({ "field": field, "report": rep }), vec![("max_relative_residual", json!(worst))]))
        }
    }
}

fn particles(ctx: &Context, p: &ParticleParams) -> swarmfield::Result<(Value, Vec<(&'static str, Value)>)> {
    let Prepared { grid, rho0, mu, controller } = ctx.prepared;
    let kde = match p.bandwidth_cells {
        Some(c) => KdeConfig::new(c * grid.min_h(), grid)?,
        None => KdeConfig::default_for(grid),
    };
    let agents = sample_density(rho0, p.agents, ctx.scenario.seed)?;
    let it = ctx.scenario.integrator_config();
    let t_end = p.times.iter().copied().fold(0.0, f64::max);
    let config = IntegratorConfig { t_end, checkpoints: p.times.clone(), ..it };
    let run = simulate_agents(&agents, controller, mu, &config, &kde)?;
    let mut to_mu = Vec::with_capacity(run.times.len());
    let mut to_continuum = Vec::with_capacity(run.times.len());
    for (t, a) in run.times.iter().zip(&run.snapshots) {
        to_mu.push(empirical_vs_continuum(a, mu, &kde)?);
        let c = match ctx.traj.sample_at(*t) {
            Some(k) => Some(empirical_vs_continuum(a, &ctx.traj.densities[k], &kde)?),
            None => None,
        };
        to_continuum.push(c);
    }
    let inversions = to_mu.windows(2).filter(|w| w[1] >= w[0]).count();
    let worst = to_continuum.iter().flatten().copied().fold(0.0, f64::max);
    let max_clamp = run.snapshots.iter().map(|a| a.max_clamp()).fold(0.0, f64::max);
    let detail = json!({
        "agents": p.agents,
        "seed": ctx.scenario.seed,
        "bandwidth": kde.bandwidth(),
        "steps": run.steps,
        "times": run.times,
        "w2_to_mu": to_mu,
        "w2_to_continuum": to_continuum,
    });
    Ok((
        detail,
        vec![
            ("inversions", json!(inversions)),
            ("final_w2_to_mu", json!(to_mu.last())),
            ("max_w2_to_continuum", json!(worst)),
            ("max_clamp", json!(max_clamp)),
        ],
    ))
}

fn check(a: &Assertion, q: &Quantities) -> (Value, Option<String>) {
    let v = q.get(&a.quantity);
    let mut why = Vec::new();
    match v {
        None => why.push("quantity not produced".to_string()),
        Some(v) => {
            if a.min.is_some() || a.max.is_some() {
                match v.as_f64() {
                    None => why.push(format!("{v} is not numeric")),
                    Some(x) => {
                        if let Some(lo) = a.min {
                            if !(x >= lo) {
                                why.push(format!("{x} < min {lo}"));
                            }
                        }
                        if let Some(hi) = a.max {
                            if !(x <= hi) {
                                why.push(format!("{x} > max {hi}"));
                            }
                        }
                    }
                }
            }
            if let Some(e) = &a.equals {
                if v != e {
                    why.push(format!("{v} != {e}"));
                }
            }
        }
    }
    let passed = why.is_empty();
    let mut entry = serde_json::to_value(a).expect("assertions serialize");
    entry["value"] = v.cloned().unwrap_or(Value::Null);
    entry["passed"] = json!(passed);
    let failure = (!passed).then(|| format!("{}: {}", a.quantity, why.join(", ")));
    (entry, failure)
}

fn summary(s: &Scenario, status: &str, error: Option<String>, q: &Quantities, assertions: Vec<Value>, passed: bool) -> Value {
    let mut v = json!({
        "scenario": s.name,
        "seed": s.seed,
        "status": status,
        "quantities": q,
        "assertions": assertions,
        "passed": passed,
    });
    if let Some(e) = error {
        v["error"] = json!(e);
    }
    v
}

/// Runs `s` with all outputs under `out_dir`. Assertion failures are reported
/// in the returned [`RunReport`]; model errors become [`CliError::Model`]
/// after whatever was computed so far has been written.
pub fn run_scenario(s: &Scenario, out_dir: &Path) -> Result<RunReport> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let prepared = s.prepare()?;
    let analysis_dir = out_dir.join("analysis");
    std::fs::create_dir_all(&analysis_dir).map_err(|source| CliError::Write { path: analysis_dir.clone(), source })?;
    let model = |stage: &str, source: SwarmError| CliError::Model { scenario: s.name.clone(), stage: stage.into(), source };
    let mut q = Quantities::new();
    let fail = |q: &Quantities, err: CliError| -> Result<RunReport> {
        write_json(&out_dir.join("summary.json"), &summary(s, "failed", Some(err.to_string()), q, Vec::new(), false))?;
        Err(err)
    };

    let config = s.integrator_config();
    let traj = match simulate(&prepared.rho0, &prepared.controller, &prepared.mu, &config) {
        Ok(t) => t,
        Err(SimulationError { cause, partial }) => {
            if let Ok(table) = metric_table(s, &partial, &prepared.mu) {
                write_file(&out_dir.join("trajectory.csv"), &trajectory_csv(s, &partial, &table))?;
            }
            run_quantities(&partial, &mut q);
            return fail(&q, model("simulate", cause));
        }
    };
    let table = match metric_table(s, &traj, &prepared.mu) {
        Ok(t) => t,
        Err(e) => return fail(&q, model("metrics", e)),
    };
    write_file(&out_dir.join("trajectory.csv"), &trajectory_csv(s, &traj, &table))?;
    run_quantities(&traj, &mut q);
    metric_quantities(s, &table, &mut q);

    let ctx = Context { scenario: s, prepared: &prepared, traj: &traj, table: &table };
    for spec in &s.analyses {
        let label = spec.label();
        match analysis(&ctx, spec) {
            Ok((detail, entries)) => {
                write_json(&analysis_dir.join(format!("{label}.json")), &json!({ "op": spec.op(), "label": label, "result": detail }))?;
                for (k, v) in entries {
                    q.insert(format!("{label}.{k}"), v);
                }
            }
            Err(e) => return fail(&q, model(label, e)),
        }
    }
    if let Some(p) = &s.particles {
        match particles(&ctx, p) {
            Ok((detail, entries)) => {
                write_json(&analysis_dir.join("particles.json"), &json!({ "op": "particles", "label": "particles", "result": detail }))?;
                for (k, v) in entries {
                    q.insert(format!("particles.{k}"), v);
                }
            }
            Err(e) => return fail(&q, model("particles", e)),
        }
    }

    let mut entries = Vec::with_capacity(s.assertions.len());
    let mut failures = Vec::new();
    for a in &s.assertions {
        let (entry, failure) = check(a, &q);
        entries.push(entry);
        failures.extend(failure);
    }
    let passed = failures.is_empty();
    write_json(&out_dir.join("summary.json"), &summary(s, "ok", None, &q, entries, passed))?;
    let log = format!("started_unix {started}\nelapsed_seconds {:.3}\n", clock.elapsed().as_secs_f64());
    write_file(&out_dir.join("run.log"), &log)?;
    Ok(RunReport { name: s.name.clone(), out_dir: out_dir.to_path_buf(), passed, failures })
}
