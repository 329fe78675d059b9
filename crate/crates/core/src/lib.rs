//! Distributed feedback control of continuum swarm densities.
//!
//! A density `ρ` on a box `Ω` evolves by the continuity equation
//! `∂ρ/∂t = -∇·(ρ v)` with zero flux through `∂Ω`, where the velocity
//! `v = K(ρ, μ)` is chosen pointwise from local jets of `ρ` and a target `μ`.

pub mod analysis;
pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod particles;
pub mod velocity;

pub use controllers::{apply, Controller};
pub use dynamics::{simulate, IntegratorConfig, Trajectory};
pub use error::{Result, SwarmError};
pub use grid::{build_grid, divergence, gradient, jet_at, laplacian, Boundary, GridSpec, Jet, ScalarField, VectorField};
pub use velocity::Velocity;
pub use analysis::{
    equivariance_residual, fit_decay, flow_map, heat_reference, jacobian_along_flow, linearize_pointwise, mixing_correlation,
    neumann_lambda1, transport_linear, weak_convergence_probe, DecayFit, FlowMap, MixingReport, Transform, Verdict,
};
pub use metrics::{w2_1d, w2_exact_small, w2_sinkhorn, MetricReport};
pub use particles::{empirical_vs_continuum, kde_density, sample_density, step_agents, AgentSet, KdeConfig};
