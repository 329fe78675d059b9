//! Linearized dynamics, characteristic flows and stability diagnostics.

mod decay;
mod equivariance;
mod flow;
mod heat;
mod linearize;
mod mixing;
mod probe;
mod transport;

pub use decay::{fit_decay, DecayFit};
pub use equivariance::{equivariance_residual, RotationCenter, Transform};
pub use flow::{flow_map, jacobian_along_flow, FlowMap, JacobianReport, Reversed, DEFAULT_FLOW_STEP};
pub use heat::{heat_reference, neumann_lambda1, Lambda1};
pub use linearize::linearize_pointwise;
pub use mixing::{cat_map_correlation, classify, mixing_correlation, MixingReport, Verdict};
pub use probe::{cosine_dictionary, weak_convergence_probe, ProbeReport};
pub use transport::{transport_linear, TransportRun};
