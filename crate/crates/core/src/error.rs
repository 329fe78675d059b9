use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SwarmError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite state value at cell {cell}")]
    NonFiniteState { cell: usize },

    #[error("density {value:e} below floor {floor:e} at cell {cell}")]
    DensityFloor { cell: usize, value: f64, floor: f64 },

    #[error("mass mismatch: {left} vs {right}")]
    MassMismatch { left: f64, right: f64 },

    #[error("transport solver stalled after {iterations} pivots")]
    SolverStall { iterations: usize },

    #[error("sinkhorn did not converge: marginal violation {violation:e} after {iterations} iterations")]
    NoConvergence { iterations: usize, violation: f64 },

    #[error("field is not zero-mean (mean {mean:e})")]
    NotZeroMean { mean: f64 },

    #[error("poisson solve diverged: residual {residual:e} after {iterations} iterations")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("inequality violated: lhs {lhs:e} > rhs {rhs:e}")]
    InequalityViolated { lhs: f64, rhs: f64 },

    #[error("setpoint is not a fixed point of the closed loop (residual {residual:e})")]
    NotAFixedPoint { residual: f64 },

    #[error("flow left the domain by {distance:e} (limit {limit:e})")]
    FlowEscape { distance: f64, limit: f64 },

    #[error("jacobian cross-check failed: quadrature {quadrature:e} vs variational {variational:e}")]
    CrossCheckFailure { quadrature: f64, variational: f64 },

    #[error("density is not invariant under the flow (residual {residual:e})")]
    NotInvariant { residual: f64 },

    #[error("decay-fit window contains fewer than two positive samples")]
    WindowEmpty,

    #[error("step limit of {steps} reached before t_end")]
    StepLimit { steps: usize },

    #[error("unsupported transform: {0}")]
    UnsupportedTransform(String),
}

impl SwarmError {
    /// Attaches a cell index to a [`SwarmError::DensityFloor`].
    pub fn at_cell(self, idx: usize) -> Self {
        match self {
            SwarmError::DensityFloor { value, floor, .. } => SwarmError::DensityFloor { cell: idx, value, floor },
            other => other,
        }
    }
}

pub type Result<T, E = SwarmError> = std::result::Result<T, E>;
