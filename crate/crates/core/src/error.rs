use nalgebra::DVector;
use thiserror::Error;

use crate::smallness::WellPosednessReport;
use crate::space::Trajectory;

pub type Result<T, E = VhiError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum VhiError {
    #[error("missing constant `{0}`")]
    MissingConstant(&'static str),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("well-posedness gate failed: {}", .0.failing().join(", "))]
    IllPosed(Box<WellPosednessReport>),

    #[error("no convergence after {iterations} iterations (last update {last_update:.3e})")]
    NoConvergence {
        iterations: usize,
        last_update: f64,
        iterates: Vec<DVector<f64>>,
    },

    #[error("projection oracle hit its iteration limit ({0})")]
    ProjectionLimit(usize),

    #[error("operator norm iteration failed: {0}")]
    OperatorNorm(String),

    #[error("oracle `{0}` returned a non-finite value")]
    NonFinite(&'static str),

    #[error("probe {0} lies outside the constraint set")]
    ProbeOutsideK(usize),

    #[error("time grid mismatch between history operators")]
    GridMismatch,

    #[error("brute force supports dimension <= 3, got {0}")]
    DimensionTooLarge(usize),

    #[error("constraint set must be a bounded box for lattice search")]
    Unbounded,

    #[error("degenerate step size: Lipschitz estimate is {0}")]
    DegenerateStep(f64),

    #[error("contraction diagnostics need at least 3 sweeps, got {0}")]
    TooFewSweeps(usize),

    #[error("static solve failed at step {step}: {source}")]
    StepFailed {
        step: usize,
        partial: Box<Trajectory>,
        #[source]
        source: Box<VhiError>,
    },

    #[error("fixed-point sweep cap {cap} exceeded (last distance {last_distance:.3e})")]
    SweepCap { cap: usize, last_distance: f64 },
}

impl VhiError {
    /// True for failures of an iterative method to reach its tolerance.
    pub fn is_nonconvergence(&self) -> bool {
        match self {
            VhiError::NoConvergence { .. }
            | VhiError::ProjectionLimit(_)
            | VhiError::SweepCap { .. } => true,
            VhiError::StepFailed { source, .. } => source.is_nonconvergence(),
            _ => false,
        }
    }
}
