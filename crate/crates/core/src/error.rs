use crate::model::SemiclassicalState;

/// Errors raised by the simulation core.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure {
        t: f64,
        last: SemiclassicalState,
        reason: String,
    },

    #[error("steady-state solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        best: SemiclassicalState,
        residual: f64,
        iterations: usize,
    },

    #[error("eigenvalue solver failed to converge")]
    EigenSolver,

    #[error("steady state is not linearly stable (least eigenvalue real part {margin:e})")]
    UnstableState { margin: f64 },

    #[error("singular linear system at omega = {omega}")]
    Singular { omega: f64 },

    #[error("{what}: imaginary residue {residue:e} exceeds tolerance")]
    Consistency { what: &'static str, residue: f64 },

    #[error("statistics failure: {0}")]
    Statistics(String),

    #[error("jump probability {probability} per step at t = {t} is not below 0.1; reduce dt")]
    StepSize { probability: f64, t: f64 },

    #[error("state norm underflow at t = {t}")]
    NormUnderflow { t: f64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("time ranges of the compared series do not overlap")]
    DisjointTimeRanges,

    #[error("mode profile has zero norm")]
    ZeroNorm,
}

pub type Result<T> = std::result::Result<T, Error>;
