use thiserror::Error;

/// Errors surfaced by the bound evaluators, the quantizer and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A configuration or argument violates a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A runtime input is outside the operation's domain (e.g. NaN).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The reconstruction estimator divides by rho; rho = 0 has no estimate.
    #[error("estimator undefined: {0}")]
    EstimatorUndefined(String),

    /// The joint detector would enumerate more hypotheses than the configured
    /// cap allows. Nothing is approximated silently; the caller must shrink
    /// the configuration or raise the cap.
    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),
}
