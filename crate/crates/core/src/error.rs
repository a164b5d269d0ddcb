use thiserror::Error;

/// Errors raised by the game, belief and solver modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid parameters for a distribution, game or model.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A Bayesian update received an observation with zero probability under the belief.
    #[error("inconsistent observation: posterior mass is zero")]
    InconsistentObservation,

    #[error("no pure equilibrium at stage {stage}, state {state}")]
    NoPureEquilibrium { stage: usize, state: usize },

    #[error("no Bayesian equilibrium found: {0}")]
    NoBayesianEquilibrium(String),

    /// The coupled Riccati stage system could not be solved.
    #[error("singular stage system at step {step} (determinant {determinant:e})")]
    Singular { step: usize, determinant: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
