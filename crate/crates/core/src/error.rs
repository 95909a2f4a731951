use thiserror::Error;

/// Problems found while turning a raw description into a [`crate::Memdp`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("probabilities of ({env}, {state}, {action}) sum to {sum}, expected 1")]
    DistributionNotNormalized {
        env: String,
        state: String,
        action: String,
        sum: String,
    },
    #[error("state {0} has no enabled action")]
    EmptyActionSet(String),
    #[error("unknown state {0}")]
    UnknownState(String),
    #[error("unknown action {0}")]
    UnknownAction(String),
    #[error("unknown environment {0}")]
    UnknownEnvironment(String),
    #[error("environment {env} has no distribution for enabled pair ({state}, {action})")]
    MissingTransition {
        env: String,
        state: String,
        action: String,
    },
    #[error("environment {env} defines a distribution for ({state}, {action}), which is not enabled")]
    UnexpectedTransition {
        env: String,
        state: String,
        action: String,
    },
    #[error("negative probability {value} on ({env}, {state}, {action})")]
    NegativeProbability {
        env: String,
        state: String,
        action: String,
        value: String,
    },
    #[error("invalid probability literal {0:?}")]
    BadProbability(String),
    #[error("name {0} is used twice")]
    DuplicateName(String),
    #[error("name {0} is reserved")]
    ReservedName(String),
    #[error("model has no environment")]
    NoEnvironment,
    #[error("model has at most 64 environments, got {0}")]
    TooManyEnvironments(usize),
    #[error("model is not in revealed form: ({0}) reveals knowledge without reaching a sink")]
    RevealedFormRequired(String),
}

/// Sub-model restriction failure.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RestrictError {
    #[error("state {0} has no action staying inside the requested set")]
    NotClosed(String),
}

/// Errors raised while synthesizing or evaluating strategies.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StrategyError {
    #[error("strategy needs more than {limit} memory states")]
    MemoryBudgetExceeded { limit: usize },
    #[error("state {0} is not limit-sure winning")]
    NotLimitSureWinning(String),
    #[error("state {0} is not almost-sure winning")]
    NotAlmostSureWinning(String),
    #[error("epsilon must lie strictly between 0 and 1")]
    BadEpsilon,
}

/// Errors of the quantitative module.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuantError {
    #[error("all environments agree on every transition probability")]
    NoDistinguishingTransition,
    #[error("linear system is singular (wrong zero set?)")]
    SingularSystem,
    #[error("p assignment is not a distribution at ({state}, {memory})")]
    NotOnSimplex { state: String, memory: usize },
    #[error("{0}")]
    Strategy(#[from] StrategyError),
}
