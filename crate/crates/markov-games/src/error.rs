use crate::system::StateId;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Stepping a chain that already sits at its absorbing target.
    #[error("target is absorbing: cannot step a chain at its target state")]
    TargetAbsorbing,

    /// A sampled walk did not reach the target within the step cap.
    #[error("step cap {cap} exceeded before reaching the target ({} states walked, cost {cost_so_far})", partial.len())]
    StepCapExceeded {
        cap: usize,
        partial: Vec<StateId>,
        cost_so_far: f64,
    },

    /// Asking for the index of a finished chain.
    #[error("chain finished: no index is defined for a chain at its target state")]
    ChainFinished,

    /// Order-statistic rank outside `1..=n`.
    #[error("order-statistic rank {k} out of range 1..={n}")]
    RankOutOfRange { k: usize, n: usize },

    /// No grade level reaches the 0.3 quantile (cannot occur when the rank
    /// is at most the number of prefix chains; reported defensively).
    #[error("threshold unreachable: the largest grade level stays below the 0.3 quantile")]
    ThresholdUnreachable,

    /// Joint state space exceeds the oracle cap.
    #[error("instance too large for oracle: {states} joint states exceeds cap {cap}")]
    OracleTooLarge { states: usize, cap: usize },

    /// More rewards requested than chains exist.
    #[error("infeasible: {k} rewards requested but only {chains} chains available")]
    Infeasible { k: usize, chains: usize },

    /// A first action that is not legal at the given start.
    #[error("illegal action: {0}")]
    IllegalAction(String),

    /// The oracle policy has no entry for a state reached during rollout.
    #[error("policy has no action for a reachable joint state (solver bug)")]
    PolicyGap,

    /// An instance file failed validation; the message lists the violations.
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("unknown scenario: {0}")]
    UnknownScenario(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// A Banks–Sundaram witness constraint does not hold.
    #[error("constraint violated: {0}")]
    ConstraintViolated(String),

    /// Numerical failure (singular linear system, stalled iteration). Cannot
    /// occur for valid systems; reported defensively.
    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
