use thiserror::Error;

/// Errors raised by the simulation core. Most of these signal bugs in the
/// driver wiring rather than recoverable conditions.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("event scheduled in the past: now={now}us, fire_at={fire_at}us")]
    ScheduleInPast { now: u64, fire_at: u64 },

    #[error("duplicate request id {0}")]
    DuplicateRequest(u64),

    #[error("completion for unknown request id {0} (conservation violation)")]
    UnknownCompletion(u64),

    #[error("runtime invariant breached: {0}")]
    InvariantBreach(String),

    #[error("configuration error: {0}")]
    Config(String),
}

/// Errors from the numeric estimation kernels.
#[derive(Debug, Error, PartialEq)]
pub enum EstimationError {
    #[error("need at least 2 samples for regression, got {0}")]
    TooFewSamples(usize),

    #[error("abscissa must be positive, got {0}")]
    NonPositiveAbscissa(f64),

    #[error("degenerate abscissae: all x equal, var(ln x) = 0")]
    DegenerateAbscissae,

    #[error("log-normal mode must be positive, got {0}")]
    NonPositiveMode(f64),
}

/// Errors from the metrics store.
#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no samples in window [{0}us, {1}us]")]
    NoData(u64, u64),
}
