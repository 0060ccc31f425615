//! Crate-wide error type.

use crate::methods::IterateTrace;

/// Errors surfaced by oracles, methods, flows, and probes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Requested catalog id does not exist.
    #[error("unknown objective '{id}'; valid ids: {valid}")]
    UnknownObjective { id: String, valid: String },

    /// Point dimension does not match the objective.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A point contained NaN or infinity.
    #[error("non-finite point entry")]
    NonFinitePoint,

    /// The objective does not carry the oracle this operation needs.
    #[error("objective '{id}' has no {oracle} oracle")]
    UnsupportedOracle { id: String, oracle: &'static str },

    /// A closed-form geometric oracle was queried outside the neighborhood
    /// in which it is certified.
    #[error("point at distance {distance} from the anchor exceeds the oracle's valid radius {radius}")]
    OutOfNeighborhood { distance: f64, radius: f64 },

    /// A method precondition (e.g. the ‖x₋₁ − x₀‖ ⩽ δα initialization
    /// bound, or a parameter range) was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterate overflowed (‖x‖ > 1e12) or became non-finite. Carries the
    /// finite prefix of the trace so probes can still use the evidence.
    #[error("iterates diverged at step {at}")]
    Divergence { at: usize, partial: Box<IterateTrace> },

    /// A fit or scan received too few usable samples.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// I/O failure while writing or reading artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed artifact (CSV/JSON) on re-parse.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// One-line machine-parseable JSON rendering, used on the CLI's stderr.
    pub fn to_json_line(&self) -> String {
        let kind = match self {
            Error::UnknownObjective { .. } => "unknown_objective",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinitePoint => "non_finite_point",
            Error::UnsupportedOracle { .. } => "unsupported_oracle",
            Error::OutOfNeighborhood { .. } => "out_of_neighborhood",
            Error::Precondition(_) => "precondition",
            Error::Divergence { .. } => "divergence",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
        };
        format!(
            "{{\"error\":{},\"message\":{}}}",
            serde_json::to_string(kind).unwrap(),
            serde_json::to_string(&self.to_string()).unwrap()
        )
    }
}
