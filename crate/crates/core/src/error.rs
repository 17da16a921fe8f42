use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the simulator can report. Messages always name the input key
/// or constraint that caused them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown preset `{name}`{}", suggestion.as_ref().map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default())]
    UnknownPreset { name: String, suggestion: Option<String> },

    #[error("preset `{node}` has no price; supply price_usd to query its cost")]
    MissingPrice { node: String },

    #[error("node `{node}` has no 8-bit throughput; precision fp8 is unavailable")]
    UnsupportedPrecision { node: String },

    #[error("invalid value for `{key}`: {message}")]
    InvalidInput { key: String, message: String },

    #[error("infeasible configuration ({constraint}): {detail}")]
    Infeasible { constraint: String, detail: String },

    #[error("degenerate calibration: {0}")]
    DegenerateFit(String),

    #[error("training time is unbounded when every growth rate is zero")]
    UnboundedTime,

    #[error("no grid point reaches the target {target:.3e} FLOP; best achieved {best_achieved:.3e} FLOP")]
    TargetUnreachable { target: f64, best_achieved: f64 },

    #[error("line {line}: `{key}`: {message}")]
    Parse { line: usize, key: String, message: String },

    #[error("catalog: {0}")]
    Catalog(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidInput {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn infeasible(constraint: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Infeasible {
            constraint: constraint.into(),
            detail: detail.into(),
        }
    }

    /// True for errors caused by the requested configuration being impossible,
    /// as opposed to malformed input.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::Infeasible { .. } | Error::TargetUnreachable { .. } | Error::UnsupportedPrecision { .. }
        )
    }
}
