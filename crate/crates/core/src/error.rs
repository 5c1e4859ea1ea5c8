use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient path: observation {first_uncovered} lies beyond the simulated trajectory")]
    InsufficientPath { first_uncovered: usize },

    #[error("track too short: {0}")]
    TrackTooShort(String),

    #[error("degenerate track: all observed steps have zero length")]
    DegenerateTrack,

    #[error("singular regression: collinear columns {columns:?}")]
    SingularRegression { columns: Vec<String> },

    #[error("training diverged at iteration {iteration}")]
    TrainingDiverged { iteration: usize },

    #[error("quadrature did not converge (achieved error estimate {achieved:e})")]
    QuadratureNoConvergence { achieved: f64 },

    #[error("insufficient rows: need {needed}, only {available} available")]
    InsufficientRows { needed: usize, available: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Validation-class errors are caused by bad inputs rather than by a
    /// failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Schema(_) | Error::InsufficientRows { .. }
        )
    }
}
