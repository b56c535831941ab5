use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A closed-form expression was evaluated at (or too close to) a pole, or
    /// its radicand went negative.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    /// Norm or unitarity drift exceeded the requested tolerance.
    #[error("integration failure: drift {drift:.3e} exceeds tolerance {tol:.3e}")]
    IntegrationFailure { drift: f64, tol: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("rabi extraction failed: {0}")]
    ExtractionFailure(String),

    #[error("cannot fix global phase: {0}")]
    CannotFix(String),

    #[error(
        "calibration failed: no interior maximum in [{lo}, {hi}] \
         (fidelity {f_lo:.6} at lower end, {f_hi:.6} at upper end)"
    )]
    CalibrationFailure { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    /// Failure inside a parameter sweep; `index` is the sweep position.
    #[error("sweep point {index}: {source}")]
    Sweep {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// A configuration value violates a constraint.
    #[error("config: {0}")]
    Config(String),

    #[error("config syntax: {0}")]
    ConfigSyntax(String),

    #[error("unknown config key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
