use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A time argument fell outside the domain on which a quantity is defined.
    #[error("domain error: t = {t} outside [{lo}, {hi}]")]
    Domain { t: f64, lo: f64, hi: f64 },

    #[error("argument error: {0}")]
    Argument(String),

    /// A standing assumption of the control problem does not hold,
    /// e.g. a non-positive control weight.
    #[error("assumption violated ({assumption}): {detail}")]
    Assumption {
        assumption: &'static str,
        detail: String,
    },

    /// The backward Riccati integration left every bounded region.
    #[error("finite escape time: Riccati solution diverged near t = {time}")]
    FiniteEscape { time: f64 },

    #[error("simulation diverged at t = {time}")]
    SimulationDivergence { time: f64 },

    #[error("parse error in {field}: {detail}")]
    Parse { field: String, detail: String },

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable category, used for single-line CLI diagnostics.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::Argument(_) => "argument",
            Error::Assumption { .. } => "validation",
            Error::FiniteEscape { .. } => "escape-time",
            Error::SimulationDivergence { .. } => "divergence",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
