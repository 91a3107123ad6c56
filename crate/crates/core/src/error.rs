use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { name: String, position: usize },

    #[error("function `{name}` expects {expected} argument(s), got {found} (position {position})")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        position: usize,
    },

    #[error("variable `{name}` requires dimension {required}, but n = {n}")]
    VariableOutOfRange {
        name: String,
        required: usize,
        n: usize,
    },

    #[error("division by zero at sample point x = {x:?}, y = {y:?}")]
    DivisionByZero { x: Vec<f64>, y: Vec<f64> },

    #[error("non-finite value at sample point x = {x:?}, y = {y:?}")]
    NonFinite { x: Vec<f64>, y: Vec<f64> },

    #[error("invalid projection: {0}")]
    InvalidProjection(String),

    #[error("tensor is not symmetric (entry ({row}, {col}))")]
    NonSymmetric { row: usize, col: usize },

    #[error("truncation order {order} exceeds the cap {cap}")]
    OrderTooLarge { order: usize, cap: usize },

    #[error("level k must be at least 1")]
    InvalidLevel,

    #[error("axis {axis} out of range 1..={n}")]
    AxisOutOfRange { axis: usize, n: usize },

    #[error("expected an operator on {expected}, found {found}")]
    WrongPolarization {
        expected: &'static str,
        found: &'static str,
    },

    #[error("dense dimension {dim} exceeds the cap {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error("power iteration did not converge after {iterations} iterations (last relative change {change:e})")]
    NonConvergence { iterations: usize, change: f64 },

    #[error("too few usable points for a slope fit ({usable} above the floor)")]
    TooFewPoints { usable: usize },

    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("experiment `{experiment}`: {source}")]
    Experiment {
        experiment: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn in_experiment(self, experiment: &str) -> Self {
        Error::Experiment {
            experiment: experiment.to_string(),
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
