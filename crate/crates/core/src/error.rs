use thiserror::Error;

/// Errors raised by the analysis pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A 2x2 matrix is (numerically) singular.
    #[error("singular matrix: |det| = {det:e} below threshold {threshold:e}")]
    Singular { det: f64, threshold: f64 },

    /// Options or bounds are inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// The assembled frame has rigid-body modes.
    #[error("mechanism: global stiffness is singular ({0})")]
    Mechanism(String),

    /// A solve produced non-finite values or failed its residual check.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Frame model invariants are violated.
    #[error("invalid model: {0}")]
    Model(String),

    /// Joint geometry cannot be built from the configuration.
    #[error("construction error: {0}")]
    Construction(String),

    /// Ellipse fit could not be produced.
    #[error("fit error: {0}")]
    Fit(String),

    /// The best-fit conic is not an ellipse.
    #[error("ellipse condition violated: B^2 - 4AC = {discriminant:e}")]
    NotEllipse { discriminant: f64 },

    /// A study had no successful evaluation to reduce.
    #[error("empty study: {0}")]
    EmptyStudy(String),

    /// Malformed text input; `line` is 0 when no single line is at fault.
    #[error("parse error{}: {message}", at_line(*line))]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}

fn at_line(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" at line {line}")
    }
}

pub type Result<T> = std::result::Result<T, Error>;
