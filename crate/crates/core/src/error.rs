use thiserror::Error;

/// Errors produced by the statistics, transport and knockoff routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported dimension {requested}: at most {max} Halton bases are available")]
    UnsupportedDimension { requested: usize, max: usize },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("degenerate transport plan: row {0} has zero mass")]
    DegeneratePlan(usize),

    #[error("covariance is not positive definite (smallest eigenvalue {0:e})")]
    SingularCovariance(f64),

    #[error("non-finite value in stage `{stage}`")]
    NumericOverflow { stage: &'static str },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss is not finite")]
    TrainingDiverged { epoch: usize, batch: usize },

    #[error("{stage} failed in repetition {repetition}: {source}")]
    Stage {
        stage: &'static str,
        repetition: usize,
        source: Box<Error>,
    },

    #[error("i/o: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures caused by floating-point breakdown rather than bad input.
    pub fn is_numeric(&self) -> bool {
        if let Error::Stage { source, .. } = self {
            return source.is_numeric();
        }
        matches!(
            self,
            Error::NumericOverflow { .. }
                | Error::TrainingDiverged { .. }
                | Error::DegeneratePlan(_)
                | Error::SingularCovariance(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl Error {
    /// Wraps `self` with the pipeline stage and repetition it came from.
    pub fn in_stage(self, stage: &'static str, repetition: usize) -> Self {
        Error::Stage {
            stage,
            repetition,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
