use thiserror::Error;

/// Errors raised anywhere in the certification pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: String,
        got: String,
    },

    #[error("non-finite entry in {matrix} at ({row}, {col})")]
    NonFinite {
        matrix: String,
        row: usize,
        col: usize,
    },

    #[error("{matrix} is not Hermitian: worst entry ({row}, {col}) off by {residual:.3e}")]
    NotHermitian {
        matrix: String,
        row: usize,
        col: usize,
        residual: f64,
    },

    #[error(
        "{matrix} breaks the Sigma-conjugation block structure: worst entry ({row}, {col}) off by {residual:.3e}"
    )]
    NotStructured {
        matrix: String,
        row: usize,
        col: usize,
        residual: f64,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("frequency {omega} is too close to a pole (resolvent singular)")]
    PoleProximity { omega: f64 },

    #[error("no stabilizing Riccati solution at epsilon = {epsilon:.3e}: {reason}")]
    InfeasibleEpsilon { epsilon: f64, reason: String },

    #[error("matrix inequality infeasible: {0}")]
    Infeasible(String),

    #[error("inconsistent certificate: {0}")]
    InconsistentCertificate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("closed loop is mean-square unstable (spectral abscissa {abscissa:.3e})")]
    MeanSquareUnstable { abscissa: f64 },

    #[error("integration diverged at t = {t:.6}")]
    Divergent { t: f64 },

    #[error("cross-validation failed: {0}")]
    CrossValidation(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with stage labels stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
