use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid field data: {0}")]
    Field(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("config error (line {line}): {msg}")]
    Config { line: usize, msg: String },

    #[error("config error: {0}")]
    ConfigGeneral(String),

    #[error(
        "eigenvalue iteration did not converge within {max_iter} iterations \
         (last Rayleigh increment {last_delta:.3e})"
    )]
    EigenNonConvergence { max_iter: usize, last_delta: f64 },

    #[error(
        "Picard iteration did not converge within {max_iter} iterations \
         (last update norm {last_update:.3e})"
    )]
    PicardNonConvergence { max_iter: usize, last_update: f64 },

    #[error("time step rejected at t = {t}: min l = {min_l:.3e} fell below -{tol:.1e}")]
    StepRejected { t: f64, min_l: f64, tol: f64 },

    #[error("step size underflow at t = {t}: {halvings} halvings were not enough")]
    StepSizeUnderflow { t: f64, halvings: usize },

    #[error("non-finite value produced during {0}")]
    NonFinite(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A pipeline phase failed; names the phase so an aborted run says where.
    #[error("phase `{phase}` failed: {source}")]
    Phase { phase: &'static str, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: config problems map to 2, numerical
    /// failures to 3 (check failures, exit 1, are not errors and are decided
    /// by the caller from the run report).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Grid(_)
            | Error::Field(_)
            | Error::Param(_)
            | Error::Config { .. }
            | Error::ConfigGeneral(_)
            | Error::Io { .. } => 2,
            Error::EigenNonConvergence { .. }
            | Error::PicardNonConvergence { .. }
            | Error::StepRejected { .. }
            | Error::StepSizeUnderflow { .. }
            | Error::NonFinite(_)
            | Error::LinearSolve(_) => 3,
            Error::Phase { source, .. } => source.exit_code(),
        }
    }

    pub(crate) fn in_phase(self, phase: &'static str) -> Error {
        Error::Phase { phase, source: Box::new(self) }
    }
}
