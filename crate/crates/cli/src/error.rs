use std::fmt;

use lif_meanfield::analysis::AnalysisError;
use lif_meanfield::grid::GridError;
use lif_meanfield::model::ModelError;
use lif_meanfield::pde::PdeError;
use lif_meanfield::pdmp::PdmpError;
use lif_meanfield::steady::SteadyError;

/// Failure classes with their process exit codes.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// Bad parameters or options (exit 2).
    Validation(String),
    /// A computation did not produce a trustworthy result (exit 3).
    Numeric(String),
    /// Output could not be written (exit 1).
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Io(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) => write!(f, "invalid input: {m}"),
            Failure::Numeric(m) => write!(f, "numerical failure: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<GridError> for Failure {
    fn from(e: GridError) -> Self {
        match e {
            GridError::GridMismatch { .. } => Failure::Numeric(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<PdmpError> for Failure {
    fn from(e: PdmpError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<PdeError> for Failure {
    fn from(e: PdeError) -> Self {
        match e {
            PdeError::InvalidConfig(_) | PdeError::CflViolation { .. } => Failure::Validation(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

impl From<SteadyError> for Failure {
    fn from(e: SteadyError) -> Self {
        match e {
            SteadyError::InvalidSigma(_) | SteadyError::ZeroCoupling => Failure::Validation(e.to_string()),
            SteadyError::Grid(g) => g.into(),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Pde(p) => p.into(),
            AnalysisError::Grid(g) => g.into(),
            AnalysisError::InvalidArgument(_) => Failure::Validation(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}
