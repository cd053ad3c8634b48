use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{what} index {index} out of range (size {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("lumped mass of dof {dof} is nonphysical (row sum {row_sum:e})")]
    NonPhysicalMass { dof: usize, row_sum: f64 },

    #[error("massless dofs {dofs:?} form a mechanism (singular condensation block)")]
    SingularCondensation { dofs: Vec<usize> },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("diagonal stiffness of dof {dof} is not positive ({value:e})")]
    IndefiniteDiagonal { dof: usize, value: f64 },

    #[error("requested time step {requested:e} s exceeds the feasible {feasible:e} s")]
    InfeasibleTimeStep { requested: f64, feasible: f64 },

    #[error("position s = {s} m outside the rail line [{min}, {max}]")]
    OutOfRange { s: f64, min: f64, max: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solution diverged at step {step}")]
    Divergence { step: usize },

    #[error("support status iteration did not converge at step {step} after {iterations} iterations")]
    SupportIteration { step: usize, iterations: usize },

    #[error("transport failure: {0}")]
    Transport(String),

    #[error("config: {0}")]
    Config(String),

    #[error("traces do not share a common time window")]
    DisjointTraces,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
