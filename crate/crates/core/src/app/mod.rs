//! Command-line driver: configuration, test problems, error norms,
//! convergence studies and CSV output.

use std::path::PathBuf;

use thiserror::Error;

use crate::mesh::MeshError;
use crate::riemann::RiemannError;
use crate::stepper::StepperError;
use crate::thermo::ThermoError;

pub mod config;
pub mod norms;
pub mod output;
pub mod problems;
pub mod run;
pub mod study;

pub use config::RunConfig;
pub use norms::{error_norm, NormKind};
pub use problems::{Problem, ProblemKind};
pub use run::{simulate, InvariantCheck, Simulation};
pub use study::{convergence_study, ConvergenceTable};

#[derive(Debug, Error)]
pub enum AppError {
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("unknown norm `{0}`, expected 1, 2 or inf")]
    UnknownNorm(String),
    #[error("{problem} needs {expected} species, got {got}")]
    SpeciesCount { problem: ProblemKind, expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} has no exact solution")]
    NoExactSolution(ProblemKind),
    #[error("a convergence study needs at least two resolutions, got {0}")]
    TooFewLevels(usize),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Riemann(RiemannError),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Stepper(#[from] StepperError),
}

impl AppError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }
}
