//! Front end for the `bifurc` library: problem files in, JSON reports and CSV
//! tables out.

// NaN has to fail the guards, so they are written `!(x > y)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
mod commands;
pub mod examples;
pub mod problem;
pub mod report;

use std::path::PathBuf;

use thiserror::Error;

use bifurc::flow::FlowError;
use bifurc::scan::ScanError;
use bifurc::{ExprError, GeometryError};

pub use args::{Cli, Command, ExampleName, ScanKind};
pub use commands::run;

/// How a successful run ended. Findings are not failures; they get their
/// own exit code so scripts can tell them apart from a clean run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    Findings,
    /// `examples` found an expectation miss.
    Mismatch,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Clean => 0,
            Outcome::Findings => 2,
            Outcome::Mismatch => 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Problem { path: PathBuf, message: String },
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("{0}")]
    Usage(String),
    #[error("writing {path}: {message}")]
    Output { path: PathBuf, message: String },
}
