use std::path::{Path, PathBuf};

use railalign::alignment::AlignmentError;
use railalign::evaluation::EvalError;
use railalign::pcd_io::PcdError;
use railalign::pipeline::PipelineError;
use thiserror::Error;

/// Process exit codes, one per error class.
pub mod exit {
    pub const OK: u8 = 0;
    pub const IO: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const NOT_FOUND: u8 = 3;
    pub const PARSE: u8 = 4;
    pub const EMPTY_CLASS: u8 = 5;
    pub const STALE: u8 = 6;
    pub const CONTINUITY: u8 = 7;
    pub const EVALUATION: u8 = 8;
    pub const PROCESSING: u8 = 9;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("input not found: {}", .0.display())]
    NotFound(PathBuf),
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("no points left after filtering to classes {0:?}")]
    EmptyClass(Vec<u8>),
    #[error("stale artifact: {0} (rerun the producing stage or pass --force)")]
    Stale(String),
    #[error(transparent)]
    Continuity(AlignmentError),
    #[error(transparent)]
    Evaluation(#[from] EvalError),
    #[error(transparent)]
    Processing(PipelineError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => exit::IO,
            CliError::Usage(_) => exit::USAGE,
            CliError::NotFound(_) => exit::NOT_FOUND,
            CliError::Parse { .. } => exit::PARSE,
            CliError::EmptyClass(_) => exit::EMPTY_CLASS,
            CliError::Stale(_) => exit::STALE,
            CliError::Continuity(_) => exit::CONTINUITY,
            CliError::Evaluation(_) => exit::EVALUATION,
            CliError::Processing(_) => exit::PROCESSING,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            CliError::NotFound(path.to_path_buf())
        } else {
            CliError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }

    pub fn parse(path: &Path, message: impl ToString) -> Self {
        CliError::Parse {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    pub fn pcd(path: &Path, e: PcdError) -> Self {
        CliError::parse(path, e)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::EmptyClass(c) => CliError::EmptyClass(c),
            PipelineError::Alignment(a) => CliError::Continuity(a),
            e => CliError::Processing(e),
        }
    }
}

impl From<AlignmentError> for CliError {
    fn from(e: AlignmentError) -> Self {
        CliError::Continuity(e)
    }
}
