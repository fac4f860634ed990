use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the SLAM core.
#[derive(Debug, Error)]
pub enum TvgError {
    #[error("degenerate camera configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("degenerate point transfer: transfer line norm {0:e} below threshold")]
    DegenerateTransfer(f64),
    #[error("alignment degenerate: {0}")]
    AlignmentDegenerate(String),
    #[error("insufficient evidence: {got} samples, need at least {need}")]
    InsufficientEvidence { got: usize, need: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("bridge frame mismatch: first set ends at frame {first_b}, second starts at frame {second_a}")]
    BridgeFrameMismatch { first_b: u32, second_a: u32 },
    #[error("tracking failure at frame {frame}: {reason}")]
    TrackingFailure { frame: u32, reason: String },
    #[error("parse error in {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("png error: {0}")]
    Png(String),
}

pub type Result<T> = std::result::Result<T, TvgError>;

impl TvgError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TvgError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        TvgError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
