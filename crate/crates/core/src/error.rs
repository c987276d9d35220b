use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch, expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("{op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },

    #[error("svd did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    SvdNoConvergence { sweeps: usize, residual: f64 },

    #[error("frame {index} in {dir} is {got:?}, expected {expected:?}")]
    MixedFrameSizes {
        dir: PathBuf,
        index: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("cannot read image {path}: {msg}")]
    UnreadableImage { path: PathBuf, msg: String },

    #[error("malformed sidecar {path} line {line}: {msg}")]
    MalformedSidecar {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("malformed {kind} {path} line {line}: {msg}")]
    MalformedConfig {
        kind: &'static str,
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("target leaves the {height}x{width} frame at frame {frame} (centre y={y:.2}, x={x:.2})")]
    TargetOutOfBounds {
        frame: usize,
        y: f64,
        x: f64,
        height: usize,
        width: usize,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidArgument {
            op,
            msg: msg.into(),
        }
    }

    pub(crate) fn shape(op: &'static str, expected: &[usize], got: &[usize]) -> Self {
        Error::ShapeMismatch {
            op,
            expected: expected.to_vec(),
            got: got.to_vec(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
