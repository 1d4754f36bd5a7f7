use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no followers remain: every agent is a leader")]
    NoFollowers,

    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("unreachable followers: grounded Laplacian is singular")]
    UnreachableFollowers,

    #[error("combination rank {index} out of range [1, {total}]")]
    RankOutOfRange { index: u128, total: u128 },

    #[error("no connected graph after {attempts} attempts")]
    Disconnected { attempts: usize },

    #[error("explicit Euler step is unstable: t_s * lambda_max = {margin} >= 2")]
    Unstable { margin: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
