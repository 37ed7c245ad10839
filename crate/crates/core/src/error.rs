use std::path::PathBuf;

use crate::graph::PatternKey;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("record {record}: {message}")]
    Validation { record: String, message: String },

    #[error("graph contains a directed cycle")]
    CyclicGraph,

    #[error("sampler stalled after {attempts} attempts without a connected {k}-subgraph")]
    Stall { attempts: u64, k: usize },

    #[error("numerical instability: {aborted} of {trials} trials produced non-finite values{}", pattern.map(|k| format!(" (pattern {k})")).unwrap_or_default())]
    NumericalInstability {
        aborted: usize,
        trials: usize,
        pattern: Option<PatternKey>,
    },

    #[error("no connected subgraphs available to seed the beam")]
    EmptyBeam,

    #[error("class {0} missing from estimator scores")]
    MissingClass(String),

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
