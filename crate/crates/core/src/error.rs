use std::path::PathBuf;

use crate::state::RequestId;
use crate::topology::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("topology needs at least two nodes")]
    TooFewNodes,
    #[error("disconnected graph")]
    Disconnected,
    #[error("non-positive length on link {a}-{b}")]
    NonPositiveLength { a: String, b: String },
    #[error("duplicate link between {a} and {b}")]
    DuplicateLink { a: String, b: String },
    #[error("link endpoints must be distinct (node {0})")]
    SelfLoop(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("no path from {0} to {1}")]
    NoPath(NodeId, NodeId),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid reach table: {0}")]
    InvalidReachTable(String),
    #[error("infeasible group combination: {0}")]
    Infeasible(String),
    #[error("slot conflict: {0}")]
    Conflict(String),
    #[error("unknown request {0}")]
    UnknownRequest(RequestId),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("malformed assignment log: {0}")]
    MalformedLog(String),
    #[error("instance exceeds oracle bounds: {0}")]
    OracleBounds(String),
    #[error("cell {cell} failed: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
