use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("graph is not connected")]
    Disconnected,

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("edge ({0}, {1}) is not covered by any tree with positive weight")]
    UncoveredEdge(usize, usize),

    #[error("invalid spanning tree: {0}")]
    InvalidTree(String),

    #[error("invalid tree distribution: {0}")]
    InvalidDistribution(String),

    #[error("parameter is nonzero on edge ({0}, {1}), which is not in the tree")]
    OffTreeParameter(usize, usize),

    #[error("operation requires an explicit tree distribution")]
    RequiresExplicitTrees,

    #[error("node {0} is not a valid root")]
    InvalidRoot(usize),

    #[error("pseudomarginal is not in LOCAL(G): {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
