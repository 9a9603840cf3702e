use crate::graph::NodeId;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("network generation failed: {0}")]
    Generation(String),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("node {node} is not active on day {day}")]
    InactiveNode { node: NodeId, day: usize },

    #[error("observations on day {day} have zero probability at node {node}")]
    InconsistentEvidence { node: NodeId, day: usize },

    #[error("enumeration at node {node} spans {size} nodes (cap {cap}); thin the graph first")]
    EnumerationCap { node: NodeId, size: usize, cap: usize },

    #[error("problem size {size} exceeds the exhaustive-search guard of {limit}")]
    SizeGuard { size: usize, limit: usize },

    #[error("invalid config: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("unknown scenario `{name}`; available: {available}")]
    UnknownScenario { name: String, available: String },

    #[error("truth oracle accepted {accepted} of {tried} trajectories (rate below 1e-4)")]
    LowAcceptance { accepted: usize, tried: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
