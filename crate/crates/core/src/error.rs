use crate::dag::NodeId;
use thiserror::Error;

/// Errors surfaced by planning, the store, and the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// A graph operation needed an acyclic graph; the named nodes form a cycle.
    #[error("workflow graph contains a cycle through {}", fmt_nodes(.0))]
    Cycle(Vec<NodeId>),

    /// Slicing or planning was asked to run on a graph with no output nodes.
    #[error("workflow has no output nodes")]
    NoOutputs,

    /// Two node declarations share an id.
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),

    /// A node id was referenced but is not part of the graph.
    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    /// A plan asked to load a node that has no stored artifact.
    #[error("plan loads {0}, which has no stored artifact (load time is unavailable)")]
    LoadUnavailable(NodeId),

    /// A project-selection result broke the prerequisite closure; this
    /// indicates a solver bug, not bad input.
    #[error("project selection for {0} is not closed: compute selected without its keep project")]
    SelectionNotClosed(NodeId),

    /// Brute-force enumeration was asked to run above its size bound.
    #[error("instance has {actual} {what}, above the exhaustive-search bound of {bound}")]
    TooLargeForExhaustive {
        what: &'static str,
        actual: usize,
        bound: usize,
    },

    /// A stored artifact is missing or does not match its index entry.
    #[error("artifact integrity failure for {signature}: {reason}")]
    Integrity { signature: String, reason: String },

    /// The workflow graph failed validation; the report lists every finding.
    #[error("invalid workflow: {0}")]
    InvalidWorkflow(String),

    /// Iteration-scenario weights must have a positive sum.
    #[error("scenario weights are all zero")]
    ZeroScenarioWeights,

    /// A child process run by the process executor failed.
    #[error("command for node {node} exited with {status}")]
    CommandFailed { node: NodeId, status: String },

    #[error("malformed workflow file: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_nodes(nodes: &[NodeId]) -> String {
    let names: Vec<&str> = nodes.iter().map(|n| n.as_str()).collect();
    names.join(", ")
}
