use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    /// A graph violates one of the data-model invariants.
    #[error("invalid graph {graph_id}: {reason}")]
    InvalidGraph { graph_id: String, reason: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("node {node} out of range for graph {graph_id} with {node_count} nodes")]
    NodeOutOfRange {
        graph_id: String,
        node: usize,
        node_count: usize,
    },

    #[error("layer {layer} out of range (model has {layers} layers)")]
    LayerOutOfRange { layer: usize, layers: usize },

    #[error("masking removed every node of graph {0}")]
    EmptyGraph(String),

    #[error("invalid mask for graph {graph_id}: {reason}")]
    InvalidMask { graph_id: String, reason: String },

    #[error("background model did not converge after {sweeps} sweeps (residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("class {0} has no graphs; class weights are undefined")]
    EmptyClass(u8),

    #[error("rule has no activating node in graph {0}")]
    NoActivation(String),

    #[error("{0} components requested but at most 64 are supported")]
    TooManyComponents(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty dataset")]
    EmptyDataset,
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
