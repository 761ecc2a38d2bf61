use thiserror::Error;

pub type Result<T> = std::result::Result<T, NnError>;

#[derive(Debug, Error)]
pub enum NnError {
    /// Tensor shapes do not line up. `layer` is the node index when known.
    #[error("shape error{}: {msg}", fmt_layer(.layer))]
    Shape { layer: Option<usize>, msg: String },

    #[error("invalid layer spec{}: {msg}", fmt_layer(.layer))]
    InvalidSpec { layer: Option<usize>, msg: String },

    #[error("non-finite values{}: {msg}", fmt_layer(.layer))]
    Numeric { layer: Option<usize>, msg: String },

    #[error("non-finite loss at epoch {epoch}{}", fmt_layer(.layer))]
    NonFiniteLoss { epoch: usize, layer: Option<usize> },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("archive error: {0}")]
    Archive(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn fmt_layer(layer: &Option<usize>) -> String {
    match layer {
        Some(i) => format!(" at layer {i}"),
        None => String::new(),
    }
}

impl NnError {
    pub(crate) fn shape(layer: impl Into<Option<usize>>, msg: impl Into<String>) -> Self {
        NnError::Shape { layer: layer.into(), msg: msg.into() }
    }

    pub(crate) fn spec(layer: impl Into<Option<usize>>, msg: impl Into<String>) -> Self {
        NnError::InvalidSpec { layer: layer.into(), msg: msg.into() }
    }

    /// Attach a layer index to errors raised without one.
    pub(crate) fn at_layer(self, idx: usize) -> Self {
        match self {
            NnError::Shape { layer: None, msg } => NnError::Shape { layer: Some(idx), msg },
            NnError::InvalidSpec { layer: None, msg } => NnError::InvalidSpec { layer: Some(idx), msg },
            NnError::Numeric { layer: None, msg } => NnError::Numeric { layer: Some(idx), msg },
            other => other,
        }
    }
}
