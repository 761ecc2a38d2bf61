use fpgan_nn::NnError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    /// Missing, unexpected or malformed columns, bad schema or run config.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("config error: {0}")]
    Config(String),

    /// A cell that should be numeric is not. `row` is the 1-based line in the file.
    #[error("parse error at row {row}, column {column}: {msg}")]
    Parse { row: usize, column: String, msg: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Labels the model or mapping cannot represent.
    #[error("label error: {0}")]
    Label(String),

    #[error("no synthetic fingerprint was accepted at any threshold")]
    ZeroAccepted,

    /// Systems or artifacts that do not share a dataset split.
    #[error("provenance error: {0}")]
    Provenance(String),

    #[error(transparent)]
    Nn(#[from] NnError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CoreError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CoreError::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Process exit code for this error.
    ///
    /// 1 I/O, 2 schema/config, 3 numeric parse or domain, 4 non-finite
    /// training loss, 5 nothing accepted, 6 mixed or empty test split.
    pub fn exit_code(&self) -> i32 {
        match self {
            CoreError::Io { .. } => 1,
            CoreError::Schema(_) | CoreError::Config(_) | CoreError::EmptyDataset(_) | CoreError::Label(_) => 2,
            CoreError::InvalidState(_) | CoreError::Json(_) => 2,
            CoreError::Parse { .. } | CoreError::Domain(_) => 3,
            CoreError::Nn(NnError::NonFiniteLoss { .. }) => 4,
            CoreError::Nn(NnError::Io(_)) => 1,
            CoreError::Nn(NnError::InvalidSpec { .. } | NnError::Archive(_) | NnError::Json(_)) => 2,
            CoreError::Nn(_) => 3,
            CoreError::ZeroAccepted => 5,
            CoreError::Provenance(_) => 6,
            CoreError::Csv(e) => match e.kind() {
                csv::ErrorKind::Io(_) => 1,
                _ => 2,
            },
        }
    }
}
