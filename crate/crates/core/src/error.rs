use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("column-set error: {0}")]
    ColumnSet(String),

    #[error("degenerate column `{0}`: zero variance in training rows")]
    DegenerateColumn(String),

    #[error("column `{0}` has no observed values")]
    MissingAllValues(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("non-finite value produced by layer {layer} ({kind})")]
    Numeric { layer: usize, kind: String },

    #[error("state error: {0}")]
    State(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Training { epoch: usize, loss: f64 },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn evaluation(msg: impl Into<String>) -> Self {
        Error::Evaluation(msg.into())
    }
}
