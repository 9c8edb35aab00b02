use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval [{start}, {end}]: need 0 <= start < end <= 1")]
    InvalidInterval { start: f64, end: f64 },

    #[error("invalid center/width ({center}, {width}): width must be positive")]
    InvalidWidth { center: f64, width: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("attention over an empty key set")]
    EmptyKeys,

    #[error("empty query")]
    EmptyQuery,

    #[error("empty mask")]
    EmptyMask,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("unknown token `{0}`")]
    UnknownToken(String),

    #[error("cannot pack {events} events of at least {min_len} clips into {t_v} clips")]
    InfeasiblePacking {
        events: usize,
        min_len: usize,
        t_v: usize,
    },

    #[error("sample has no positives")]
    NoPositives,

    #[error("empty evaluation set")]
    EmptyEvaluationSet,

    #[error("record `{id}` has {count} annotations, expected exactly one")]
    NotSingleLabel { id: String, count: usize },

    #[error("id mismatch: {0}")]
    IdMismatch(String),

    #[error("missing artifacts: {}", .0.join(", "))]
    MissingArtifacts(Vec<String>),

    #[error("training diverged at epoch {epoch}, sample `{sample}`: {what}")]
    Diverged {
        epoch: usize,
        sample: String,
        what: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("schema: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Short machine-readable tag, used in CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInterval { .. } => "invalid_interval",
            Error::InvalidWidth { .. } => "invalid_width",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::EmptyKeys => "empty_keys",
            Error::EmptyQuery => "empty_query",
            Error::EmptyMask => "empty_mask",
            Error::NonFinite(_) => "non_finite",
            Error::NonFiniteGradient(_) => "non_finite_gradient",
            Error::UnknownToken(_) => "unknown_token",
            Error::InfeasiblePacking { .. } => "infeasible_packing",
            Error::NoPositives => "no_positives",
            Error::EmptyEvaluationSet => "empty_evaluation_set",
            Error::NotSingleLabel { .. } => "not_single_label",
            Error::IdMismatch(_) => "id_mismatch",
            Error::MissingArtifacts(_) => "missing_artifacts",
            Error::Diverged { .. } => "diverged",
            Error::Config(_) => "config",
            Error::Checkpoint(_) => "checkpoint",
            Error::Schema(_) => "schema",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
        }
    }
}
