use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid coordinate: lat {lat}, lon {lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },

    #[error("degenerate normalization bounds [{min}, {max}]")]
    DegenerateBounds { min: f64, max: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("no records")]
    NoRecords,

    #[error("trajectory degenerate after cleaning ({remaining} records left)")]
    DegenerateTrajectory { remaining: usize },

    #[error("not enough records: need at least {needed}, have {have}")]
    TooFewRecords { needed: usize, have: usize },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("station file: {0}")]
    Stations(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite loss at {0}")]
    NonFiniteLoss(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid action: {0}")]
    Action(String),

    #[error("action space too large: {actions} joint actions exceed the exhaustive search limit; reduce vehicles or servers")]
    ActionSpaceTooLarge { actions: u128 },

    #[error("missing trained policy for algorithm `{0}`")]
    MissingPolicy(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short stable identifier used in the CLI's one-line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidCoordinate { .. } => "invalid_coordinate",
            Error::DegenerateBounds { .. } => "degenerate_bounds",
            Error::Parse { .. } => "parse",
            Error::NoRecords => "no_records",
            Error::DegenerateTrajectory { .. } => "degenerate_trajectory",
            Error::TooFewRecords { .. } => "too_few_records",
            Error::InvalidSplit(_) => "invalid_split",
            Error::Stations(_) => "stations",
            Error::Shape(_) => "shape",
            Error::NonFiniteLoss(_) => "non_finite_loss",
            Error::Config(_) => "config",
            Error::Action(_) => "action",
            Error::ActionSpaceTooLarge { .. } => "action_space_too_large",
            Error::MissingPolicy(_) => "missing_policy",
            Error::Checkpoint(_) => "checkpoint",
            Error::Invariant(_) => "invariant",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
