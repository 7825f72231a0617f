use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("round {round} outside [1, {horizon}]")]
    RoundOutOfRange { round: usize, horizon: usize },

    #[error("breakpoints must be strictly increasing within (1, horizon]: {0:?}")]
    Breakpoints(Vec<usize>),

    #[error("need at least as many channels as clients (N = {channels}, M = {clients})")]
    TooFewChannels { channels: usize, clients: usize },

    #[error("{0} super-arms exceed the enumeration limit of 100000")]
    TooManyCombinations(u128),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("dirichlet partition failed after {0} attempts; use a larger dataset or alpha")]
    PartitionRetries(usize),

    #[error("empty dataset: {0}")]
    EmptyData(String),

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("failed to parse config: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("failed to serialize config: {0}")]
    ConfigSerialize(#[from] toml::ser::Error),

    #[error("malformed csv {path}: {reason}")]
    Csv { path: PathBuf, reason: String },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
