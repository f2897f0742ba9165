use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An operator or layer received a tensor it cannot consume.
    #[error("shape mismatch in {context}: {message}")]
    Shape { context: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing parameter `{0}`")]
    MissingParameter(String),

    #[error("parameter `{name}` has shape {found:?}, expected {expected:?}")]
    ParameterShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("not a weight archive (bad magic {0:02x?})")]
    BadMagic([u8; 4]),

    #[error("unsupported weight archive version {0}")]
    UnsupportedVersion(u32),

    #[error("weight archive checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("weight archive truncated while reading {0}")]
    Truncated(&'static str),

    #[error("malformed weight archive: {0}")]
    Format(String),

    #[error("{path}, manifest line {line}: {message}")]
    Frame {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },
}

impl Error {
    pub(crate) fn shape(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Shape {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Re-labels a shape error with the name of the layer that raised it.
    pub(crate) fn in_layer(self, layer: &str) -> Self {
        match self {
            Error::Shape { context, message } => Error::Shape {
                context: format!("layer `{layer}` ({context})"),
                message,
            },
            other => other,
        }
    }

    /// True for errors caused by bad input data rather than a bug or setup problem.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::BadMagic(_)
                | Error::UnsupportedVersion(_)
                | Error::ChecksumMismatch { .. }
                | Error::Truncated(_)
                | Error::Format(_)
                | Error::Frame { .. }
                | Error::Parse { .. }
                | Error::Io { .. }
                | Error::MissingParameter(_)
                | Error::ParameterShape { .. }
        )
    }
}
