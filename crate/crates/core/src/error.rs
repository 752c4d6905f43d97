use std::path::PathBuf;

/// Errors produced by the fusion pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shape, length or range violation in caller-supplied data.
    #[error("input error: {0}")]
    Input(String),

    /// The computation is undefined for the given values (e.g. zero spread).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Loss became non-finite during training.
    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    /// A corpus file failed validation. `line` is 1-based; 0 means the whole file.
    #[error("{}{}: {detail}", path.display(), if *line > 0 { format!(":{line}") } else { String::new() })]
    Load {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("eval error: {0}")]
    Eval(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
