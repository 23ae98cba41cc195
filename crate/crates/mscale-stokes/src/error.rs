use crate::loss::ResidualBundle;

/// Crate-wide error type.
///
/// The variants mirror how callers are expected to react: `Config` means the
/// run description is inconsistent and must be fixed by the user, `Domain`
/// means a mathematical precondition was violated, `Usage` means an API was
/// driven in an unsupported way, and `NonFinite` is the trainer's divergence
/// abort carrying the state needed to diagnose it.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(
        "training diverged: non-finite loss at epoch {epoch}, step {step} \
         (total = {total}; terms: {terms})"
    )]
    NonFinite {
        epoch: u64,
        step: usize,
        total: f64,
        terms: Box<ResidualBundle>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn checkpoint(msg: impl Into<String>) -> Self {
        Error::Checkpoint(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
