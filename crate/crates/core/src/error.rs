use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index:?} outside grid of size {size:?}")]
    OutOfBounds { index: [usize; 3], size: [usize; 3] },

    #[error("unknown property channel `{0}`")]
    UnknownProperty(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{0}")]
    Domain(String),

    #[error("no nodes satisfy the phase band; the sparse grid would be empty")]
    EmptyGrid,

    #[error("time step {dt:e} violates the diffusion stability bound {bound:e}")]
    Stability { dt: f64, bound: f64 },

    #[error("non-finite value at step {step}, node {index:?}")]
    NonFinite { step: usize, index: [usize; 3] },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}
