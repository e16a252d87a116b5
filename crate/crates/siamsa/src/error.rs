use thiserror::Error;

/// Errors produced anywhere in the tracking and evaluation stack.
#[derive(Debug, Error)]
pub enum Error {
    /// Axis/shape disagreement between tensors, kernels, or grids.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A caller-supplied value is out of range or otherwise unusable.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A dataset directory or annotation file does not match the layout.
    #[error("dataset error: {0}")]
    Dataset(String),

    /// A config, weights, or report file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// A numeric or structural invariant was violated mid-computation.
    /// Distinct from `InvalidArgument`: this one indicates a bug.
    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    /// Process exit code for the CLI: 1 for bad input, 2 for internal bugs.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
