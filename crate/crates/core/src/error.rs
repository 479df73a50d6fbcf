use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The two directions are antipodal, so the axis of the minimal rotation is undefined.
    #[error("degenerate rotation: directions are antipodal, an explicit axis is required")]
    DegenerateRotation,

    /// Column `column` of the projected design matrix is (numerically) a combination of the previous ones.
    #[error("singular least-squares system: column {column} is linearly dependent")]
    SingularSystem { column: usize },

    #[error("array file: {0}")]
    ArrayFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
