use thiserror::Error;

/// Errors surfaced by the segmentation, loss, and metric operations.
#[derive(Debug, Error)]
pub enum Error {
    /// An instance id covers pixels with more than one class id (or only
    /// background class), violating the label consistency invariant.
    #[error("instance {id} has inconsistent class ids")]
    InconsistentClass { id: u32 },

    /// A pixel has an instance id without a class id, or the reverse.
    #[error("instance/class maps disagree at ({row}, {col})")]
    InstClassMismatch { row: usize, col: usize },

    /// A class id outside 0..=6.
    #[error("class id {value} out of range 0..=6")]
    InvalidClass { value: i64 },

    /// Array operands of incompatible dimensions.
    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },

    /// Values outside their documented range (probabilities, distance maps,
    /// simplex sums).
    #[error("invalid data: {context}")]
    InvalidData { context: String },

    /// Ensemble averaging over an empty model list.
    #[error("cannot average an empty ensemble")]
    EmptyEnsemble,

    /// Every class has zero statistics; the class-averaged PQ is undefined.
    #[error("no classes present in either ground truth or predictions")]
    NoClassesPresent,

    /// The domain list does not contain exactly five distinct names.
    #[error("expected 5 distinct domains, found {found}")]
    WrongDomainCount { found: usize },

    #[error(transparent)]
    Npy(#[from] crate::npy::NpyError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(context: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
        }
    }

    pub(crate) fn data(context: impl Into<String>) -> Self {
        Error::InvalidData {
            context: context.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
