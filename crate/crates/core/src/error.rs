use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} bands, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("background covariance is not positive definite after regularization")]
    SingularBackground,
    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("degenerate signature: whitened norm {0:e} is below tolerance")]
    DegenerateSignature(f64),
    #[error("at least one positive bag is required")]
    NoPositiveBags,
    #[error("bag `{0}` has the wrong label for this operation")]
    WrongLabel(String),
    #[error("every positive-bag pixel is a degenerate signature")]
    DegenerateInitialization,
    #[error("insufficient pixels: need {needed}, have {available}")]
    InsufficientPixels { needed: usize, available: usize },
    #[error("ground truth contains no target pixels")]
    NoTargets,
    #[error("grid search needs exactly 2 bands, got {0}")]
    NotTwoDimensional(usize),
}

impl Error {
    /// True for failures of the numerics (as opposed to malformed input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::SingularBackground
                | Error::NotPositiveDefinite
                | Error::DegenerateSignature(_)
                | Error::DegenerateInitialization
        )
    }
}
