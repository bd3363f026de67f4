use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("exponent of degree {degree} exceeds the series order {order}")]
    DegreeOverflow { degree: u32, order: u32 },

    #[error("cannot parse: {0}")]
    BackendParse(String),

    #[error("operands live on different numeric backends")]
    BackendMismatch,

    #[error("expected {expected} variables, found {found}")]
    VarCountMismatch { expected: usize, found: usize },

    #[error("series has a non-positive constant term")]
    NonpositiveConstantTerm,

    #[error("fractional powers are not available on the exact backend")]
    ExactBackendFractionalPower,

    #[error("{0} is irrational and cannot be represented on the exact backend")]
    ExactBackendIrrational(&'static str),

    #[error("requested {k} boundary derivatives but the series order is {order}")]
    KTooLarge { k: u32, order: u32 },

    #[error("moment at index {index:?} is not positive")]
    NonpositiveMoment { index: Vec<u32> },

    #[error("alpha = {alpha} must exceed n + 1 = {}", n + 1)]
    AlphaTooSmall { alpha: String, n: u32 },

    #[error("alpha = {0} must be an integer in n-dimensional mode")]
    NonIntegerAlpha(String),

    #[error("alpha must be positive, got {0}")]
    InvalidAlpha(String),

    #[error("order {order} exceeds the moment table order {max_order}")]
    OrderExceedsTable { order: u32, max_order: u32 },

    #[error("weight not positive on grid (first failure at {point:?})")]
    NotPositiveOnGrid { point: Vec<String> },

    #[error("weight is not positive at {point:?}")]
    NonpositiveWeight { point: Vec<String> },

    #[error("balancing map lost positivity at {point:?}")]
    PositivityLost { point: Vec<String> },

    #[error("tail bound unusable at {point:?}")]
    UntrustedTail { point: Vec<String> },

    #[error("boundary profile is singular: {0}")]
    SingularProfile(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
