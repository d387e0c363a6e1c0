use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SlagError {
    #[error("not invertible")]
    NotInvertible,
    #[error("det_D null, inverse undefined")]
    DetNull,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("degenerate plane: induced Gram matrix is singular")]
    DegeneratePlane,
    #[error("plane is not space-like (smallest Gram eigenvalue {0:e})")]
    NotSpacelike(f64),
    #[error("null directions present in the induced metric")]
    NullDirections,
    #[error("graph not expressible over null plane: I - A is singular")]
    NotOverNullPlane,
    #[error("oracle limited to n <= {0}")]
    OracleLimit(usize),
    #[error("expansion too large: n = {0} exceeds 4")]
    ExpansionTooLarge(usize),
    #[error("degenerate omega: omega^n vanishes")]
    DegenerateOmega,
    #[error("space-like condition violated (margin {0:e})")]
    SpacelikeViolation(f64),
    #[error("non-positive density at index {0}")]
    NonPositiveDensity(usize),
    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("signature changes across the grid: {0:?} vs {1:?}")]
    SignatureChange((usize, usize), (usize, usize)),
    #[error("metric degenerate at node {0}")]
    MetricDegenerate(usize),
    #[error("expression error: {0}")]
    Expr(String),
}

pub type Result<T> = std::result::Result<T, SlagError>;
