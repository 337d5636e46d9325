use thiserror::Error;

/// Unified error type for the analysis library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("backend mismatch: expected {expected}, got {got}")]
    BackendMismatch { expected: &'static str, got: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("contraction ratio {0} outside (0, 1)")]
    InvalidRatio(f64),

    #[error("linear part deviates from orthogonality by {defect:e}, beyond repair threshold")]
    NonOrthogonal { defect: f64 },

    #[error("preimage leaves the sequence space pattern at index {index}")]
    PreimageOutsideSpace { index: u32 },

    #[error("fixed point is not representable with finite dyadic support")]
    FixedPointUnrepresentable,

    #[error("system needs at least two maps, got {0}")]
    TooFewMaps(usize),

    #[error("address symbol {symbol} outside 1..={n_maps}")]
    BadSymbol { symbol: u8, n_maps: u8 },

    #[error("enumeration of {required} cells exceeds budget {budget}")]
    BudgetExceeded { required: u64, budget: u64 },

    #[error("empty point set")]
    EmptyInput,

    #[error("operation requires the euclidean backend")]
    EuclideanOnly,

    #[error("similarity dimension {alpha} does not match ambient dimension {ambient}; not a tile")]
    NotATile { alpha: f64, ambient: usize },

    #[error("raster cell {cell} is below twice the maximal error radius {radius}")]
    RasterTooFine { cell: f64, radius: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("no solution found: {0}")]
    NoSolution(&'static str),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
