use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("alphabet size must be in 2..=256, got {0}")]
    InvalidAlphabet(usize),

    #[error("table of {entries} entries exceeds the dense cap of {cap}")]
    CapExceeded { entries: u128, cap: usize },

    #[error("table length {got} does not match expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("negative or non-finite entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },

    #[error("probabilities sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("node {node}: cpt row {row} sums to {sum}, row sum ≠ 1")]
    RowSum { node: usize, row: usize, sum: f64 },

    #[error("node {node}: negative cpt entry {value} in row {row}")]
    NegativeCpt { node: usize, row: usize, value: f64 },

    #[error("invalid node id {node} for {n} nodes")]
    InvalidNode { node: usize, n: usize },

    #[error("parent map contains a cycle through node {0}")]
    Cycle(usize),

    #[error("not a spanning tree: {0}")]
    NotATree(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("invalid variable selection: {0}")]
    InvalidVariables(String),

    #[error("sample set is empty")]
    EmptySamples,

    #[error("symbol {symbol} at row {row}, column {col} is outside the alphabet of size {k}")]
    SymbolOutOfRange { row: usize, col: usize, symbol: usize, k: usize },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
