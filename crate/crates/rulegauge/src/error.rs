//! Crate-wide error type.
//!
//! Variants are grouped by the surface they belong to so the CLI can map
//! them onto its exit codes (config -> 1, data -> 2, training -> 3).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    // ---- network / autodiff ----
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("derivative order {order} exceeds the supported maximum of {max}")]
    OrderTooHigh { order: usize, max: usize },
    #[error("activation {activation} does not support input derivatives of order {order}")]
    UnsupportedDerivative { activation: String, order: usize },
    #[error("output index {index} out of range for {outputs} outputs")]
    OutputIndexOutOfRange { index: usize, outputs: usize },

    // ---- rules / coalitions ----
    #[error("rule index {index} out of range for {n_rules} rules")]
    RuleIndexOutOfRange { index: usize, n_rules: usize },
    #[error("relying-rule count {r} out of range for {n_rules} rules")]
    RelyingCountOutOfRange { r: usize, n_rules: usize },
    #[error("coalition enumeration limited to {max} rules, got {n}")]
    TooManyRules { n: usize, max: usize },
    #[error("empty collocation set for rule {rule}")]
    EmptyCollocation { rule: usize },
    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    // ---- importance ----
    #[error("incomplete importance table: missing coalition mask {mask:#b}")]
    MissingMask { mask: u64 },
    #[error("non-positive error value {value} for coalition mask {mask:#b}")]
    NonPositiveMse { mask: u64, value: f64 },

    // ---- data ----
    #[error("dataset error: {0}")]
    Data(String),
    #[error("csv parse error at line {line}: {message}")]
    CsvParse { line: usize, message: String },
    #[error("split volumes exceed region population: requested {requested}, available {available}")]
    SplitTooLarge { requested: usize, available: usize },
    #[error("problem {0} has no in-repo generator; supply a dataset file instead")]
    IngestOnly(String),
    #[error("grid too coarse for a stable solve: {0}")]
    GridTooCoarse(String),

    // ---- training ----
    #[error("training diverged at epoch {epoch}: {message}")]
    TrainingDiverged { epoch: usize, message: String },
    #[error("cache entry is corrupt: {0}")]
    CorruptCache(String),
    #[error("cache miss for {0} while training is disabled")]
    CacheMissReadOnly(String),

    // ---- config / misc ----
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint parse error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code for this error (config 1, data 2, training 3).
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            Config(_) | InvalidSpec(_) | TooManyRules { .. } | InvalidPerturbation(_) => 1,
            Data(_)
            | CsvParse { .. }
            | SplitTooLarge { .. }
            | IngestOnly(_)
            | GridTooCoarse(_)
            | Io(_) => 2,
            _ => 3,
        }
    }
}
