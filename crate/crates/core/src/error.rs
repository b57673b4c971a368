use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected} samples, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid exponent {0}: must lie in [1, inf]")]
    InvalidExponent(f64),

    #[error("dyadic partition: {0}")]
    Partition(String),

    #[error("block index {j} outside the partition range [{min}, {max}]")]
    BlockOutOfRange { j: i32, min: i32, max: i32 },

    #[error("inputs too wide-band for exact products: mode {mode:?} exceeds {limit:?}")]
    NotBandLimited { mode: [i64; 3], limit: [i64; 3] },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unresolvable on this grid: {0}")]
    Unresolvable(String),

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("auxiliary fields at t = {aux} do not match state time t = {state}")]
    TimeMismatch { state: f64, aux: f64 },

    #[error("non-finite values at t = {t} (step {step})")]
    Blowup { t: f64, step: usize },

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{file}: line {line}: {msg}")]
    Parse {
        file: String,
        line: u64,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
