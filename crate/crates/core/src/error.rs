//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("label column '{0}' not found in header")]
    MissingLabelColumn(String),

    #[error("csv file has no data rows")]
    EmptyTable,

    #[error("row {row}: cell '{value}' in column '{column}' is not usable: {reason}")]
    BadCell {
        row: usize,
        column: String,
        value: String,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("split of {n} rows leaves an empty part (fractions {fractions:?})")]
    SplitTooSmall { n: usize, fractions: (f64, f64, f64) },

    #[error("MAP fit did not converge in {iterations} iterations (gradient norm {grad_norm:.3e}, tol {tol:.3e})")]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        tol: f64,
    },

    #[error("Hessian is singular even after jitter up to {max_jitter:.1e}")]
    SingularHessian { max_jitter: f64 },

    #[error("matrix is near-singular (condition number {cond:.3e} > {limit:.1e}); consider a larger prior precision")]
    NearSingular { cond: f64, limit: f64 },

    #[error("joint over {configs} label configurations exceeds the cap of {cap}; use ParBaLS for batches this large")]
    JointTooLarge { configs: usize, cap: usize },

    #[error("pool exhausted: {needed} selections requested but only {available} points remain")]
    PoolExhausted { needed: usize, available: usize },

    #[error("universe {universe}: {source}")]
    Universe {
        universe: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("exact enumeration over {configs} pseudo-label assignments exceeds the oracle cap of {cap}")]
    EnumerationTooLarge { configs: usize, cap: usize },
}
