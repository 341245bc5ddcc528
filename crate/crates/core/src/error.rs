use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid minibatch scheme: n={n} with N={data_len} ({reason})")]
    InvalidScheme {
        n: usize,
        data_len: usize,
        reason: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("need at least {required} sampled indices, got {got}")]
    InsufficientSample { required: usize, got: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("chain diverged at step {step}")]
    Divergence { step: u64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fit needs at least {required} usable points, got {got}")]
    TooFewPoints { required: usize, got: usize },

    #[error("all {total} replicates diverged")]
    AllReplicatesDiverged { total: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
