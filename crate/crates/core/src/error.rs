use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulation stack.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical failure, e.g. an ill-conditioned solve.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Caller broke a precondition (dimension mismatch, bad index, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unstable AR configuration: companion spectral radius {radius:.6} is not below 1")]
    Unstable { radius: f64 },

    /// A message arrived that the receiving state machine cannot accept.
    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("predictor desynchronized at n={time_index} on link {link}: BS {bs} vs UE {ue}")]
    Desync {
        time_index: u64,
        link: usize,
        bs: num_complex::Complex64,
        ue: num_complex::Complex64,
    },

    #[error("degenerate channel: estimated matrix is all zero")]
    DegenerateChannel,

    /// Every violated field of an experiment configuration, one per entry.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    InvalidConfig(Vec<String>),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
