use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("no null space: {rows} rows for {cols} columns")]
    NoNullSpace { rows: usize, cols: usize },

    #[error("zero matrix")]
    ZeroMatrix,

    #[error("rank-deficient channel matrix (smallest/largest singular value {ratio:.3e})")]
    RankDeficient { ratio: f64 },

    #[error("degenerate projection: direction is parallel to the removed axis")]
    DegenerateProjection,

    #[error("null space exhausted: {boundary} boundary users with {antennas} antennas")]
    NullSpaceExhausted { boundary: usize, antennas: usize },

    #[error("no spare dimension for a dedicated beam ({users} users, {antennas} antennas)")]
    NoSpareDimension { users: usize, antennas: usize },

    #[error("target SINR ratio {0} outside (0, 1]")]
    InvalidMu(f64),

    #[error("no feasible beamformer found across {restarts} restarts")]
    Infeasible { restarts: usize },

    #[error("quadrature did not converge on [{lo}, {hi}] (last estimates {prev:.6e} vs {last:.6e})")]
    Quadrature { lo: f64, hi: f64, prev: f64, last: f64 },

    #[error("invalid configuration `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Whether the error stems from user-supplied configuration rather than
    /// a numeric failure.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::InvalidMu(_))
    }
}
