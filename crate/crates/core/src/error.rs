use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("hypergraph contains a cycle")]
    CyclicHypergraph,

    #[error("degenerate distribution: partition function is zero")]
    DegenerateDistribution,

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("infeasible mask: token {token} has no allowed parent")]
    InfeasibleMask { token: usize },

    #[error("tape mismatch: {0}")]
    TapeMismatch(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("gold tree is not projective")]
    NonProjectiveGold,

    #[error("gold arc {head} -> {dep} is outside the pruning mask")]
    GoldOutsideMask { head: usize, dep: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("heads form a cycle in sentence starting at line {line}")]
    Cycle { line: usize },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model file checksum mismatch or truncated payload")]
    Checksum,

    #[error("unsupported model file: {0}")]
    Version(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
