//! Error type shared across the simulator and the cost model.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Infeasible or inconsistent configuration; the message names the
    /// violated constraint.
    Config(String),
    /// Dimension mismatch between operands.
    Shape(String),
    /// Zero diagonal entry found during substitution or inversion.
    /// `block` is set when the failure is inside a numbered diagonal block.
    Singular { index: usize, block: Option<usize> },
    /// A charge targeted a rank outside the simulated world.
    UnknownRank { rank: usize, world: usize },
    /// Critical-path query on a ledger with no ranks.
    EmptyLedger,
    /// Matrix file I/O or framing problem.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(msg) => write!(f, "infeasible configuration: {msg}"),
            Self::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            Self::Singular { index, block: Some(b) } => {
                write!(f, "singular matrix: zero diagonal at index {index} in diagonal block {b}")
            }
            Self::Singular { index, block: None } => {
                write!(f, "singular matrix: zero diagonal at index {index}")
            }
            Self::UnknownRank { rank, world } => {
                write!(f, "rank {rank} outside simulated world of {world} ranks")
            }
            Self::EmptyLedger => write!(f, "cost ledger has no ranks"),
            Self::Io(msg) => write!(f, "matrix file error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}
