//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A graph violates a structural invariant (negative weight, edge
    /// into the root, self-loop, dimension mismatch between tables).
    #[error("structural violation: {0}")]
    Structural(String),

    /// Enumeration was requested on a graph too large for brute force.
    #[error("graph too large for enumeration: n = {0}, maximum is 8")]
    Size(usize),

    /// A matrix operation received incompatible dimensions.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// The Laplacian is singular (Z = 0); normalized quantities are
    /// undefined.
    #[error("singular Laplacian: the partition function is zero")]
    Singular,

    /// Absolute continuity failed: p puts mass on an edge that q gives
    /// zero weight.
    #[error("support error: edge {0} -> {1} has p-mass but zero q-weight")]
    Support(usize, usize),

    /// An argument lies outside the mathematical domain of the quantity.
    #[error("domain error: {0}")]
    Domain(String),

    /// A computed value violates a sanity bound by more than round-off
    /// can explain.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
