use thiserror::Error;

use crate::smiles::SmilesError;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("element table line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("unknown element symbol `{0}`")]
    UnknownElement(String),
    #[error("formula syntax error at offset {offset}: {message}")]
    FormulaSyntax { offset: usize, message: String },
    /// No valid molecular graph can exist for the formula. Distinct from
    /// input errors so callers can tell "no molecules" from "bad request".
    #[error("infeasible formula: {0}")]
    InfeasibleFormula(String),
    #[error("vertex {vertex} out of range for a graph with {count} vertices")]
    VertexOutOfRange { vertex: usize, count: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("canonicalization budget exceeded after {0} candidate orderings")]
    CanonBudgetExceeded(u64),
    #[error("oracle cap exceeded: {atoms} heavy atoms, cap is {cap}")]
    OracleCapExceeded { atoms: usize, cap: usize },
    #[error(transparent)]
    Smiles(#[from] SmilesError),
}

pub type Result<T> = std::result::Result<T, Error>;
