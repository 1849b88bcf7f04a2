//! Enumeration of molecular graphs from molecular formulas.
//!
//! Graphs are hydrogen-suppressed: vertices are heavy atoms and implied
//! hydrogens fill the unused valence. Enumeration works on DFS-numbered
//! tree representations, and [`canon::canonical_representation`] gives a
//! canonical form used for exact deduplication.

pub mod canon;
pub mod chem;
pub mod enumerate;
mod error;
pub mod oracle;
pub mod smiles;

pub use canon::{canonical_representation, PreTreeRepresentation, TreeRepresentation};
pub use chem::{
    degree_of_unsaturation, validate, Bond, Element, ElementTable, MolecularFormula,
    MolecularGraph, ValidityReport,
};
pub use enumerate::{
    enumerate, min_main_chain_len, Constraints, DedupMode, EnumerationStats, Enumerator,
    SearchBudget, StopReason,
};
pub use error::{Error, Result};
pub use smiles::{parse_smiles, write_smiles, SmilesError};
