//! Validation corpora: known molecules the enumerator must rediscover.
//!
//! One entry per line, `name<TAB>formula<TAB>smiles`. Blank lines and lines
//! starting with `#` are ignored.

use std::fmt;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::{Duration, Instant};

use molenum::{
    parse_smiles, validate, ElementTable, Enumerator, Error, MolecularFormula, SearchBudget,
    StopReason,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub line: usize,
    pub name: String,
    pub formula: String,
    pub smiles: String,
}

/// A line that could not be used, with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skipped {
    pub line: usize,
    pub reason: String,
}

pub fn parse_corpus(text: &str) -> (Vec<CorpusEntry>, Vec<Skipped>) {
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
        match fields.as_slice() {
            [name, formula, smiles] if fields.iter().all(|f| !f.is_empty()) => {
                entries.push(CorpusEntry {
                    line,
                    name: name.to_string(),
                    formula: formula.to_string(),
                    smiles: smiles.to_string(),
                })
            }
            _ => skipped.push(Skipped {
                line,
                reason: format!("expected 3 tab-separated fields, found {}", fields.len()),
            }),
        }
    }
    (entries, skipped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Found,
    NotFound,
    /// The SMILES does not realise the stated formula, so no search ran.
    FormulaMismatch,
    Timeout,
}

impl Outcome {
    pub fn is_not_found(self) -> bool {
        matches!(self, Outcome::NotFound | Outcome::FormulaMismatch)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Found => "found",
            Outcome::NotFound => "not-found",
            Outcome::FormulaMismatch => "not-found (formula mismatch)",
            Outcome::Timeout => "timeout",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryReport {
    pub name: String,
    pub outcome: Outcome,
    pub elapsed: Duration,
    /// Search nodes visited.
    pub nodes: u64,
}

/// Searches the entry's formula for a graph isomorphic to its SMILES.
///
/// Entries whose formula or SMILES do not parse are returned as skipped.
pub fn check_entry(
    entry: &CorpusEntry,
    table: &ElementTable,
    timeout: Option<Duration>,
    cancel: Option<Arc<AtomicBool>>,
) -> Result<EntryReport, Skipped> {
    let skip = |e: Error| Skipped {
        line: entry.line,
        reason: e.to_string(),
    };
    let formula = MolecularFormula::parse(&entry.formula, table).map_err(skip)?;
    let required = parse_smiles(&entry.smiles, table).map_err(skip)?;
    let start = Instant::now();
    let report = |outcome, nodes| EntryReport {
        name: entry.name.clone(),
        outcome,
        elapsed: start.elapsed(),
        nodes,
    };
    let consistent = validate(&required, &formula, table).map_err(skip)?.is_valid();
    if !consistent {
        return Ok(report(Outcome::FormulaMismatch, 0));
    }
    let mut search = Enumerator::new(formula, table.clone())
        .budget(SearchBudget {
            wall_time_limit: timeout,
            ..SearchBudget::default()
        })
        .require(required);
    if let Some(flag) = cancel {
        search = search.cancel_flag(flag);
    }
    let stats = match search.run(|_| std::ops::ControlFlow::Continue(())) {
        Ok(s) => s,
        Err(Error::InfeasibleFormula(_)) => return Ok(report(Outcome::NotFound, 0)),
        Err(e) => return Err(skip(e)),
    };
    let outcome = match stats.stop {
        StopReason::Found => Outcome::Found,
        StopReason::TimeLimit | StopReason::Cancelled => Outcome::Timeout,
        _ => Outcome::NotFound,
    };
    Ok(report(outcome, stats.nodes))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub found: usize,
    pub not_found: usize,
    pub mismatched: usize,
    pub timeout: usize,
    pub skipped: usize,
}

impl Summary {
    pub fn add(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::Found => self.found += 1,
            Outcome::NotFound => self.not_found += 1,
            Outcome::FormulaMismatch => {
                self.not_found += 1;
                self.mismatched += 1;
            }
            Outcome::Timeout => self.timeout += 1,
        }
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "found {}, not-found {} ({} formula mismatch), timeout {}, skipped {}",
            self.found, self.not_found, self.mismatched, self.timeout, self.skipped
        )
    }
}
