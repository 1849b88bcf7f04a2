//! Elements, molecular formulas and hydrogen-suppressed molecular graphs.
//!
//! Hydrogen is never a vertex: a vertex's unused valence is the number of
//! hydrogens attached to it. A graph is valid for a formula when it is
//! connected, has exactly the formula's heavy atoms, never exceeds a valence,
//! and its free valences add up to the formula's hydrogen count.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest bond order the library represents.
pub const MAX_BOND_ORDER: u8 = 3;

pub const HYDROGEN: &str = "H";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Element {
    pub symbol: String,
    pub atomic_number: u32,
    pub valence: u8,
}

const BUILTIN_ELEMENTS: &[(&str, u32, u8)] = &[
    ("H", 1, 1),
    ("C", 6, 4),
    ("N", 7, 3),
    ("O", 8, 2),
    ("F", 9, 1),
    ("P", 15, 3),
    ("P5", 15, 5),
    ("S", 16, 2),
    ("S4", 16, 4),
    ("S6", 16, 6),
    ("Cl", 17, 1),
    ("Br", 35, 1),
    ("I", 53, 1),
];

/// The active set of elements.
///
/// Elements are kept sorted by the fixed element order used for every
/// comparison in the crate: ascending atomic number, ties broken by
/// ascending valence. The position of an element in that order is its
/// *rank*.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementTable {
    elements: Vec<Element>,
    by_symbol: HashMap<String, usize>,
}

impl Default for ElementTable {
    fn default() -> Self {
        Self::builtin()
    }
}

impl ElementTable {
    pub fn builtin() -> Self {
        Self::from_elements(
            BUILTIN_ELEMENTS
                .iter()
                .map(|&(symbol, atomic_number, valence)| Element {
                    symbol: symbol.to_string(),
                    atomic_number,
                    valence,
                })
                .collect(),
        )
    }

    /// Builtin defaults merged with the entries of an optional config text.
    ///
    /// The config holds one `symbol atomic_number valence` triple per line;
    /// `#` starts a comment. Entries override builtins with the same symbol.
    pub fn load(source: Option<&str>) -> Result<Self> {
        let mut merged: BTreeMap<String, Element> = BUILTIN_ELEMENTS
            .iter()
            .map(|&(s, n, v)| {
                (
                    s.to_string(),
                    Element {
                        symbol: s.to_string(),
                        atomic_number: n,
                        valence: v,
                    },
                )
            })
            .collect();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (idx, raw) in source.unwrap_or("").lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let config_err = |message: String| Error::Config {
                line: line_no,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(config_err(format!(
                    "expected `symbol atomic_number valence`, found {} field(s)",
                    fields.len()
                )));
            }
            let symbol = fields[0];
            if !is_valid_symbol(symbol) {
                return Err(config_err(format!("invalid element symbol `{symbol}`")));
            }
            let atomic_number: u32 = fields[1]
                .parse()
                .map_err(|_| config_err(format!("invalid atomic number `{}`", fields[1])))?;
            if atomic_number == 0 {
                return Err(config_err("atomic number must be positive".into()));
            }
            let valence: u8 = fields[2]
                .parse()
                .map_err(|_| config_err(format!("invalid valence `{}`", fields[2])))?;
            if valence == 0 {
                return Err(config_err(format!("valence of `{symbol}` must be at least 1")));
            }
            if symbol == HYDROGEN && valence != 1 {
                return Err(config_err("hydrogen must have valence 1".into()));
            }
            if let Some(prev) = seen.insert(symbol.to_string(), line_no) {
                return Err(config_err(format!(
                    "duplicate symbol `{symbol}` (first defined on line {prev})"
                )));
            }
            merged.insert(
                symbol.to_string(),
                Element {
                    symbol: symbol.to_string(),
                    atomic_number,
                    valence,
                },
            );
        }
        Ok(Self::from_elements(merged.into_values().collect()))
    }

    fn from_elements(mut elements: Vec<Element>) -> Self {
        elements.sort_by(|a, b| {
            (a.atomic_number, a.valence, &a.symbol).cmp(&(b.atomic_number, b.valence, &b.symbol))
        });
        let by_symbol = elements
            .iter()
            .enumerate()
            .map(|(i, e)| (e.symbol.clone(), i))
            .collect();
        Self {
            elements,
            by_symbol,
        }
    }

    pub fn get(&self, symbol: &str) -> Option<&Element> {
        self.by_symbol.get(symbol).map(|&i| &self.elements[i])
    }

    pub fn lookup(&self, symbol: &str) -> Result<&Element> {
        self.get(symbol)
            .ok_or_else(|| Error::UnknownElement(symbol.to_string()))
    }

    /// Position of `symbol` in the element order.
    pub fn rank(&self, symbol: &str) -> Result<usize> {
        self.by_symbol
            .get(symbol)
            .copied()
            .ok_or_else(|| Error::UnknownElement(symbol.to_string()))
    }

    pub fn by_rank(&self, rank: usize) -> &Element {
        &self.elements[rank]
    }

    pub fn valence(&self, symbol: &str) -> Result<u8> {
        self.lookup(symbol).map(|e| e.valence)
    }

    pub fn compare(&self, a: &str, b: &str) -> Result<Ordering> {
        Ok(self.rank(a)?.cmp(&self.rank(b)?))
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.by_symbol.contains_key(symbol)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Elements in rank order.
    pub fn iter(&self) -> impl Iterator<Item = &Element> {
        self.elements.iter()
    }
}

fn is_valid_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase()) && chars.all(|c| c.is_ascii_alphanumeric())
}

/// Element counts, hydrogen included.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MolecularFormula {
    counts: BTreeMap<String, u32>,
}

impl MolecularFormula {
    pub fn new<S: Into<String>>(
        counts: impl IntoIterator<Item = (S, u32)>,
        table: &ElementTable,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (symbol, count) in counts {
            let symbol = symbol.into();
            table.lookup(&symbol)?;
            if count > 0 {
                *map.entry(symbol).or_insert(0) += count;
            }
        }
        let formula = Self { counts: map };
        if formula.heavy_atom_count() == 0 {
            return Err(Error::InvalidInput(
                "formula must contain at least one non-hydrogen atom".into(),
            ));
        }
        Ok(formula)
    }

    /// Parses Hill-like notation such as `C6H12O` or `CH3CH2OH`.
    ///
    /// A symbol is an uppercase letter followed by lowercase letters. When
    /// the digits after it complete a pseudo symbol of the table (`S6`),
    /// the pseudo symbol wins; `[S]6` forces the plain reading.
    pub fn parse(text: &str, table: &ElementTable) -> Result<Self> {
        let bytes = text.as_bytes();
        let mut i = 0;
        let mut counts: Vec<(String, u32)> = Vec::new();
        let syntax = |offset: usize, message: String| Error::FormulaSyntax { offset, message };
        while i < bytes.len() {
            let c = bytes[i];
            if c.is_ascii_whitespace() {
                i += 1;
                continue;
            }
            let start = i;
            let symbol = if c == b'[' {
                let close = text[i..]
                    .find(']')
                    .map(|p| p + i)
                    .ok_or_else(|| syntax(start, "unclosed `[`".into()))?;
                let sym = &text[i + 1..close];
                if !table.contains(sym) {
                    return Err(syntax(start, format!("unknown element `{sym}`")));
                }
                i = close + 1;
                sym.to_string()
            } else if c.is_ascii_uppercase() {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_lowercase() {
                    i += 1;
                }
                let base = &text[start..i];
                let digits_end = scan_digits(bytes, i);
                let mut chosen = None;
                // longest digit prefix that forms a known pseudo symbol
                for end in (i + 1..=digits_end).rev() {
                    if table.contains(&text[start..end]) {
                        chosen = Some(end);
                        break;
                    }
                }
                match chosen {
                    Some(end) => {
                        i = end;
                        text[start..end].to_string()
                    }
                    None => {
                        if !table.contains(base) {
                            return Err(syntax(start, format!("unknown element `{base}`")));
                        }
                        base.to_string()
                    }
                }
            } else {
                return Err(syntax(
                    start,
                    format!("unexpected character `{}`", text[i..].chars().next().unwrap()),
                ));
            };
            let digits_end = scan_digits(bytes, i);
            let count = if digits_end > i {
                text[i..digits_end]
                    .parse::<u32>()
                    .map_err(|_| syntax(i, "count out of range".into()))?
            } else {
                1
            };
            i = digits_end;
            counts.push((symbol, count));
        }
        if counts.is_empty() {
            return Err(syntax(0, "empty formula".into()));
        }
        Self::new(counts, table)
    }

    pub fn count(&self, symbol: &str) -> u32 {
        self.counts.get(symbol).copied().unwrap_or(0)
    }

    pub fn hydrogens(&self) -> u32 {
        self.count(HYDROGEN)
    }

    /// Number of non-hydrogen atoms, i.e. vertices of any valid graph.
    pub fn heavy_atom_count(&self) -> usize {
        self.heavy_atoms().map(|(_, c)| c as usize).sum()
    }

    /// Non-hydrogen `(symbol, count)` pairs in symbol order.
    pub fn heavy_atoms(&self) -> impl Iterator<Item = (&str, u32)> {
        self.counts
            .iter()
            .filter(|(s, _)| s.as_str() != HYDROGEN)
            .map(|(s, &c)| (s.as_str(), c))
    }

    pub fn counts(&self) -> &BTreeMap<String, u32> {
        &self.counts
    }

    /// Heavy-atom symbols, one per atom, in ascending element order.
    pub fn sorted_atoms(&self, table: &ElementTable) -> Result<Vec<String>> {
        let mut atoms: Vec<(usize, &str)> = Vec::new();
        for (symbol, count) in self.heavy_atoms() {
            let rank = table.rank(symbol)?;
            atoms.extend(std::iter::repeat_n((rank, symbol), count as usize));
        }
        atoms.sort();
        Ok(atoms.into_iter().map(|(_, s)| s.to_string()).collect())
    }

    /// Largest valence among the heavy elements present.
    pub fn max_valence(&self, table: &ElementTable) -> Result<u8> {
        let mut best = 0;
        for (symbol, _) in self.heavy_atoms() {
            best = best.max(table.valence(symbol)?);
        }
        Ok(best)
    }
}

fn scan_digits(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    i
}

impl fmt::Display for MolecularFormula {
    /// Hill order: C, then H, then the rest alphabetically.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let has_carbon = self.count("C") > 0;
        let mut order: Vec<&String> = self.counts.keys().collect();
        order.sort_by_key(|s| match (has_carbon, s.as_str()) {
            (true, "C") => (0, s.as_str()),
            (true, "H") => (1, s.as_str()),
            _ => (2, s.as_str()),
        });
        for symbol in order {
            let count = self.counts[symbol];
            if symbol.ends_with(|c: char| c.is_ascii_digit()) && count > 1 {
                write!(f, "[{symbol}]{count}")?;
            } else if count == 1 {
                write!(f, "{symbol}")?;
            } else {
                write!(f, "{symbol}{count}")?;
            }
        }
        Ok(())
    }
}

/// An undirected bond between two distinct vertices, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: u8,
}

impl Bond {
    pub fn new(v: usize, w: usize, order: u8) -> Self {
        Self {
            a: v.min(w),
            b: v.max(w),
            order,
        }
    }

    pub fn other(&self, v: usize) -> usize {
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }

    pub fn touches(&self, v: usize) -> bool {
        self.a == v || self.b == v
    }
}

/// A hydrogen-suppressed molecular graph with 0-based vertices.
///
/// Bonds are kept sorted, so two graphs compare equal exactly when they are
/// the same labelled graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MolecularGraph {
    labels: Vec<String>,
    bonds: Vec<Bond>,
}

impl MolecularGraph {
    pub fn new<S: Into<String>>(
        labels: impl IntoIterator<Item = S>,
        bonds: impl IntoIterator<Item = (usize, usize, u8)>,
    ) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidInput("a molecular graph needs at least one vertex".into()));
        }
        let k = labels.len();
        let mut out: Vec<Bond> = Vec::new();
        for (v, w, order) in bonds {
            if v >= k || w >= k {
                return Err(Error::VertexOutOfRange {
                    vertex: v.max(w),
                    count: k,
                });
            }
            if v == w {
                return Err(Error::InvalidInput(format!("self-loop on vertex {v}")));
            }
            if !(1..=MAX_BOND_ORDER).contains(&order) {
                return Err(Error::InvalidInput(format!(
                    "bond order {order} between {v} and {w} outside 1..={MAX_BOND_ORDER}"
                )));
            }
            out.push(Bond::new(v, w, order));
        }
        out.sort();
        if out.windows(2).any(|p| (p[0].a, p[0].b) == (p[1].a, p[1].b)) {
            return Err(Error::InvalidInput("duplicate bond between the same vertex pair".into()));
        }
        Ok(Self { labels, bonds: out })
    }

    pub fn single(label: impl Into<String>) -> Self {
        Self {
            labels: vec![label.into()],
            bonds: Vec::new(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn bond_order(&self, v: usize, w: usize) -> Option<u8> {
        let key = (v.min(w), v.max(w));
        self.bonds
            .binary_search_by(|b| (b.a, b.b).cmp(&key))
            .ok()
            .map(|i| self.bonds[i].order)
    }

    /// Sum of bond orders incident to `v`.
    pub fn degree(&self, v: usize) -> Result<u32> {
        self.check_vertex(v)?;
        Ok(self
            .bonds
            .iter()
            .filter(|b| b.touches(v))
            .map(|b| b.order as u32)
            .sum())
    }

    pub fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.labels.len() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange {
                vertex: v,
                count: self.labels.len(),
            })
        }
    }

    /// Neighbour lists `(w, order)` in ascending `w`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, u8)>> {
        let mut adj = vec![Vec::new(); self.labels.len()];
        for b in &self.bonds {
            adj[b.a].push((b.b, b.order));
            adj[b.b].push((b.a, b.order));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let adj = self.adjacency();
        let mut seen = vec![false; adj.len()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for &(w, _) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    reached += 1;
                    queue.push_back(w);
                }
            }
        }
        reached == adj.len()
    }

    /// The graph with vertex `v` renamed to `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.labels.len());
        let mut labels = vec![String::new(); self.labels.len()];
        for (v, label) in self.labels.iter().enumerate() {
            labels[perm[v]] = label.clone();
        }
        let mut bonds: Vec<Bond> = self
            .bonds
            .iter()
            .map(|b| Bond::new(perm[b.a], perm[b.b], b.order))
            .collect();
        bonds.sort();
        Self { labels, bonds }
    }

    /// Counts of each label.
    pub fn label_counts(&self) -> BTreeMap<&str, u32> {
        let mut counts = BTreeMap::new();
        for l in &self.labels {
            *counts.entry(l.as_str()).or_insert(0) += 1;
        }
        counts
    }

    /// Free valence per vertex (implicit hydrogens); negative when overspent.
    pub fn free_valences(&self, table: &ElementTable) -> Result<Vec<i64>> {
        let mut free = Vec::with_capacity(self.labels.len());
        for (v, l) in self.labels.iter().enumerate() {
            free.push(table.valence(l)? as i64 - self.degree(v)? as i64);
        }
        Ok(free)
    }

    /// The formula this graph realises when every free valence is a hydrogen.
    pub fn implied_formula(&self, table: &ElementTable) -> Result<MolecularFormula> {
        let free: i64 = self.free_valences(table)?.iter().sum();
        if free < 0 {
            return Err(Error::InvalidInput("valences overspent".into()));
        }
        let mut counts: Vec<(String, u32)> = self
            .label_counts()
            .into_iter()
            .map(|(s, c)| (s.to_string(), c))
            .collect();
        counts.push((HYDROGEN.to_string(), free as u32));
        MolecularFormula::new(counts, table)
    }
}

/// Outcome of checking a graph against a formula.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidityReport {
    pub connected: bool,
    pub element_counts_ok: bool,
    pub valence_ok: bool,
    /// Vertices whose degree exceeds their valence.
    pub valence_violations: Vec<usize>,
    /// Sum of free valences; negative when overspent.
    pub hydrogen_count: i64,
    pub expected_hydrogens: u32,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.connected
            && self.element_counts_ok
            && self.valence_ok
            && self.hydrogen_count == self.expected_hydrogens as i64
    }
}

pub fn validate(
    graph: &MolecularGraph,
    formula: &MolecularFormula,
    table: &ElementTable,
) -> Result<ValidityReport> {
    let free = graph.free_valences(table)?;
    let valence_violations: Vec<usize> = free
        .iter()
        .enumerate()
        .filter(|(_, &f)| f < 0)
        .map(|(v, _)| v)
        .collect();
    let found = graph.label_counts();
    let element_counts_ok = found.keys().all(|s| *s != HYDROGEN)
        && found.len() == formula.heavy_atoms().count()
        && formula
            .heavy_atoms()
            .all(|(s, c)| found.get(s).copied() == Some(c));
    Ok(ValidityReport {
        connected: graph.is_connected(),
        element_counts_ok,
        valence_ok: valence_violations.is_empty(),
        valence_violations,
        hydrogen_count: free.iter().sum(),
        expected_hydrogens: formula.hydrogens(),
    })
}

/// Number of cycle edges plus extra bond-order units every valid graph for
/// `formula` must contain: `1 + ½ Σ f(e)(V(e) − 2)`.
pub fn degree_of_unsaturation(formula: &MolecularFormula, table: &ElementTable) -> Result<u32> {
    let mut twice: i64 = 2;
    for (symbol, &count) in formula.counts() {
        twice += count as i64 * (table.valence(symbol)? as i64 - 2);
    }
    if twice < 0 {
        return Err(Error::InfeasibleFormula(format!(
            "{formula}: too many hydrogens for the available valences"
        )));
    }
    if twice % 2 != 0 {
        return Err(Error::InfeasibleFormula(format!(
            "{formula}: odd number of free valences"
        )));
    }
    Ok((twice / 2) as u32)
}

/// Rejects formulas that admit no valid graph for structural reasons and
/// returns their degree of unsaturation otherwise.
pub fn check_feasible(formula: &MolecularFormula, table: &ElementTable) -> Result<u32> {
    let unsaturation = degree_of_unsaturation(formula, table)?;
    let n = formula.heavy_atom_count();
    if n == 1 && unsaturation > 0 {
        let (symbol, _) = formula.heavy_atoms().next().unwrap();
        return Err(Error::InfeasibleFormula(format!(
            "{formula}: a lone {symbol} needs exactly {} hydrogens",
            table.valence(symbol)?
        )));
    }
    if n == 2 {
        let atoms = formula.sorted_atoms(table)?;
        let max_order = table
            .valence(&atoms[0])?
            .min(table.valence(&atoms[1])?)
            .min(MAX_BOND_ORDER) as u32;
        if unsaturation + 1 > max_order {
            return Err(Error::InfeasibleFormula(format!(
                "{formula}: two atoms cannot share {} bonds",
                unsaturation + 1
            )));
        }
    }
    Ok(unsaturation)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ElementTable {
        ElementTable::builtin()
    }

    fn adenine() -> MolecularGraph {
        // vertex numbering of the adenine spanning tree, shifted to 0-based
        MolecularGraph::new(
            ["C", "N", "C", "N", "C", "N", "C", "N", "C", "N"],
            [
                (0, 1, 1),
                (1, 2, 2),
                (2, 3, 1),
                (3, 4, 2),
                (4, 5, 1),
                (0, 6, 2),
                (6, 7, 1),
                (7, 8, 2),
                (8, 9, 1),
                (4, 6, 1),
                (0, 9, 1),
            ],
        )
        .unwrap()
    }

    #[test]
    fn degree_examples() {
        assert_eq!(adenine().degree(2).unwrap(), 3);
        assert_eq!(MolecularGraph::single("C").degree(0).unwrap(), 0);
        let path = MolecularGraph::new(["C", "C", "C"], [(0, 1, 1), (1, 2, 1)]).unwrap();
        assert_eq!(path.degree(1).unwrap(), 2);
        assert!(matches!(
            path.degree(3),
            Err(Error::VertexOutOfRange { vertex: 3, count: 3 })
        ));
    }

    #[test]
    fn validate_examples() {
        let t = table();
        let f = MolecularFormula::parse("C5H5N5", &t).unwrap();
        let report = validate(&adenine(), &f, &t).unwrap();
        assert!(report.is_valid());
        assert_eq!(report.hydrogen_count, 5);

        let methane = MolecularFormula::parse("CH4", &t).unwrap();
        let report = validate(&MolecularGraph::single("C"), &methane, &t).unwrap();
        assert!(report.is_valid());
        assert_eq!(report.hydrogen_count, 4);

        let ethane = MolecularFormula::parse("C2H6", &t).unwrap();
        let split = MolecularGraph::new(["C", "C"], []).unwrap();
        let report = validate(&split, &ethane, &t).unwrap();
        assert!(!report.connected);
        assert!(!report.is_valid());
    }

    #[test]
    fn validate_flags_overspent_valence() {
        let t = table();
        let f = MolecularFormula::parse("O2", &t).unwrap();
        let g = MolecularGraph::new(["O", "O"], [(0, 1, 3)]).unwrap();
        let report = validate(&g, &f, &t).unwrap();
        assert!(!report.valence_ok);
        assert_eq!(report.valence_violations, vec![0, 1]);
        assert_eq!(report.hydrogen_count, -2);
    }

    #[test]
    fn validate_unknown_symbol() {
        let t = table();
        let f = MolecularFormula::parse("CH4", &t).unwrap();
        let g = MolecularGraph::single("Xx");
        assert_eq!(
            validate(&g, &f, &t).unwrap_err(),
            Error::UnknownElement("Xx".into())
        );
    }

    #[test]
    fn unsaturation_examples() {
        let t = table();
        let dou = |s: &str| degree_of_unsaturation(&MolecularFormula::parse(s, &t).unwrap(), &t);
        assert_eq!(dou("C5H5N5").unwrap(), 6);
        assert_eq!(dou("CH4").unwrap(), 0);
        assert_eq!(dou("C2H6O").unwrap(), 0);
        assert_eq!(dou("C6H12O").unwrap(), 1);
        assert_eq!(dou("C8H2").unwrap(), 8);
        assert!(matches!(dou("CH"), Err(Error::InfeasibleFormula(_))));
        assert!(matches!(dou("CH6"), Err(Error::InfeasibleFormula(_))));
    }

    #[test]
    fn feasibility_degenerate_cases() {
        let t = table();
        let check = |s: &str| check_feasible(&MolecularFormula::parse(s, &t).unwrap(), &t);
        assert_eq!(check("CH4").unwrap(), 0);
        assert!(matches!(check("CH2"), Err(Error::InfeasibleFormula(_))));
        assert_eq!(check("N2").unwrap(), 2);
        assert!(matches!(check("C2"), Err(Error::InfeasibleFormula(_))));
        assert_eq!(check("H2O").unwrap(), 0);
    }

    #[test]
    fn element_table_defaults_and_overrides() {
        let t = ElementTable::load(None).unwrap();
        let c = t.lookup("C").unwrap();
        assert_eq!((c.atomic_number, c.valence), (6, 4));
        let t = ElementTable::load(Some("# custom\nX 99 5\n")).unwrap();
        assert_eq!(t.valence("X").unwrap(), 5);
        assert_eq!(t.valence("N").unwrap(), 3);
        let t = ElementTable::load(Some("N 7 5")).unwrap();
        assert_eq!(t.valence("N").unwrap(), 5);
    }

    #[test]
    fn element_table_config_errors() {
        let err = ElementTable::load(Some("C 6 0")).unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }));
        let err = ElementTable::load(Some("X 99 2\n\nX 99 3")).unwrap_err();
        assert!(matches!(err, Error::Config { line: 3, .. }));
        let err = ElementTable::load(Some("X 99")).unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }));
        let err = ElementTable::load(Some("H 1 2")).unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }));
        let err = ElementTable::load(Some("x1 99 2")).unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }));
    }

    #[test]
    fn element_order() {
        let t = table();
        assert_eq!(t.compare("C", "N").unwrap(), Ordering::Less);
        assert_eq!(t.compare("S", "S6").unwrap(), Ordering::Less);
        assert_eq!(t.compare("S4", "S6").unwrap(), Ordering::Less);
        assert_eq!(t.compare("O", "O").unwrap(), Ordering::Equal);
        assert!(t.compare("O", "Zz").is_err());
    }

    #[test]
    fn formula_parsing() {
        let t = table();
        let f = MolecularFormula::parse("C6H12O", &t).unwrap();
        assert_eq!((f.count("C"), f.hydrogens(), f.count("O")), (6, 12, 1));
        assert_eq!(f.heavy_atom_count(), 7);
        assert_eq!(f.to_string(), "C6H12O");

        let f = MolecularFormula::parse("CH3CH2OH", &t).unwrap();
        assert_eq!(f.to_string(), "C2H6O");

        let f = MolecularFormula::parse("S6O4H2", &t).unwrap();
        assert_eq!((f.count("S6"), f.count("O"), f.hydrogens()), (1, 4, 2));
        let f = MolecularFormula::parse("[S]6", &t).unwrap();
        assert_eq!(f.count("S"), 6);
        let f = MolecularFormula::parse("[S6]2", &t).unwrap();
        assert_eq!(f.to_string(), "[S6]2");
        let f = MolecularFormula::parse("C2H5Cl", &t).unwrap();
        assert_eq!(f.count("Cl"), 1);

        assert!(matches!(
            MolecularFormula::parse("xyz", &t),
            Err(Error::FormulaSyntax { offset: 0, .. })
        ));
        assert!(matches!(
            MolecularFormula::parse("C6Q", &t),
            Err(Error::FormulaSyntax { offset: 2, .. })
        ));
        assert!(matches!(MolecularFormula::parse("H2", &t), Err(Error::InvalidInput(_))));
        assert!(MolecularFormula::parse("", &t).is_err());
    }

    #[test]
    fn graph_construction_invariants() {
        assert!(MolecularGraph::new(["C", "C"], [(0, 0, 1)]).is_err());
        assert!(MolecularGraph::new(["C", "C"], [(0, 2, 1)]).is_err());
        assert!(MolecularGraph::new(["C", "C"], [(0, 1, 4)]).is_err());
        assert!(MolecularGraph::new(["C", "C"], [(0, 1, 1), (1, 0, 2)]).is_err());
        let g = MolecularGraph::new(["C", "O"], [(1, 0, 2)]).unwrap();
        assert_eq!(g.bond_order(0, 1), Some(2));
        assert_eq!(g.bonds()[0], Bond { a: 0, b: 1, order: 2 });
    }

    #[test]
    fn handshake_holds_for_adenine() {
        let t = table();
        let g = adenine();
        let total: u32 = (0..g.vertex_count()).map(|v| g.degree(v).unwrap()).sum();
        assert_eq!(total % 2, 0);
        let valence: u32 = g.labels().iter().map(|l| t.valence(l).unwrap() as u32).sum();
        assert_eq!(valence - total, 5);
        assert_eq!(g.implied_formula(&t).unwrap().to_string(), "C5H5N5");
    }
}
