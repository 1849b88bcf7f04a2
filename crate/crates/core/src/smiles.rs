//! A SMILES subset: atoms, `-`/`=`/`#` bonds, branches and ring markers.
//!
//! Hydrogens are always implicit. Symbols outside the organic subset, and
//! pseudo-elements such as `S6`, are written in brackets.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::canon::TreeRepresentation;
use crate::chem::{ElementTable, MolecularGraph};
use crate::error::Result;

const ORGANIC: [&str; 10] = ["B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SmilesErrorKind {
    Empty,
    UnexpectedChar(char),
    UnknownSymbol(String),
    UnclosedBracket,
    UnmatchedParenthesis,
    UnclosedRing(u32),
    /// A ring marker closes onto the atom that opened it.
    RingSelfLoop(u32),
    /// Two atoms are joined twice.
    DuplicateBond,
    ConflictingRingBonds(u32),
    DanglingBond,
    Disconnected,
}

impl fmt::Display for SmilesErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => write!(f, "empty input"),
            Self::UnexpectedChar(c) => write!(f, "unexpected character `{c}`"),
            Self::UnknownSymbol(s) => write!(f, "unknown element symbol `{s}`"),
            Self::UnclosedBracket => write!(f, "unclosed `[`"),
            Self::UnmatchedParenthesis => write!(f, "unmatched parenthesis"),
            Self::UnclosedRing(d) => write!(f, "ring marker {d} is never closed"),
            Self::RingSelfLoop(d) => write!(f, "ring marker {d} closes on its own atom"),
            Self::DuplicateBond => write!(f, "ring closure duplicates an existing bond"),
            Self::ConflictingRingBonds(d) => {
                write!(f, "ring marker {d} has different bond symbols at its ends")
            }
            Self::DanglingBond => write!(f, "bond symbol without a following atom"),
            Self::Disconnected => write!(f, "disconnected structures are not supported"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("SMILES error at offset {offset}: {kind}")]
pub struct SmilesError {
    pub offset: usize,
    pub kind: SmilesErrorKind,
}

impl SmilesError {
    fn new(offset: usize, kind: SmilesErrorKind) -> Self {
        Self { offset, kind }
    }
}

fn push_symbol(out: &mut String, symbol: &str) {
    if ORGANIC.contains(&symbol) {
        out.push_str(symbol);
    } else {
        out.push('[');
        out.push_str(symbol);
        out.push(']');
    }
}

fn bond_symbol(order: u8) -> &'static str {
    match order {
        2 => "=",
        3 => "#",
        _ => "",
    }
}

fn push_marker(out: &mut String, digit: u32) {
    if digit < 10 {
        out.push(char::from_digit(digit, 10).unwrap());
    } else {
        out.push_str(&format!("%{digit:02}"));
    }
}

/// Writes a tree representation, visiting vertices in numbering order.
pub fn write_smiles(rep: &TreeRepresentation) -> String {
    let k = rep.vertex_count();
    let graph = rep.graph();
    let mut children = vec![Vec::new(); k];
    for v in 1..k {
        children[rep.parent(v).unwrap()].push(v);
    }
    // cycle edges by endpoint, in ascending partner order
    let mut rings: Vec<Vec<(usize, u8)>> = vec![Vec::new(); k];
    for c in rep.cycle_edges() {
        rings[c.a].push((c.b, c.order));
        rings[c.b].push((c.a, c.order));
    }
    for r in &mut rings {
        r.sort_unstable();
    }
    let mut out = String::new();
    let mut in_use: Vec<bool> = Vec::new();
    let mut open: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    // explicit stack of (vertex, child index); a vertex is emitted on push
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let mut emit = |v: usize, out: &mut String, open: &mut BTreeMap<(usize, usize), u32>| {
        out.push_str(bond_symbol(rep.in_bond(v)));
        push_symbol(out, graph.label(v));
        let mut freed = Vec::new();
        for &(w, _) in rings[v].iter().filter(|(w, _)| *w < v) {
            let d = open.remove(&(w, v)).unwrap();
            push_marker(out, d);
            freed.push(d);
        }
        for &(w, order) in rings[v].iter().filter(|(w, _)| *w > v) {
            let d = match in_use.iter().position(|&u| !u) {
                Some(i) => i,
                None => {
                    in_use.push(false);
                    in_use.len() - 1
                }
            };
            in_use[d] = true;
            let digit = d as u32 + 1;
            out.push_str(bond_symbol(order));
            push_marker(out, digit);
            open.insert((v, w), digit);
        }
        for d in freed {
            in_use[d as usize - 1] = false;
        }
    };
    if k == 0 {
        return out;
    }
    emit(0, &mut out, &mut open);
    stack.push((0, 0));
    while let Some(top) = stack.last_mut() {
        let (v, i) = *top;
        if i == children[v].len() {
            stack.pop();
            if let Some(&(p, j)) = stack.last() {
                if j < children[p].len() {
                    out.push(')');
                }
            }
            continue;
        }
        top.1 += 1;
        let c = children[v][i];
        if i + 1 < children[v].len() {
            out.push('(');
        }
        emit(c, &mut out, &mut open);
        stack.push((c, 0));
    }
    out
}

/// Writes any connected graph through a depth-first spanning tree from
/// vertex 0 (no canonicalization).
pub fn graph_to_smiles(graph: &MolecularGraph) -> Result<String> {
    if !graph.is_connected() {
        return Err(SmilesError::new(0, SmilesErrorKind::Disconnected).into());
    }
    let adj = graph.adjacency();
    let k = graph.vertex_count();
    let mut order = Vec::with_capacity(k);
    let mut parent = vec![None; k];
    let mut seen = vec![false; k];
    let mut stack = vec![(0usize, None::<usize>)];
    while let Some((v, p)) = stack.pop() {
        if seen[v] {
            continue;
        }
        seen[v] = true;
        parent[v] = p;
        order.push(v);
        for &(w, _) in adj[v].iter().rev() {
            if !seen[w] {
                stack.push((w, Some(v)));
            }
        }
    }
    let mut perm = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        perm[old] = new;
    }
    let tree: Vec<(usize, usize)> = (0..k)
        .filter_map(|v| parent[v].map(|p| (perm[p], perm[v])))
        .collect();
    let rep = TreeRepresentation::new(graph.permuted(&perm), &tree)?;
    Ok(write_smiles(&rep))
}

struct PendingRing {
    atom: usize,
    bond: Option<u8>,
    offset: usize,
}

/// Parses into a tree representation whose spanning tree follows the
/// chain and branch structure and whose cycle edges are the ring closures.
pub fn parse_smiles_rep(text: &str, table: &ElementTable) -> Result<TreeRepresentation> {
    let bytes = text.as_bytes();
    let mut labels: Vec<String> = Vec::new();
    let mut parents: Vec<Option<(usize, u8)>> = Vec::new();
    let mut cycles: Vec<(usize, usize, u8)> = Vec::new();
    let mut rings: BTreeMap<u32, PendingRing> = BTreeMap::new();
    let mut branch: Vec<(usize, usize)> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut bond: Option<(u8, usize)> = None;
    let err = |offset: usize, kind: SmilesErrorKind| -> crate::error::Error {
        SmilesError::new(offset, kind).into()
    };
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        match c {
            '-' | '=' | '#' => {
                if bond.is_some() || prev.is_none() {
                    return Err(err(i, SmilesErrorKind::UnexpectedChar(c)));
                }
                bond = Some((
                    match c {
                        '-' => 1,
                        '=' => 2,
                        _ => 3,
                    },
                    i,
                ));
                i += 1;
            }
            '(' => {
                let Some(p) = prev else {
                    return Err(err(i, SmilesErrorKind::UnexpectedChar(c)));
                };
                if bond.is_some() {
                    return Err(err(i, SmilesErrorKind::UnexpectedChar(c)));
                }
                branch.push((p, i));
                i += 1;
            }
            ')' => {
                if let Some((_, at)) = bond {
                    return Err(err(at, SmilesErrorKind::DanglingBond));
                }
                let Some((p, _)) = branch.pop() else {
                    return Err(err(i, SmilesErrorKind::UnmatchedParenthesis));
                };
                prev = Some(p);
                i += 1;
            }
            '0'..='9' | '%' => {
                let Some(atom) = prev else {
                    return Err(err(i, SmilesErrorKind::UnexpectedChar(c)));
                };
                let digit = if c == '%' {
                    let ds = text.get(i + 1..i + 3).filter(|s| s.bytes().all(|b| b.is_ascii_digit()));
                    let Some(ds) = ds else {
                        return Err(err(i, SmilesErrorKind::UnexpectedChar(c)));
                    };
                    i += 3;
                    ds.parse::<u32>().unwrap()
                } else {
                    i += 1;
                    c.to_digit(10).unwrap()
                };
                let here = bond.take().map(|(b, _)| b);
                match rings.remove(&digit) {
                    None => {
                        rings.insert(
                            digit,
                            PendingRing {
                                atom,
                                bond: here,
                                offset: start,
                            },
                        );
                    }
                    Some(open) => {
                        if open.atom == atom {
                            return Err(err(start, SmilesErrorKind::RingSelfLoop(digit)));
                        }
                        let order = match (open.bond, here) {
                            (Some(a), Some(b)) if a != b => {
                                return Err(err(start, SmilesErrorKind::ConflictingRingBonds(digit)))
                            }
                            (a, b) => a.or(b).unwrap_or(1),
                        };
                        let (a, b) = (open.atom.min(atom), open.atom.max(atom));
                        let joined = parents[b] == Some((a, parents[b].map_or(0, |p| p.1)))
                            || cycles.iter().any(|&(x, y, _)| (x, y) == (a, b));
                        if joined {
                            return Err(err(start, SmilesErrorKind::DuplicateBond));
                        }
                        cycles.push((a, b, order));
                    }
                }
            }
            '[' => {
                let Some(end) = text[i..].find(']') else {
                    return Err(err(i, SmilesErrorKind::UnclosedBracket));
                };
                let symbol = &text[i + 1..i + end];
                if !table.contains(symbol) {
                    return Err(err(i, SmilesErrorKind::UnknownSymbol(symbol.to_string())));
                }
                add_atom(symbol, &mut labels, &mut parents, &mut prev, &mut bond);
                i += end + 1;
            }
            _ => {
                let two = text.get(i..i + 2).filter(|s| *s == "Cl" || *s == "Br");
                let symbol = match two {
                    Some(s) => s,
                    None => match text.get(i..i + 1) {
                        Some(s) if ORGANIC.contains(&s) => s,
                        _ => {
                            let ch = text[i..].chars().next().unwrap();
                            return Err(if ch.is_ascii_alphabetic() {
                                err(i, SmilesErrorKind::UnknownSymbol(ch.to_string()))
                            } else if ch == '.' {
                                err(i, SmilesErrorKind::Disconnected)
                            } else {
                                err(i, SmilesErrorKind::UnexpectedChar(ch))
                            });
                        }
                    },
                };
                if !table.contains(symbol) {
                    return Err(err(i, SmilesErrorKind::UnknownSymbol(symbol.to_string())));
                }
                add_atom(symbol, &mut labels, &mut parents, &mut prev, &mut bond);
                i += symbol.len();
            }
        }
    }
    if let Some((_, offset)) = bond {
        return Err(err(offset, SmilesErrorKind::DanglingBond));
    }
    if let Some(&(_, offset)) = branch.last() {
        return Err(err(offset, SmilesErrorKind::UnmatchedParenthesis));
    }
    if let Some((&digit, open)) = rings.iter().next() {
        return Err(err(open.offset, SmilesErrorKind::UnclosedRing(digit)));
    }
    if labels.is_empty() {
        return Err(err(0, SmilesErrorKind::Empty));
    }
    TreeRepresentation::from_parts(labels, &parents, &cycles)
}

fn add_atom(
    symbol: &str,
    labels: &mut Vec<String>,
    parents: &mut Vec<Option<(usize, u8)>>,
    prev: &mut Option<usize>,
    bond: &mut Option<(u8, usize)>,
) {
    let v = labels.len();
    labels.push(symbol.to_string());
    let order = bond.take().map_or(1, |(b, _)| b);
    parents.push(prev.map(|p| (p, order)));
    *prev = Some(v);
}

/// Parses SMILES into a molecular graph, atoms numbered in order of
/// appearance.
pub fn parse_smiles(text: &str, table: &ElementTable) -> Result<MolecularGraph> {
    Ok(parse_smiles_rep(text, table)?.into_graph())
}
